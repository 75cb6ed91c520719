#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace abmkit {

class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape/dimension mismatch or out-of-range access.
class ShapeError : public TensorError {
 public:
  using TensorError::TensorError;
};

/// NaN or Inf detected at an operation boundary.
class NumericError : public TensorError {
 public:
  using TensorError::TensorError;
};

/// Autodiff misuse: backward without reset, missing scalar loss, ...
class GraphError : public TensorError {
 public:
  using TensorError::TensorError;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense n-dimensional array of doubles with an optional gradient buffer.
///
/// Tensor is a cheap handle (shared pointer) to its storage. Data is
/// immutable during a forward/backward episode; mutable_data() is for
/// out-of-episode writes such as optimizer steps and finite-difference
/// probes. All values are kept finite: factories and operations raise
/// NumericError on NaN/Inf rather than letting them propagate.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor randn(Shape shape, std::mt19937_64& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy as a fresh leaf (no graph history carried over).
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const;
  static Tensor wrap(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Define-by-run tape. Operations executed while a Graph is active (via
/// AutogradScope) append their backward rules in execution order;
/// backward() replays them in reverse. A Graph and its gradient buffers
/// belong to one thread per episode; rebuild a fresh Graph per forward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse execution
  /// order. loss must hold exactly one element. Calling backward a second
  /// time without reset() is an error.
  void backward(const Tensor& loss);
  void reset();

  std::size_t num_recorded() const { return records_.size(); }
  bool backward_called() const { return backward_called_; }

  /// The graph recording on the current thread, or nullptr.
  static Graph* active();

  void record(std::function<void()> backward_step);

 private:
  friend class AutogradScope;
  std::vector<std::function<void()>> records_;
  bool backward_called_ = false;
};

/// RAII activation of a Graph on the current thread. Scopes nest; the
/// innermost graph records.
class AutogradScope {
 public:
  explicit AutogradScope(Graph& graph);
  ~AutogradScope();
  AutogradScope(const AutogradScope&) = delete;
  AutogradScope& operator=(const AutogradScope&) = delete;

 private:
  Graph* previous_;
};

namespace detail {

/// Throws NumericError naming `op` if any value is non-finite.
void check_finite(std::span<const double> values, const char* op);

}  // namespace detail

}  // namespace abmkit
