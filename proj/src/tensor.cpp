#include "abmkit/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace abmkit {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace detail {

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": non-finite value encountered");
    }
  }
}

}  // namespace detail

namespace {

void validate_shape(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_to_string(shape));
  }
}

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> data,
                                        bool requires_grad) {
  validate_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

thread_local Graph* g_active_graph = nullptr;

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return wrap(make_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::ones(Shape shape, bool requires_grad) {
  return full(std::move(shape), 1.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  detail::check_finite(std::span<const double>(&value, 1), "full");
  std::size_t n = shape_numel(shape);
  return wrap(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  detail::check_finite(values, "from_vector");
  return wrap(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value) {
  return from_vector({1}, {value});
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, double stddev, bool requires_grad) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::size_t n = shape_numel(shape);
  std::vector<double> values(n);
  for (double& v : values) v = dist(rng);
  return wrap(make_node(std::move(shape), std::move(values), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->data.size();
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::span<const double> Tensor::data() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match " +
                     shape_to_string(s));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) {
      throw ShapeError("index " + std::to_string(i) + " out of range on axis " +
                       std::to_string(axis) + " of " + shape_to_string(s));
    }
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!node_) throw TensorError("use of undefined tensor");
  node_->requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw GraphError("tensor has no gradient (backward not run, or not on the loss path)");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::clone() const {
  if (!node_) return {};
  auto copy = std::make_shared<detail::Node>();
  copy->shape = node_->shape;
  copy->data = node_->data;
  copy->requires_grad = node_->requires_grad;
  return wrap(std::move(copy));
}

const std::shared_ptr<detail::Node>& Tensor::node() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return node_;
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

void Graph::backward(const Tensor& loss) {
  if (backward_called_) {
    throw GraphError("backward already called on this graph; call reset() first");
  }
  if (loss.size() != 1) {
    throw GraphError("backward requires a scalar loss, got " + shape_to_string(loss.shape()));
  }
  backward_called_ = true;
  auto& node = *loss.node();
  node.ensure_grad();
  node.grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

void Graph::reset() {
  records_.clear();
  backward_called_ = false;
}

Graph* Graph::active() { return g_active_graph; }

void Graph::record(std::function<void()> backward_step) {
  records_.push_back(std::move(backward_step));
}

AutogradScope::AutogradScope(Graph& graph) : previous_(g_active_graph) {
  g_active_graph = &graph;
}

AutogradScope::~AutogradScope() { g_active_graph = previous_; }

}  // namespace abmkit
