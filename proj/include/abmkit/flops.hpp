#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit::flops {

/// Scalar-multiply accounting. Only forward inference is instrumented:
/// matmul counts M*K*N multiply-adds, hadamard counts one per element and
/// mean_over_axis one per output element (the 1/n application). Losses and
/// backward rules are outside the accounting.
struct MultiplyCounts {
  std::uint64_t total = 0;
  std::vector<std::pair<std::string, std::uint64_t>> by_label;

  std::uint64_t labeled(const std::string& label) const;
};

bool counting() noexcept;
void add_multiplies(std::uint64_t n);

/// Enables counting on the current thread for its lifetime.
class CountingScope {
 public:
  CountingScope();
  ~CountingScope();
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;

  const MultiplyCounts& counts() const { return counts_; }

 private:
  MultiplyCounts counts_;
  CountingScope* previous_;
};

/// Attributes multiplies to a named bucket (innermost label wins).
class LabelScope {
 public:
  explicit LabelScope(std::string label);
  ~LabelScope();
  LabelScope(const LabelScope&) = delete;
  LabelScope& operator=(const LabelScope&) = delete;
};

/// Per-layer multiply-add totals plus parameter count. The report total
/// always equals the sum of its per-layer entries.
struct FlopsReport {
  struct Entry {
    std::string layer;
    std::uint64_t multiply_adds = 0;
  };
  std::vector<Entry> per_layer;
  std::size_t parameter_count = 0;

  std::uint64_t total() const;
};

}  // namespace abmkit::flops
