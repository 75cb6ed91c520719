#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/abm.hpp"
#include "abmkit/tensor.hpp"

namespace abmkit {

/// forward(x) = w2 . relu(w1 . x + b1) + b2, at vector granularity
/// (1x1-convolution semantics).
struct TwoLayerNet {
  Tensor w1;  // [H x C]
  Tensor b1;  // [H]
  Tensor w2;  // [D x H]
  Tensor b2;  // [D]

  std::size_t in_dim() const { return w1.dim(1); }
  std::size_t hidden_dim() const { return w1.dim(0); }
  std::size_t out_dim() const { return w2.dim(0); }

  Tensor forward(const Tensor& x) const;        // [C] -> [D]
  Tensor forward_rows(const Tensor& xs) const;  // [n x C] -> [n x D]

  std::vector<std::pair<std::string, Tensor>> named_tensors(const std::string& prefix) const;
  TwoLayerNet clone() const;
  void validate() const;

  static TwoLayerNet randn_init(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                                std::mt19937_64& rng, bool requires_grad = true);

  /// Snippet adaptation: tiles w1 across K copies of the input channels so
  /// the first layer perceives a K-frame snippet (output on a stacked
  /// snippet equals the sum of per-frame responses plus one bias).
  TwoLayerNet widen_input(std::size_t copies) const;
};

/// Where each parameter slice of a converted module came from.
struct SliceRecord {
  std::string param;       // "a", "b", "u", "bias_a", "bias_b", "bias_out"
  std::size_t row_begin;   // row range within the parameter (end exclusive)
  std::size_t row_end;
  std::string source;      // "w1^T", "b1", "w2", "b2", "zeros", "ones"
  bool pretrained;
};

struct SurgeryResult {
  AbmParams params;
  std::vector<SliceRecord> symbol_table;
};

struct SurgeryReport {
  double max_abs_deviation = 0.0;
  std::size_t n_probes = 0;
  bool passed = false;
  std::vector<SliceRecord> frozen_symbol_table;
};

/// Converts a two-layer net into an ABM-G by attaching the auxiliary
/// branch: a = w1^T, bias_a = b1, u = w2, bias_out = b2 carry the
/// pretrained weights; b = 0, bias_b = 1 make the second branch output the
/// all-ones vector, so abm_g_forward(p, x, x) equals net.forward(x).
SurgeryResult build_auxiliary_branch(const TwoLayerNet& net);

/// Widens a converted module to a temporal variant (kind C or A): the rows
/// covering the current frame keep the pretrained weights, every
/// neighbor-frame row starts at zero, so per-frame outputs are unchanged
/// until training moves them.
SurgeryResult expand_temporal(const SurgeryResult& converted, const VariantSpec& target,
                              std::size_t channels);

/// Draws n_probes standard-normal inputs of `probe_shape` and reports the
/// largest elementwise |before - after|. passed requires deviation < 1e-6
/// and at least 100 probes.
SurgeryReport verify_identity(const std::function<Tensor(const Tensor&)>& before,
                              const std::function<Tensor(const Tensor&)>& after,
                              std::size_t n_probes, const Shape& probe_shape, std::uint64_t seed);

}  // namespace abmkit
