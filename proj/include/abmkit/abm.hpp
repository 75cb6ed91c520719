#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

enum class Activation { none, relu };
enum class VariantKind { G, S, C, A };

char variant_kind_char(VariantKind kind);
VariantKind variant_kind_from_char(char c);

/// Which temporal variant a module layer computes. The concat window m is
/// fixed at 3 and boundaries replicate the edge frames.
struct VariantSpec {
  VariantKind kind = VariantKind::G;
  std::size_t window = 3;  // m
  double beta = 0.0;       // dynamic-channel fraction, A only

  void validate() const;
};

/// Factorized bilinear weights: z = u . act((a^T x + bias_a) o (b^T y + bias_b)) + bias_out.
/// The activation sits between the Hadamard product and the u projection,
/// so freezing the b branch at 1 reduces the module to the two-layer
/// network u . act(a^T x + bias_a) + bias_out.
struct AbmParams {
  Tensor u;         // [D x R]
  Tensor a;         // [C_a x R]
  Tensor b;         // [C_b x R]
  Tensor bias_a;    // [R]
  Tensor bias_b;    // [R]
  Tensor bias_out;  // [D]
  Activation activation = Activation::none;

  std::size_t rank_r() const { return u.dim(1); }
  std::size_t out_dim() const { return u.dim(0); }
  std::size_t in_a() const { return a.dim(0); }
  std::size_t in_b() const { return b.dim(0); }

  std::size_t parameter_count() const;
  std::vector<std::pair<std::string, Tensor>> named_tensors(const std::string& prefix) const;
  AbmParams clone() const;
  void validate() const;

  static AbmParams randn_init(std::size_t out_dim, std::size_t in_a, std::size_t in_b,
                              std::size_t rank, std::mt19937_64& rng,
                              Activation activation = Activation::relu,
                              bool requires_grad = true);
};

/// z_k = sum_ij w_kij x_i y_j with dense weights w [D x C x C']. Exact
/// reference for the factorized forms; forward only.
Tensor naive_bilinear(const Tensor& w, const Tensor& x, const Tensor& y);

/// Exact factorization of dense bilinear weights at R = C*C': column
/// r = i*C' + j has a[:,r] = e_i, b[:,r] = e_j, u[k,r] = w_kij. The
/// resulting module (no activation, zero biases) reproduces naive_bilinear.
AbmParams factorize_exact(const Tensor& w);

/// General module on a pair of vectors: x [C_a], y [C_b] -> [D].
Tensor abm_g_forward(const AbmParams& p, const Tensor& x, const Tensor& y);

/// Row-wise general module: xs [n x C_a], ys [n x C_b] -> [n x D].
Tensor abm_g_rows(const AbmParams& p, const Tensor& xs, const Tensor& ys);

/// Adjacent-pair variant: out_t = ABM-G(x_t, x_{t+1}), replicate boundary.
Tensor abm_s_forward(const AbmParams& p, const Tensor& seq);

/// Concat-window self variant (m = 3): out_t = ABM-G(x'_t, x'_t) with
/// x'_t = concat(x_{t-1}, x_t, x_{t+1}); p must take m*C channels.
Tensor abm_c_forward(const AbmParams& p, const Tensor& seq);

/// Trailing round(beta*C) channels of each frame are the dynamic part.
/// An empty part comes back as an undefined Tensor.
struct StaticDynamicSplit {
  Tensor static_part;   // [T x (C-d)]
  Tensor dynamic_part;  // [T x d]
};
StaticDynamicSplit split_static_dynamic(const Tensor& seq, double beta);

/// d = round(beta * C), half-up, clamped to [0, C].
std::size_t dynamic_channels(std::size_t channels, double beta);

/// Static/dynamic variant: out_t = ABM-G(x''_t, x''_t) with
/// x''_t = concat(x_t, v^d_{t-1}, v^d_{t+1}); p must take C + 2d channels.
/// beta = 0 is purely frame-level; beta = 1 equals ABM-C up to the channel
/// permutation published by abm_a_to_c_permutation.
Tensor abm_a_forward(const AbmParams& p, const Tensor& seq, double beta);

/// Index map sigma with x''[i] = x'[sigma(i)] at beta = 1: permuting ABM-C
/// projection rows by sigma yields the equivalent ABM-A weights.
std::vector<std::size_t> abm_a_to_c_permutation(std::size_t channels);

/// Applies a row permutation to both projection matrices:
/// out.a[i] = p.a[perm[i]].
AbmParams permute_input_rows(const AbmParams& p, const std::vector<std::size_t>& perm);

enum class Placement { top, implanted };

/// Ordered ABM layers; layer dimensions chain (out_dim of layer l is the
/// frame width entering layer l+1). Dimension errors surface at
/// construction. temporal_pool_after inserts a kernel-2 stride-2 temporal
/// maxpool after that layer index and is only valid for implanted stacks.
struct AbmStack {
  struct Layer {
    VariantSpec spec;
    AbmParams params;
  };
  std::vector<Layer> layers;
  Placement placement = Placement::top;
  std::optional<std::size_t> temporal_pool_after;

  AbmStack() = default;
  AbmStack(std::vector<Layer> layers, Placement placement,
           std::optional<std::size_t> temporal_pool_after = std::nullopt);

  void validate() const;
  std::size_t input_channels() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;
  AbmStack clone() const;

  /// Frame width a layer consumes, inferred from its projection width.
  static std::size_t layer_input_channels(const Layer& layer);
};

/// Sequential application of the stack to a [T x C] sequence.
Tensor stack_forward(const AbmStack& stack, const Tensor& seq);

/// Per-frame linear head (head_w [classes x D], head_b [classes]) followed
/// by an average over time: the consensus logits [classes].
Tensor classify(const AbmStack& stack, const Tensor& seq, const Tensor& head_w,
                const Tensor& head_b);

}  // namespace abmkit
