#include "abmkit/abm.hpp"

#include <cmath>
#include <utility>

#include "abmkit/flops.hpp"
#include "abmkit/ops.hpp"

namespace abmkit {

namespace {

Tensor activate(const Tensor& t, Activation activation) {
  return activation == Activation::relu ? relu(t) : t;
}

// x_{t-1} / x_{t+1} views of a [T x C] sequence with replicate boundary.
Tensor shift_back(const Tensor& seq) {
  const std::size_t t = seq.dim(0);
  if (t == 1) return seq;
  return concat({slice(seq, 0, 0, 1), slice(seq, 0, 0, t - 1)}, 0);
}

Tensor shift_forward(const Tensor& seq) {
  const std::size_t t = seq.dim(0);
  if (t == 1) return seq;
  return concat({slice(seq, 0, 1, t - 1), slice(seq, 0, t - 1, 1)}, 0);
}

}  // namespace

char variant_kind_char(VariantKind kind) {
  switch (kind) {
    case VariantKind::G: return 'G';
    case VariantKind::S: return 'S';
    case VariantKind::C: return 'C';
    case VariantKind::A: return 'A';
  }
  throw TensorError("bad variant kind");
}

VariantKind variant_kind_from_char(char c) {
  switch (c) {
    case 'G': return VariantKind::G;
    case 'S': return VariantKind::S;
    case 'C': return VariantKind::C;
    case 'A': return VariantKind::A;
    default: throw TensorError(std::string("unknown variant kind '") + c + "'");
  }
}

void VariantSpec::validate() const {
  if (window != 3) {
    throw ShapeError("variant window m must be 3, got " + std::to_string(window));
  }
  if (kind == VariantKind::A && (beta < 0.0 || beta > 1.0 || !std::isfinite(beta))) {
    throw ShapeError("beta must lie in [0, 1], got " + std::to_string(beta));
  }
}

std::size_t AbmParams::parameter_count() const {
  return u.size() + a.size() + b.size() + bias_a.size() + bias_b.size() + bias_out.size();
}

std::vector<std::pair<std::string, Tensor>> AbmParams::named_tensors(
    const std::string& prefix) const {
  return {{prefix + ".u", u},           {prefix + ".a", a},
          {prefix + ".b", b},           {prefix + ".bias_a", bias_a},
          {prefix + ".bias_b", bias_b}, {prefix + ".bias_out", bias_out}};
}

AbmParams AbmParams::clone() const {
  AbmParams copy;
  copy.u = u.clone();
  copy.a = a.clone();
  copy.b = b.clone();
  copy.bias_a = bias_a.clone();
  copy.bias_b = bias_b.clone();
  copy.bias_out = bias_out.clone();
  copy.activation = activation;
  return copy;
}

void AbmParams::validate() const {
  if (!u.defined() || !a.defined() || !b.defined() || !bias_a.defined() || !bias_b.defined() ||
      !bias_out.defined()) {
    throw TensorError("AbmParams with undefined tensors");
  }
  const std::size_t r = u.dim(1);
  if (a.rank() != 2 || b.rank() != 2 || u.rank() != 2) {
    throw ShapeError("AbmParams u/a/b must be matrices");
  }
  if (a.dim(1) != r || b.dim(1) != r) {
    throw ShapeError("AbmParams rank mismatch: u " + shape_to_string(u.shape()) + ", a " +
                     shape_to_string(a.shape()) + ", b " + shape_to_string(b.shape()));
  }
  if (bias_a.shape() != Shape{r} || bias_b.shape() != Shape{r}) {
    throw ShapeError("AbmParams bias_a/bias_b must have length R=" + std::to_string(r));
  }
  if (bias_out.shape() != Shape{u.dim(0)}) {
    throw ShapeError("AbmParams bias_out must have length D=" + std::to_string(u.dim(0)));
  }
}

AbmParams AbmParams::randn_init(std::size_t out_dim, std::size_t in_a, std::size_t in_b,
                                std::size_t rank, std::mt19937_64& rng, Activation activation,
                                bool requires_grad) {
  AbmParams p;
  p.a = Tensor::randn({in_a, rank}, rng, 1.0 / std::sqrt(static_cast<double>(in_a)),
                      requires_grad);
  p.b = Tensor::randn({in_b, rank}, rng, 1.0 / std::sqrt(static_cast<double>(in_b)),
                      requires_grad);
  p.u = Tensor::randn({out_dim, rank}, rng, 1.0 / std::sqrt(static_cast<double>(rank)),
                      requires_grad);
  p.bias_a = Tensor::zeros({rank}, requires_grad);
  p.bias_b = Tensor::zeros({rank}, requires_grad);
  p.bias_out = Tensor::zeros({out_dim}, requires_grad);
  p.activation = activation;
  return p;
}

Tensor naive_bilinear(const Tensor& w, const Tensor& x, const Tensor& y) {
  if (w.rank() != 3) {
    throw ShapeError("naive_bilinear: weights must be [DxCxC'], got " +
                     shape_to_string(w.shape()));
  }
  const std::size_t d = w.dim(0), c = w.dim(1), cp = w.dim(2);
  if (x.shape() != Shape{c} || y.shape() != Shape{cp}) {
    throw ShapeError("naive_bilinear: inputs " + shape_to_string(x.shape()) + ", " +
                     shape_to_string(y.shape()) + " do not match weights " +
                     shape_to_string(w.shape()));
  }
  const auto wd = w.data();
  const auto xd = x.data();
  const auto yd = y.data();
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < cp; ++j) acc += wd[(k * c + i) * cp + j] * xd[i] * yd[j];
    }
    out[k] = acc;
  }
  detail::check_finite(out, "naive_bilinear");
  return Tensor::from_vector({d}, std::move(out));
}

AbmParams factorize_exact(const Tensor& w) {
  if (w.rank() != 3) {
    throw ShapeError("factorize_exact: weights must be [DxCxC'], got " +
                     shape_to_string(w.shape()));
  }
  const std::size_t d = w.dim(0), c = w.dim(1), cp = w.dim(2);
  const std::size_t r = c * cp;
  std::vector<double> ud(d * r, 0.0), ad(c * r, 0.0), bd(cp * r, 0.0);
  const auto wd = w.data();
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < cp; ++j) {
      const std::size_t col = i * cp + j;
      ad[i * r + col] = 1.0;
      bd[j * r + col] = 1.0;
      for (std::size_t k = 0; k < d; ++k) ud[k * r + col] = wd[(k * c + i) * cp + j];
    }
  }
  AbmParams p;
  p.u = Tensor::from_vector({d, r}, std::move(ud));
  p.a = Tensor::from_vector({c, r}, std::move(ad));
  p.b = Tensor::from_vector({cp, r}, std::move(bd));
  p.bias_a = Tensor::zeros({r});
  p.bias_b = Tensor::zeros({r});
  p.bias_out = Tensor::zeros({d});
  p.activation = Activation::none;
  return p;
}

Tensor abm_g_rows(const AbmParams& p, const Tensor& xs, const Tensor& ys) {
  p.validate();
  if (xs.rank() != 2 || ys.rank() != 2 || xs.dim(0) != ys.dim(0)) {
    throw ShapeError("abm_g_rows: inputs must be [n x C_a], [n x C_b], got " +
                     shape_to_string(xs.shape()) + ", " + shape_to_string(ys.shape()));
  }
  if (xs.dim(1) != p.in_a() || ys.dim(1) != p.in_b()) {
    throw ShapeError("abm_g_rows: inputs " + shape_to_string(xs.shape()) + ", " +
                     shape_to_string(ys.shape()) + " do not match projections [" +
                     std::to_string(p.in_a()) + "], [" + std::to_string(p.in_b()) + "]");
  }
  Tensor ha = add_bias(matmul(xs, p.a), p.bias_a);
  Tensor hb = add_bias(matmul(ys, p.b), p.bias_b);
  Tensor h = activate(hadamard(ha, hb), p.activation);
  return add_bias(matmul(h, transpose(p.u)), p.bias_out);
}

Tensor abm_g_forward(const AbmParams& p, const Tensor& x, const Tensor& y) {
  if (x.rank() != 1 || y.rank() != 1) {
    throw ShapeError("abm_g_forward: inputs must be vectors, got " + shape_to_string(x.shape()) +
                     ", " + shape_to_string(y.shape()));
  }
  Tensor out = abm_g_rows(p, reshape(x, {1, x.dim(0)}), reshape(y, {1, y.dim(0)}));
  return reshape(out, {out.dim(1)});
}

Tensor abm_s_forward(const AbmParams& p, const Tensor& seq) {
  if (seq.rank() != 2) {
    throw ShapeError("abm_s_forward: sequence must be [T x C], got " +
                     shape_to_string(seq.shape()));
  }
  return abm_g_rows(p, seq, shift_forward(seq));
}

Tensor abm_c_forward(const AbmParams& p, const Tensor& seq) {
  if (seq.rank() != 2) {
    throw ShapeError("abm_c_forward: sequence must be [T x C], got " +
                     shape_to_string(seq.shape()));
  }
  const std::size_t c = seq.dim(1);
  if (p.in_a() != 3 * c || p.in_b() != 3 * c) {
    throw ShapeError("abm_c_forward: projections expect " + std::to_string(p.in_a()) +
                     " channels, sequence provides 3*" + std::to_string(c));
  }
  Tensor window = concat({shift_back(seq), seq, shift_forward(seq)}, 1);
  return abm_g_rows(p, window, window);
}

std::size_t dynamic_channels(std::size_t channels, double beta) {
  if (beta < 0.0 || beta > 1.0 || !std::isfinite(beta)) {
    throw ShapeError("beta must lie in [0, 1], got " + std::to_string(beta));
  }
  const double d = std::floor(beta * static_cast<double>(channels) + 0.5);  // half-up
  const auto rounded = static_cast<std::size_t>(d);
  return rounded > channels ? channels : rounded;
}

StaticDynamicSplit split_static_dynamic(const Tensor& seq, double beta) {
  if (seq.rank() != 2) {
    throw ShapeError("split_static_dynamic: sequence must be [T x C], got " +
                     shape_to_string(seq.shape()));
  }
  const std::size_t c = seq.dim(1);
  const std::size_t d = dynamic_channels(c, beta);
  StaticDynamicSplit out;
  if (d < c) out.static_part = slice(seq, 1, 0, c - d);
  if (d > 0) out.dynamic_part = slice(seq, 1, c - d, d);
  return out;
}

Tensor abm_a_forward(const AbmParams& p, const Tensor& seq, double beta) {
  if (seq.rank() != 2) {
    throw ShapeError("abm_a_forward: sequence must be [T x C], got " +
                     shape_to_string(seq.shape()));
  }
  const std::size_t c = seq.dim(1);
  const std::size_t d = dynamic_channels(c, beta);
  const std::size_t width = c + 2 * d;
  if (p.in_a() != width || p.in_b() != width) {
    throw ShapeError("abm_a_forward: projections expect " + std::to_string(p.in_a()) +
                     " channels, beta=" + std::to_string(beta) + " over C=" + std::to_string(c) +
                     " yields " + std::to_string(width));
  }
  Tensor entry;
  if (d == 0) {
    entry = seq;
  } else {
    Tensor prev_dyn = slice(shift_back(seq), 1, c - d, d);
    Tensor next_dyn = slice(shift_forward(seq), 1, c - d, d);
    entry = concat({seq, prev_dyn, next_dyn}, 1);
  }
  return abm_g_rows(p, entry, entry);
}

std::vector<std::size_t> abm_a_to_c_permutation(std::size_t channels) {
  // x''_t = (x_t, x_{t-1}, x_{t+1})  vs  x'_t = (x_{t-1}, x_t, x_{t+1})
  std::vector<std::size_t> perm(3 * channels);
  for (std::size_t i = 0; i < channels; ++i) {
    perm[i] = channels + i;
    perm[channels + i] = i;
    perm[2 * channels + i] = 2 * channels + i;
  }
  return perm;
}

AbmParams permute_input_rows(const AbmParams& p, const std::vector<std::size_t>& perm) {
  p.validate();
  if (perm.size() != p.in_a() || p.in_a() != p.in_b()) {
    throw ShapeError("permute_input_rows: permutation length " + std::to_string(perm.size()) +
                     " does not match projection width " + std::to_string(p.in_a()));
  }
  const std::size_t r = p.rank_r();
  std::vector<double> ad(perm.size() * r), bd(perm.size() * r);
  const auto pa = p.a.data();
  const auto pb = p.b.data();
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size()) throw ShapeError("permute_input_rows: index out of range");
    for (std::size_t col = 0; col < r; ++col) {
      ad[i * r + col] = pa[perm[i] * r + col];
      bd[i * r + col] = pb[perm[i] * r + col];
    }
  }
  AbmParams out = p.clone();
  out.a = Tensor::from_vector({perm.size(), r}, std::move(ad), p.a.requires_grad());
  out.b = Tensor::from_vector({perm.size(), r}, std::move(bd), p.b.requires_grad());
  return out;
}

AbmStack::AbmStack(std::vector<Layer> layers_in, Placement placement_in,
                   std::optional<std::size_t> pool_after)
    : layers(std::move(layers_in)), placement(placement_in), temporal_pool_after(pool_after) {
  validate();
}

std::size_t AbmStack::layer_input_channels(const Layer& layer) {
  layer.spec.validate();
  layer.params.validate();
  const std::size_t width = layer.params.in_a();
  if (layer.params.in_b() != width) {
    throw ShapeError("stack layer projections must share one input width");
  }
  switch (layer.spec.kind) {
    case VariantKind::G:
    case VariantKind::S:
      return width;
    case VariantKind::C:
      if (width % 3 != 0) {
        throw ShapeError("ABM-C projection width " + std::to_string(width) +
                         " is not 3 * channels");
      }
      return width / 3;
    case VariantKind::A: {
      for (std::size_t c = 1; c <= width; ++c) {
        if (c + 2 * dynamic_channels(c, layer.spec.beta) == width) return c;
      }
      throw ShapeError("ABM-A projection width " + std::to_string(width) +
                       " unreachable for beta=" + std::to_string(layer.spec.beta));
    }
  }
  throw TensorError("bad variant kind");
}

void AbmStack::validate() const {
  if (layers.empty()) throw ShapeError("stack needs at least one layer");
  std::size_t expected = layer_input_channels(layers[0]);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::size_t in_c = layer_input_channels(layers[l]);
    if (in_c != expected) {
      throw ShapeError("stack layer " + std::to_string(l) + " consumes " + std::to_string(in_c) +
                       " channels but receives " + std::to_string(expected));
    }
    expected = layers[l].params.out_dim();
  }
  if (temporal_pool_after) {
    if (placement != Placement::implanted) {
      throw ShapeError("temporal_pool_after is only valid for implanted stacks");
    }
    if (*temporal_pool_after >= layers.size()) {
      throw ShapeError("temporal_pool_after index " + std::to_string(*temporal_pool_after) +
                       " out of range");
    }
  }
}

std::size_t AbmStack::input_channels() const { return layer_input_channels(layers.at(0)); }

std::size_t AbmStack::output_dim() const { return layers.back().params.out_dim(); }

std::size_t AbmStack::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers) n += layer.params.parameter_count();
  return n;
}

AbmStack AbmStack::clone() const {
  AbmStack copy;
  copy.placement = placement;
  copy.temporal_pool_after = temporal_pool_after;
  copy.layers.reserve(layers.size());
  for (const Layer& layer : layers) copy.layers.push_back({layer.spec, layer.params.clone()});
  return copy;
}

Tensor stack_forward(const AbmStack& stack, const Tensor& seq) {
  Tensor h = seq;
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const auto& layer = stack.layers[l];
    flops::LabelScope label("abm" + std::to_string(l));
    switch (layer.spec.kind) {
      case VariantKind::G:
        h = abm_g_rows(layer.params, h, h);
        break;
      case VariantKind::S:
        h = abm_s_forward(layer.params, h);
        break;
      case VariantKind::C:
        h = abm_c_forward(layer.params, h);
        break;
      case VariantKind::A:
        h = abm_a_forward(layer.params, h, layer.spec.beta);
        break;
    }
    if (stack.temporal_pool_after && *stack.temporal_pool_after == l) {
      h = max_pool_time(h);
    }
  }
  return h;
}

Tensor classify(const AbmStack& stack, const Tensor& seq, const Tensor& head_w,
                const Tensor& head_b) {
  Tensor h = stack_forward(stack, seq);
  flops::LabelScope label("head");
  Tensor logits = add_bias(matmul(h, transpose(head_w)), head_b);
  return mean_over_axis(logits, 0);
}

}  // namespace abmkit
