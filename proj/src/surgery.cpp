#include "abmkit/surgery.hpp"

#include <algorithm>
#include <cmath>

#include "abmkit/ops.hpp"
#include "abmkit/rng.hpp"

namespace abmkit {

void TwoLayerNet::validate() const {
  if (!w1.defined() || !b1.defined() || !w2.defined() || !b2.defined()) {
    throw TensorError("TwoLayerNet with undefined tensors");
  }
  if (w1.rank() != 2 || w2.rank() != 2) throw ShapeError("TwoLayerNet w1/w2 must be matrices");
  const std::size_t h = w1.dim(0);
  if (b1.shape() != Shape{h} || w2.dim(1) != h || b2.shape() != Shape{w2.dim(0)}) {
    throw ShapeError("TwoLayerNet dimensions disagree: w1 " + shape_to_string(w1.shape()) +
                     ", b1 " + shape_to_string(b1.shape()) + ", w2 " +
                     shape_to_string(w2.shape()) + ", b2 " + shape_to_string(b2.shape()));
  }
}

Tensor TwoLayerNet::forward_rows(const Tensor& xs) const {
  validate();
  Tensor hidden = relu(add_bias(matmul(xs, transpose(w1)), b1));
  return add_bias(matmul(hidden, transpose(w2)), b2);
}

Tensor TwoLayerNet::forward(const Tensor& x) const {
  if (x.rank() != 1) {
    throw ShapeError("TwoLayerNet::forward expects a vector, got " + shape_to_string(x.shape()));
  }
  Tensor out = forward_rows(reshape(x, {1, x.dim(0)}));
  return reshape(out, {out.dim(1)});
}

std::vector<std::pair<std::string, Tensor>> TwoLayerNet::named_tensors(
    const std::string& prefix) const {
  return {{prefix + ".w1", w1}, {prefix + ".b1", b1}, {prefix + ".w2", w2}, {prefix + ".b2", b2}};
}

TwoLayerNet TwoLayerNet::clone() const {
  TwoLayerNet copy;
  copy.w1 = w1.clone();
  copy.b1 = b1.clone();
  copy.w2 = w2.clone();
  copy.b2 = b2.clone();
  return copy;
}

TwoLayerNet TwoLayerNet::randn_init(std::size_t in_dim, std::size_t hidden_dim,
                                    std::size_t out_dim, std::mt19937_64& rng,
                                    bool requires_grad) {
  TwoLayerNet net;
  net.w1 = Tensor::randn({hidden_dim, in_dim}, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)),
                         requires_grad);
  net.b1 = Tensor::zeros({hidden_dim}, requires_grad);
  net.w2 = Tensor::randn({out_dim, hidden_dim}, rng,
                         1.0 / std::sqrt(static_cast<double>(hidden_dim)), requires_grad);
  net.b2 = Tensor::zeros({out_dim}, requires_grad);
  return net;
}

TwoLayerNet TwoLayerNet::widen_input(std::size_t copies) const {
  validate();
  if (copies < 1) throw ShapeError("widen_input: need at least one copy");
  const std::size_t h = hidden_dim(), c = in_dim();
  std::vector<double> wide(h * copies * c);
  const auto src = w1.data();
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t k = 0; k < copies; ++k) {
      std::copy_n(src.begin() + row * c, c, wide.begin() + row * copies * c + k * c);
    }
  }
  TwoLayerNet net = clone();
  net.w1 = Tensor::from_vector({h, copies * c}, std::move(wide), w1.requires_grad());
  return net;
}

SurgeryResult build_auxiliary_branch(const TwoLayerNet& net) {
  net.validate();
  const std::size_t c = net.in_dim(), h = net.hidden_dim(), d = net.out_dim();

  std::vector<double> a_data(c * h);
  const auto w1d = net.w1.data();
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < c; ++col) a_data[col * h + row] = w1d[row * c + col];
  }

  AbmParams p;
  p.a = Tensor::from_vector({c, h}, std::move(a_data), true);
  p.bias_a = net.b1.clone();
  p.u = net.w2.clone();
  p.bias_out = net.b2.clone();
  p.b = Tensor::zeros({c, h}, true);
  p.bias_b = Tensor::ones({h}, true);
  p.activation = Activation::relu;

  std::vector<SliceRecord> table = {
      {"a", 0, c, "w1^T", true},     {"bias_a", 0, h, "b1", true},
      {"u", 0, d, "w2", true},       {"bias_out", 0, d, "b2", true},
      {"b", 0, c, "zeros", false},   {"bias_b", 0, h, "ones", false},
  };
  return {std::move(p), std::move(table)};
}

SurgeryResult expand_temporal(const SurgeryResult& converted, const VariantSpec& target,
                              std::size_t channels) {
  target.validate();
  if (target.kind != VariantKind::C && target.kind != VariantKind::A) {
    throw ShapeError("expand_temporal targets kind C or A");
  }
  const AbmParams& p = converted.params;
  p.validate();
  if (p.in_a() != channels || p.in_b() != channels) {
    throw ShapeError("expand_temporal: module takes " + std::to_string(p.in_a()) +
                     " channels, expected " + std::to_string(channels));
  }

  std::size_t width, frame_begin;
  if (target.kind == VariantKind::C) {
    width = 3 * channels;       // x'_t = (x_{t-1}, x_t, x_{t+1})
    frame_begin = channels;
  } else {
    const std::size_t d = dynamic_channels(channels, target.beta);
    width = channels + 2 * d;   // x''_t = (x_t, v^d_{t-1}, v^d_{t+1})
    frame_begin = 0;
  }

  const std::size_t r = p.rank_r();
  auto widen = [&](const Tensor& m) {
    std::vector<double> data(width * r, 0.0);
    const auto src = m.data();
    std::copy_n(src.begin(), channels * r, data.begin() + frame_begin * r);
    return Tensor::from_vector({width, r}, std::move(data), true);
  };

  AbmParams wide = p.clone();
  wide.a = widen(p.a);
  wide.b = widen(p.b);

  std::vector<SliceRecord> table;
  for (const SliceRecord& rec : converted.symbol_table) {
    if (rec.param != "a" && rec.param != "b") {
      table.push_back(rec);
      continue;
    }
    if (frame_begin > 0) table.push_back({rec.param, 0, frame_begin, "zeros", false});
    table.push_back({rec.param, frame_begin, frame_begin + channels, rec.source, rec.pretrained});
    if (frame_begin + channels < width) {
      table.push_back({rec.param, frame_begin + channels, width, "zeros", false});
    }
  }
  return {std::move(wide), std::move(table)};
}

SurgeryReport verify_identity(const std::function<Tensor(const Tensor&)>& before,
                              const std::function<Tensor(const Tensor&)>& after,
                              std::size_t n_probes, const Shape& probe_shape, std::uint64_t seed) {
  std::mt19937_64 rng = make_rng(seed);
  SurgeryReport report;
  report.n_probes = n_probes;
  for (std::size_t i = 0; i < n_probes; ++i) {
    Tensor probe = Tensor::randn(probe_shape, rng);
    Tensor lhs = before(probe);
    Tensor rhs = after(probe);
    if (!same_shape(lhs.shape(), rhs.shape())) {
      throw ShapeError("verify_identity: outputs disagree in shape, " +
                       shape_to_string(lhs.shape()) + " vs " + shape_to_string(rhs.shape()));
    }
    const auto ld = lhs.data();
    const auto rd = rhs.data();
    for (std::size_t k = 0; k < ld.size(); ++k) {
      report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(ld[k] - rd[k]));
    }
  }
  report.passed = report.max_abs_deviation < 1e-6 && report.n_probes >= 100;
  return report;
}

}  // namespace abmkit
