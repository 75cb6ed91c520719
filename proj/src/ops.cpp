#include "abmkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "abmkit/flops.hpp"

namespace abmkit {

namespace {

using detail::Node;

std::shared_ptr<Node> make_out(Shape shape, std::vector<double> data, bool requires_grad,
                               const char* op) {
  detail::check_finite(data, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.shape()));
  }
}

std::size_t prod(const Shape& shape, std::size_t begin, std::size_t end) {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= shape[i];
  return n;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  if (flops::counting()) flops::add_multiplies(static_cast<std::uint64_t>(m) * k * n);

  std::vector<double> out(m * n, 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = ad[i * k + kk];
      const double* brow = &bd[kk * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }

  bool needs = a.requires_grad() || b.requires_grad();
  auto out_node = make_out({m, n}, std::move(out), needs, "matmul");
  if (Graph* g = Graph::active(); g && needs) {
    auto an = a.node();
    auto bn = b.node();
    g->record([out_node, an, bn, m, k, n]() {
      if (out_node->grad.empty()) return;
      const auto& og = out_node->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double* grow = &og[i * n];
            const double* brow = &bn->data[kk * n];
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            an->grad[i * k + kk] += acc;
          }
        }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = an->data[i * k + kk];
            const double* grow = &og[i * n];
            double* brow = &bn->grad[kk * n];
            for (std::size_t j = 0; j < n; ++j) brow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor transpose(const Tensor& t) {
  require_rank(t, 2, "transpose");
  const std::size_t m = t.dim(0), n = t.dim(1);
  std::vector<double> out(m * n);
  const auto td = t.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = td[i * n + j];
  }
  bool needs = t.requires_grad();
  auto out_node = make_out({n, m}, std::move(out), needs, "transpose");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    g->record([out_node, tn, m, n]() {
      if (out_node->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) tn->grad[i * n + j] += out_node->grad[j * m + i];
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_numel(new_shape) != t.size()) {
    throw ShapeError("reshape: " + shape_to_string(t.shape()) + " to " +
                     shape_to_string(new_shape) + " changes element count");
  }
  std::vector<double> out(t.data().begin(), t.data().end());
  bool needs = t.requires_grad();
  auto out_node = make_out(std::move(new_shape), std::move(out), needs, "reshape");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    g->record([out_node, tn]() {
      if (out_node->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < tn->grad.size(); ++i) tn->grad[i] += out_node->grad[i];
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!same_shape(a.shape(), b.shape())) {
    throw ShapeError("hadamard: shapes disagree, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  const std::size_t n = a.size();
  if (flops::counting()) flops::add_multiplies(n);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] * bd[i];

  bool needs = a.requires_grad() || b.requires_grad();
  auto out_node = make_out(a.shape(), std::move(out), needs, "hadamard");
  if (Graph* g = Graph::active(); g && needs) {
    auto an = a.node();
    auto bn = b.node();
    g->record([out_node, an, bn, n]() {
      if (out_node->grad.empty()) return;
      const auto& og = out_node->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) an->grad[i] += og[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) bn->grad[i] += og[i] * an->data[i];
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw ShapeError("concat: empty tensor list");
  const Shape& first = tensors[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(first));
  }
  Shape out_shape = first;
  for (std::size_t t = 1; t < tensors.size(); ++t) {
    const Shape& s = tensors[t].shape();
    if (s.size() != first.size()) {
      throw ShapeError("concat: rank mismatch, " + shape_to_string(first) + " vs " +
                       shape_to_string(s));
    }
    for (std::size_t ax = 0; ax < s.size(); ++ax) {
      if (ax != axis && s[ax] != first[ax]) {
        throw ShapeError("concat: shapes disagree off axis " + std::to_string(axis) + ", " +
                         shape_to_string(first) + " vs " + shape_to_string(s));
      }
    }
    out_shape[axis] += s[axis];
  }

  const std::size_t outer = prod(first, 0, axis);
  const std::size_t tail = prod(first, axis + 1, first.size());
  std::vector<std::size_t> block(tensors.size());  // inner block size per tensor
  std::size_t total = 0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    block[t] = tensors[t].shape()[axis] * tail;
    total += block[t];
  }

  std::vector<double> out(outer * total);
  bool needs = false;
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = 0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      const auto src = tensors[t].data();
      std::copy_n(src.begin() + o * block[t], block[t], out.begin() + o * total + offset);
      offset += block[t];
    }
  }
  for (const Tensor& t : tensors) needs = needs || t.requires_grad();

  auto out_node = make_out(std::move(out_shape), std::move(out), needs, "concat");
  if (Graph* g = Graph::active(); g && needs) {
    std::vector<std::shared_ptr<Node>> nodes;
    nodes.reserve(tensors.size());
    for (const Tensor& t : tensors) nodes.push_back(t.node());
    g->record([out_node, nodes, block, outer, total]() {
      if (out_node->grad.empty()) return;
      const auto& og = out_node->grad;
      for (std::size_t o = 0; o < outer; ++o) {
        std::size_t offset = 0;
        for (std::size_t t = 0; t < nodes.size(); ++t) {
          if (nodes[t]->requires_grad) {
            nodes[t]->ensure_grad();
            for (std::size_t q = 0; q < block[t]; ++q) {
              nodes[t]->grad[o * block[t] + q] += og[o * total + offset + q];
            }
          }
          offset += block[t];
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len) {
  const Shape& s = t.shape();
  if (axis >= s.size()) {
    throw ShapeError("slice: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  }
  if (len == 0 || start + len > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of bounds on axis " +
                     std::to_string(axis) + " of " + shape_to_string(s));
  }
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t tail = prod(s, axis + 1, s.size());
  const std::size_t in_block = s[axis] * tail;
  const std::size_t out_block = len * tail;

  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<double> out(outer * out_block);
  const auto td = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(td.begin() + o * in_block + start * tail, out_block, out.begin() + o * out_block);
  }

  bool needs = t.requires_grad();
  auto out_node = make_out(std::move(out_shape), std::move(out), needs, "slice");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    g->record([out_node, tn, outer, tail, in_block, out_block, start]() {
      if (out_node->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t q = 0; q < out_block; ++q) {
          tn->grad[o * in_block + start * tail + q] += out_node->grad[o * out_block + q];
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor relu(const Tensor& t) {
  const std::size_t n = t.size();
  std::vector<double> out(n);
  const auto td = t.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = td[i] > 0.0 ? td[i] : 0.0;
  bool needs = t.requires_grad();
  auto out_node = make_out(t.shape(), std::move(out), needs, "relu");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    g->record([out_node, tn, n]() {
      if (out_node->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        if (tn->data[i] > 0.0) tn->grad[i] += out_node->grad[i];
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor add_bias(const Tensor& t, const Tensor& bias) {
  require_rank(bias, 1, "add_bias");
  const std::size_t n = bias.dim(0);
  std::size_t rows;
  if (t.rank() == 2) {
    rows = t.dim(0);
  } else if (t.rank() == 1) {
    rows = 1;
  } else {
    throw ShapeError("add_bias: expected rank 1 or 2, got " + shape_to_string(t.shape()));
  }
  if (t.size() != rows * n) {
    throw ShapeError("add_bias: " + shape_to_string(t.shape()) + " incompatible with bias " +
                     shape_to_string(bias.shape()));
  }

  std::vector<double> out(t.data().begin(), t.data().end());
  const auto bd = bias.data();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  }

  bool needs = t.requires_grad() || bias.requires_grad();
  auto out_node = make_out(t.shape(), std::move(out), needs, "add_bias");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    auto bn = bias.node();
    g->record([out_node, tn, bn, rows, n]() {
      if (out_node->grad.empty()) return;
      const auto& og = out_node->grad;
      if (tn->requires_grad) {
        tn->ensure_grad();
        for (std::size_t i = 0; i < og.size(); ++i) tn->grad[i] += og[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < n; ++j) bn->grad[j] += og[i * n + j];
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor mean_over_axis(const Tensor& t, std::size_t axis) {
  const Shape& s = t.shape();
  if (axis >= s.size()) {
    throw ShapeError("mean_over_axis: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(s));
  }
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t n = s[axis];
  const std::size_t inner = prod(s, axis + 1, s.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape = {1};

  if (flops::counting()) flops::add_multiplies(outer * inner);
  std::vector<double> out(outer * inner, 0.0);
  const auto td = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t q = 0; q < inner; ++q) {
        out[o * inner + q] += td[(o * n + k) * inner + q];
      }
    }
  }
  for (double& v : out) v *= inv_n;

  bool needs = t.requires_grad();
  auto out_node = make_out(std::move(out_shape), std::move(out), needs, "mean_over_axis");
  if (Graph* g = Graph::active(); g && needs) {
    auto tn = t.node();
    g->record([out_node, tn, outer, n, inner, inv_n]() {
      if (out_node->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t k = 0; k < n; ++k) {
          for (std::size_t q = 0; q < inner; ++q) {
            tn->grad[(o * n + k) * inner + q] += out_node->grad[o * inner + q] * inv_n;
          }
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor max_pool_time(const Tensor& seq) {
  require_rank(seq, 2, "max_pool_time");
  const std::size_t t_in = seq.dim(0), c = seq.dim(1);
  if (t_in < 2) {
    throw ShapeError("max_pool_time: need at least 2 time steps, got " +
                     shape_to_string(seq.shape()));
  }
  const std::size_t t_out = t_in / 2;
  std::vector<double> out(t_out * c);
  std::vector<std::size_t> argmax(t_out * c);
  const auto sd = seq.data();
  for (std::size_t p = 0; p < t_out; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i0 = (2 * p) * c + ch;
      const std::size_t i1 = (2 * p + 1) * c + ch;
      // strict > keeps the first index on ties
      if (sd[i1] > sd[i0]) {
        out[p * c + ch] = sd[i1];
        argmax[p * c + ch] = i1;
      } else {
        out[p * c + ch] = sd[i0];
        argmax[p * c + ch] = i0;
      }
    }
  }
  bool needs = seq.requires_grad();
  auto out_node = make_out({t_out, c}, std::move(out), needs, "max_pool_time");
  if (Graph* g = Graph::active(); g && needs) {
    auto sn = seq.node();
    g->record([out_node, sn, argmax = std::move(argmax)]() {
      if (out_node->grad.empty() || !sn->requires_grad) return;
      sn->ensure_grad();
      for (std::size_t i = 0; i < argmax.size(); ++i) sn->grad[argmax[i]] += out_node->grad[i];
    });
  }
  return Tensor::wrap(std::move(out_node));
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch " + std::to_string(batch));
  }
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                       std::to_string(classes) + ")");
    }
  }

  std::vector<double> probs(batch * classes);
  const auto ld = logits.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = &ld[i * classes];
    double row_max = row[0];
    for (std::size_t j = 1; j < classes; ++j) row_max = std::max(row_max, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs[i * classes + j] = std::exp(row[j] - row_max);
      sum += probs[i * classes + j];
    }
    for (std::size_t j = 0; j < classes; ++j) probs[i * classes + j] /= sum;
    loss -= row[labels[i]] - row_max - std::log(sum);
  }
  loss /= static_cast<double>(batch);

  bool needs = logits.requires_grad();
  auto out_node = make_out({1}, {loss}, needs, "softmax_cross_entropy");
  if (Graph* g = Graph::active(); g && needs) {
    auto ln = logits.node();
    g->record([out_node, ln, probs = std::move(probs), labels, batch, classes]() {
      if (out_node->grad.empty() || !ln->requires_grad) return;
      ln->ensure_grad();
      const double scale = out_node->grad[0] / static_cast<double>(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < classes; ++j) {
          const double onehot = (j == labels[i]) ? 1.0 : 0.0;
          ln->grad[i * classes + j] += scale * (probs[i * classes + j] - onehot);
        }
      }
    });
  }
  return Tensor::wrap(std::move(out_node));
}

std::vector<double> softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<double> probs(batch * classes);
  const auto ld = logits.data();
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = &ld[i * classes];
    double row_max = row[0];
    for (std::size_t j = 1; j < classes; ++j) row_max = std::max(row_max, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs[i * classes + j] = std::exp(row[j] - row_max);
      sum += probs[i * classes + j];
    }
    for (std::size_t j = 0; j < classes; ++j) probs[i * classes + j] /= sum;
  }
  return probs;
}

}  // namespace abmkit
