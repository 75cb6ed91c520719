#pragma once

#include <cstddef>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

/// Matrix product [MxK] x [KxN] -> [MxN].
Tensor matmul(const Tensor& a, const Tensor& b);

/// [MxN] -> [NxM].
Tensor transpose(const Tensor& t);

/// Same data, new shape (element counts must agree).
Tensor reshape(const Tensor& t, Shape new_shape);

/// Element-wise product of identically shaped tensors.
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Concatenation along `axis`; all other dimensions must agree.
Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);

/// Contiguous sub-tensor [start, start+len) along `axis`.
Tensor slice(const Tensor& t, std::size_t axis, std::size_t start, std::size_t len);

Tensor relu(const Tensor& t);

/// Adds bias [N] to every row of t [MxN]; a rank-1 t of size N is treated
/// as a single row.
Tensor add_bias(const Tensor& t, const Tensor& bias);

/// Arithmetic mean over one axis; the axis is removed from the shape.
Tensor mean_over_axis(const Tensor& t, std::size_t axis);

/// Kernel-2 stride-2 max over non-overlapping time pairs of a [TxC]
/// sequence (T >= 2; a trailing odd frame is dropped). Backward routes the
/// gradient to the argmax, first index on ties.
Tensor max_pool_time(const Tensor& seq);

/// Mean negative log softmax probability over the batch; logits [BxK],
/// labels in [0, K). Backward is (softmax - onehot) / B.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

/// Row-wise softmax probabilities of logits [BxK] (plain values, no graph).
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace abmkit
