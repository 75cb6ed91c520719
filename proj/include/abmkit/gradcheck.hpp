#pragma once

#include <functional>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

/// Compares analytic gradients of a scalar-valued computation against
/// central finite differences (f(x+eps) - f(x-eps)) / (2 eps), perturbing
/// every coordinate of every leaf in turn. `f` must re-evaluate the
/// computation from the current leaf contents on each call; all leaves must
/// have requires_grad set. Returns the largest relative error
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                  double eps = 1e-5);

}  // namespace abmkit
