#include "abmkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace abmkit {

double grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                  double eps) {
  if (leaves.empty()) throw GraphError("grad_check: no leaves given");
  for (const Tensor& leaf : leaves) {
    if (!leaf.requires_grad()) {
      throw GraphError("grad_check: leaf without requires_grad");
    }
  }

  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    for (Tensor leaf : leaves) leaf.zero_grad();
    Graph graph;
    AutogradScope scope(graph);
    Tensor loss = f();
    graph.backward(loss);
    analytic.reserve(leaves.size());
    for (const Tensor& leaf : leaves) {
      if (leaf.has_grad()) {
        auto g = leaf.grad();
        analytic.emplace_back(g.begin(), g.end());
      } else {
        analytic.emplace_back(leaf.size(), 0.0);
      }
    }
  }

  // Numeric pass, one coordinate at a time.
  double max_err = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor leaf = leaves[li];
    auto values = leaf.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[li][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace abmkit
