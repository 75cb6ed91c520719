#include "abmkit/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>

#include "abmkit/abm.hpp"
#include "abmkit/ops.hpp"
#include "abmkit/rng.hpp"

namespace abmkit {

namespace {

Tensor sum_all(const Tensor& t) {
  Tensor row = reshape(t, {1, t.size()});
  return reshape(matmul(row, Tensor::ones({t.size(), 1})), {1});
}

// Identity forward with a backward rule that is off by 2 percent. Splicing
// this into a computation must make every finite-difference check fail.
Tensor faulty_identity(const Tensor& t) {
  auto out = std::make_shared<detail::Node>();
  out->shape = t.shape();
  out->data.assign(t.data().begin(), t.data().end());
  out->requires_grad = t.requires_grad();
  if (Graph* g = Graph::active(); g && out->requires_grad) {
    auto tn = t.node();
    g->record([out, tn]() {
      if (out->grad.empty() || !tn->requires_grad) return;
      tn->ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) tn->grad[i] += 1.02 * out->grad[i];
    });
  }
  return Tensor::wrap(out);
}

std::vector<Tensor> abm_leaves(AbmParams& p) {
  return {p.u, p.a, p.b, p.bias_a, p.bias_b, p.bias_out};
}

std::uint64_t name_tag(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct CheckSetup {
  std::vector<Tensor> leaves;
  std::function<Tensor()> forward;  // scalar loss
  double tolerance = 1e-4;
};

CheckSetup build_case(const std::string& name, std::mt19937_64& rng) {
  CheckSetup setup;
  if (name == "matmul") {
    Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
    Tensor mix = Tensor::randn({3, 2}, rng);
    setup.leaves = {a, b};
    setup.forward = [=]() { return sum_all(hadamard(matmul(a, b), mix)); };
    setup.tolerance = 1e-6;
  } else if (name == "hadamard") {
    Tensor a = Tensor::randn({5}, rng, 1.0, true);
    Tensor b = Tensor::randn({5}, rng, 1.0, true);
    setup.leaves = {a, b};
    setup.forward = [=]() { return sum_all(hadamard(hadamard(a, b), a)); };
    setup.tolerance = 1e-6;
  } else if (name == "concat_slice") {
    Tensor a = Tensor::randn({2, 3}, rng, 1.0, true);
    Tensor b = Tensor::randn({2, 2}, rng, 1.0, true);
    Tensor mix = Tensor::randn({2, 4}, rng);
    setup.leaves = {a, b};
    setup.forward = [=]() {
      Tensor joined = concat({a, b}, 1);
      return sum_all(hadamard(slice(joined, 1, 1, 4), mix));
    };
    setup.tolerance = 1e-6;
  } else if (name == "relu_bias_mean") {
    Tensor x = Tensor::randn({4, 3}, rng, 1.0, true);
    Tensor bias = Tensor::randn({3}, rng, 1.0, true);
    setup.leaves = {x, bias};
    setup.forward = [=]() { return sum_all(mean_over_axis(relu(add_bias(x, bias)), 0)); };
    setup.tolerance = 1e-6;
  } else if (name == "max_pool_time") {
    Tensor x = Tensor::randn({6, 3}, rng, 1.0, true);
    Tensor mix = Tensor::randn({3, 3}, rng);
    setup.leaves = {x};
    setup.forward = [=]() { return sum_all(hadamard(max_pool_time(x), mix)); };
    setup.tolerance = 1e-6;
  } else if (name == "softmax_ce") {
    Tensor logits = Tensor::randn({4, 6}, rng, 1.0, true);
    std::vector<std::size_t> labels{0, 3, 5, 2};
    setup.leaves = {logits};
    setup.forward = [=]() { return softmax_cross_entropy(logits, labels); };
    setup.tolerance = 1e-6;
  } else if (name == "abm_g" || name == "abm_s" || name == "abm_c" || name == "abm_a") {
    const std::size_t c = 4, d = 3, r = 4, t_len = 5;
    std::size_t width = c;
    if (name == "abm_c") width = 3 * c;
    if (name == "abm_a") width = c + 2 * dynamic_channels(c, 0.5);
    auto params = std::make_shared<AbmParams>(AbmParams::randn_init(d, width, width, r, rng));
    Tensor seq = Tensor::randn({t_len, c}, rng, 1.0, true);
    Tensor mix = Tensor::randn({t_len, d}, rng);
    setup.leaves = abm_leaves(*params);
    setup.leaves.push_back(seq);
    if (name == "abm_g") {
      setup.forward = [=]() { return sum_all(hadamard(abm_g_rows(*params, seq, seq), mix)); };
    } else if (name == "abm_s") {
      setup.forward = [=]() { return sum_all(hadamard(abm_s_forward(*params, seq), mix)); };
    } else if (name == "abm_c") {
      setup.forward = [=]() { return sum_all(hadamard(abm_c_forward(*params, seq), mix)); };
    } else {
      setup.forward = [=]() { return sum_all(hadamard(abm_a_forward(*params, seq, 0.5), mix)); };
    }
  } else if (name == "stack3") {
    const std::size_t c = 3, t_len = 6;
    auto layers = std::make_shared<std::vector<AbmStack::Layer>>();
    std::size_t in_c = c;
    for (int l = 0; l < 3; ++l) {
      layers->push_back({VariantSpec{VariantKind::C, 3, 0.0},
                         AbmParams::randn_init(c, 3 * in_c, 3 * in_c, 3, rng)});
      in_c = c;
    }
    auto stack = std::make_shared<AbmStack>(*layers, Placement::top);
    Tensor seq = Tensor::randn({t_len, c}, rng, 1.0, true);
    Tensor mix = Tensor::randn({t_len, c}, rng);
    setup.leaves.push_back(seq);
    for (auto& layer : stack->layers) {
      for (const Tensor& t : abm_leaves(layer.params)) setup.leaves.push_back(t);
    }
    setup.forward = [=]() { return sum_all(hadamard(stack_forward(*stack, seq), mix)); };
  } else {
    throw TensorError("unknown gradcheck case: " + name);
  }
  return setup;
}

}  // namespace

std::vector<std::string> gradcheck_suite_names() {
  return {"matmul", "hadamard",   "concat_slice", "relu_bias_mean", "max_pool_time",
          "softmax_ce", "abm_g", "abm_s",        "abm_c",          "abm_a",
          "stack3"};
}

GradCheckCase run_gradcheck_case(const std::string& name, std::size_t seeds, double eps,
                                 bool corrupt_backward) {
  GradCheckCase result;
  result.name = name;
  result.seeds = seeds;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng = make_rng(mix_seed(0x9c, seed, name_tag(name)));
    CheckSetup setup = build_case(name, rng);
    result.tolerance = setup.tolerance;
    auto forward = setup.forward;
    if (corrupt_backward) {
      forward = [inner = setup.forward]() { return faulty_identity(inner()); };
    }
    result.max_error = std::max(result.max_error, grad_check(forward, setup.leaves, eps));
  }
  result.passed = result.max_error < result.tolerance;
  return result;
}

}  // namespace abmkit
