#include "abmkit/flops.hpp"

namespace abmkit::flops {

namespace {

struct CountingState {
  CountingScope* scope = nullptr;
  MultiplyCounts* counts = nullptr;
  std::vector<std::string> label_stack;
};

thread_local CountingState g_state;

}  // namespace

std::uint64_t MultiplyCounts::labeled(const std::string& label) const {
  for (const auto& [name, n] : by_label) {
    if (name == label) return n;
  }
  return 0;
}

bool counting() noexcept { return g_state.counts != nullptr; }

void add_multiplies(std::uint64_t n) {
  MultiplyCounts* counts = g_state.counts;
  if (!counts) return;
  counts->total += n;
  const std::string& label =
      g_state.label_stack.empty() ? std::string("(unlabeled)") : g_state.label_stack.back();
  for (auto& [name, sum] : counts->by_label) {
    if (name == label) {
      sum += n;
      return;
    }
  }
  counts->by_label.emplace_back(label, n);
}

CountingScope::CountingScope() : previous_(g_state.scope) {
  g_state.scope = this;
  g_state.counts = &counts_;
}

CountingScope::~CountingScope() {
  g_state.scope = previous_;
  g_state.counts = previous_ ? &previous_->counts_ : nullptr;
}

LabelScope::LabelScope(std::string label) { g_state.label_stack.push_back(std::move(label)); }

LabelScope::~LabelScope() { g_state.label_stack.pop_back(); }

std::uint64_t FlopsReport::total() const {
  std::uint64_t sum = 0;
  for (const auto& entry : per_layer) sum += entry.multiply_adds;
  return sum;
}

}  // namespace abmkit::flops
