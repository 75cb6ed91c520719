#include "abmkit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "abmkit/rng.hpp"

namespace abmkit {

namespace {

constexpr std::uint64_t kTagOrdering = 0xabd1;
constexpr std::uint64_t kTagPrototypes = 0xabd2;
constexpr std::uint64_t kTagTrain = 0xabd3;
constexpr std::uint64_t kTagVal = 0xabd4;

constexpr std::size_t kVelocityPrototypes = 13;  // prime, so every speed cycles fully

std::size_t order_prototype_count(std::size_t frames) { return std::min<std::size_t>(8, frames); }

std::vector<std::size_t> balanced_multiset(std::size_t frames, std::size_t prototypes) {
  std::vector<std::size_t> ids;
  ids.reserve(frames);
  for (std::size_t p = 0; p < prototypes; ++p) {
    const std::size_t count = frames / prototypes + (p < frames % prototypes ? 1 : 0);
    ids.insert(ids.end(), count, p);
  }
  return ids;
}

std::vector<std::pair<std::size_t, std::size_t>> bigram_profile(
    const std::vector<std::size_t>& ids) {
  std::vector<std::pair<std::size_t, std::size_t>> grams;
  grams.reserve(ids.size());
  for (std::size_t t = 0; t + 1 < ids.size(); ++t) grams.emplace_back(ids[t], ids[t + 1]);
  std::sort(grams.begin(), grams.end());
  return grams;
}

// Class orderings as mutually reversed pairs, pairwise distinct both as
// sequences and as bigram profiles (so local-window models can separate
// them).
std::vector<std::vector<std::size_t>> make_orderings(std::size_t n_classes, std::size_t frames,
                                                     std::mt19937_64& rng) {
  const std::vector<std::size_t> base = balanced_multiset(frames, order_prototype_count(frames));
  std::vector<std::vector<std::size_t>> orderings;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> profiles;

  auto accepts = [&](const std::vector<std::size_t>& candidate,
                     const std::vector<std::vector<std::size_t>>& pending) {
    const auto profile = bigram_profile(candidate);
    for (const auto& existing : orderings) {
      if (existing == candidate) return false;
    }
    for (const auto& existing : profiles) {
      if (existing == profile) return false;
    }
    for (const auto& other : pending) {
      if (other == candidate || bigram_profile(other) == profile) return false;
    }
    return true;
  };

  std::size_t attempts = 0;
  while (orderings.size() < n_classes) {
    if (++attempts > 20000) {
      throw ShapeError("order-discrimination: cannot construct " + std::to_string(n_classes) +
                       " distinct orderings of " + std::to_string(frames) + " frames");
    }
    std::vector<std::size_t> forward = base;
    std::shuffle(forward.begin(), forward.end(), rng);
    std::vector<std::size_t> backward(forward.rbegin(), forward.rend());
    if (forward == backward) continue;  // palindromic, cannot pair

    const bool want_pair = n_classes - orderings.size() >= 2;
    if (want_pair) {
      if (!accepts(forward, {backward}) || !accepts(backward, {forward})) continue;
      orderings.push_back(forward);
      profiles.push_back(bigram_profile(forward));
      orderings.push_back(backward);
      profiles.push_back(bigram_profile(backward));
    } else {
      if (!accepts(forward, {})) continue;
      orderings.push_back(forward);
      profiles.push_back(bigram_profile(forward));
    }
  }
  return orderings;
}

std::vector<std::size_t> palindrome_ids(std::size_t frames, std::size_t prototypes,
                                        std::size_t label, std::mt19937_64& rng) {
  const std::size_t half = (frames + 1) / 2;
  std::uniform_int_distribution<std::size_t> proto(0, prototypes - 1);
  for (;;) {
    std::vector<std::size_t> ids(frames);
    for (std::size_t t = 0; t < half; ++t) ids[t] = proto(rng);
    for (std::size_t t = half; t < frames; ++t) ids[t] = ids[frames - 1 - t];
    if (label == 1) return ids;

    // non-palindrome: permute the mirrored tail until it differs
    std::vector<std::size_t> tail(ids.begin() + half, ids.end());
    bool uniform_tail = std::all_of(tail.begin(), tail.end(),
                                    [&](std::size_t v) { return v == tail.front(); });
    if (uniform_tail || tail.size() < 2) continue;  // cannot differ, redraw
    std::vector<std::size_t> mirrored = tail;
    for (int tries = 0; tries < 64; ++tries) {
      std::shuffle(tail.begin(), tail.end(), rng);
      if (tail != mirrored) {
        std::copy(tail.begin(), tail.end(), ids.begin() + half);
        return ids;
      }
    }
  }
}

VideoSample render_sample(const SyntheticTaskSpec& spec, const std::vector<Tensor>& prototypes,
                          std::vector<std::size_t> ids, std::size_t label,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> frames(spec.frames * spec.channels);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const auto proto = prototypes[ids[t]].data();
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
      frames[t * spec.channels + ch] = proto[ch] + spec.noise_sigma * noise(rng);
    }
  }
  VideoSample sample;
  sample.frames = Tensor::from_vector({spec.frames, spec.channels}, std::move(frames));
  sample.label = label;
  sample.prototype_ids = std::move(ids);
  return sample;
}

}  // namespace

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::order_discrimination: return "order-discrimination";
    case TaskKind::velocity_class: return "velocity-class";
    case TaskKind::palindrome: return "palindrome";
  }
  throw TensorError("bad task kind");
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "order-discrimination") return TaskKind::order_discrimination;
  if (name == "velocity-class") return TaskKind::velocity_class;
  if (name == "palindrome") return TaskKind::palindrome;
  throw TensorError("unknown task: " + name);
}

void SyntheticTaskSpec::validate() const {
  if (n_classes < 2) throw ShapeError("task needs at least 2 classes");
  if (channels < 1) throw ShapeError("task needs at least 1 channel");
  if (train_samples < 1 || val_samples < 1) throw ShapeError("task needs train and val samples");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ShapeError("noise_sigma must be finite and >= 0");
  }
  switch (task) {
    case TaskKind::order_discrimination:
      if (frames < 2) throw ShapeError("order-discrimination needs at least 2 frames");
      break;
    case TaskKind::velocity_class:
      if (frames % kVelocityPrototypes != 0) {
        throw ShapeError("velocity-class needs frames divisible by " +
                         std::to_string(kVelocityPrototypes));
      }
      if (n_classes > kVelocityPrototypes - 1) {
        throw ShapeError("velocity-class supports at most " +
                         std::to_string(kVelocityPrototypes - 1) + " classes");
      }
      break;
    case TaskKind::palindrome:
      if (n_classes != 2) throw ShapeError("palindrome is a binary task");
      if (frames < 4) throw ShapeError("palindrome needs at least 4 frames");
      break;
  }
}

SyntheticDataset generate_dataset(const SyntheticTaskSpec& spec) {
  spec.validate();
  SyntheticDataset data;
  data.spec = spec;

  std::size_t n_prototypes = 0;
  switch (spec.task) {
    case TaskKind::order_discrimination:
      n_prototypes = order_prototype_count(spec.frames);
      break;
    case TaskKind::velocity_class:
      n_prototypes = kVelocityPrototypes;
      break;
    case TaskKind::palindrome:
      n_prototypes = std::min<std::size_t>(8, spec.frames);
      break;
  }

  std::mt19937_64 proto_rng = make_rng(mix_seed(spec.seed, kTagPrototypes));
  data.prototypes.reserve(n_prototypes);
  for (std::size_t p = 0; p < n_prototypes; ++p) {
    data.prototypes.push_back(Tensor::randn({spec.channels}, proto_rng));
  }

  if (spec.task == TaskKind::order_discrimination) {
    std::mt19937_64 ordering_rng = make_rng(mix_seed(spec.seed, kTagOrdering));
    data.class_orderings = make_orderings(spec.n_classes, spec.frames, ordering_rng);
  }

  auto make_split = [&](std::size_t count, std::uint64_t tag) {
    std::vector<VideoSample> split;
    split.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t label = i % spec.n_classes;
      std::mt19937_64 rng = make_rng(mix_seed(spec.seed, tag, i));
      std::vector<std::size_t> ids;
      switch (spec.task) {
        case TaskKind::order_discrimination:
          ids = data.class_orderings[label];
          break;
        case TaskKind::velocity_class: {
          std::uniform_int_distribution<std::size_t> phase_dist(0, n_prototypes - 1);
          const std::size_t phase = phase_dist(rng);
          const std::size_t velocity = label + 1;
          ids.resize(spec.frames);
          for (std::size_t t = 0; t < spec.frames; ++t) {
            ids[t] = (phase + velocity * t) % n_prototypes;
          }
          break;
        }
        case TaskKind::palindrome:
          ids = palindrome_ids(spec.frames, n_prototypes, label, rng);
          break;
      }
      split.push_back(render_sample(spec, data.prototypes, std::move(ids), label, rng));
    }
    return split;
  };

  data.train = make_split(spec.train_samples, kTagTrain);
  data.val = make_split(spec.val_samples, kTagVal);
  return data;
}

}  // namespace abmkit
