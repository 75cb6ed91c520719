#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

enum class TaskKind { order_discrimination, velocity_class, palindrome };

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

/// Synthetic temporal-classification tasks. Labels depend only on the
/// temporal arrangement of prototype frames: within each task the multiset
/// of prototypes is class-independent, so per-frame content statistics
/// (and any pooled mean) carry no label information.
struct SyntheticTaskSpec {
  TaskKind task = TaskKind::order_discrimination;
  std::size_t n_classes = 20;
  std::size_t frames = 24;     // L
  std::size_t channels = 16;   // C_raw
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
  std::size_t train_samples = 10000;
  std::size_t val_samples = 2000;

  void validate() const;
};

struct VideoSample {
  Tensor frames;  // [L x C]
  std::size_t label = 0;
  std::vector<std::size_t> prototype_ids;  // per frame
};

struct SyntheticDataset {
  SyntheticTaskSpec spec;
  std::vector<Tensor> prototypes;  // P vectors of [C]
  /// order-discrimination only: class -> prototype arrangement. Classes
  /// come in mutually reversed pairs (class 2k+1 reverses class 2k), so
  /// reversing a sequence moves it into its partner class.
  std::vector<std::vector<std::size_t>> class_orderings;
  std::vector<VideoSample> train;
  std::vector<VideoSample> val;

  std::size_t n_prototypes() const { return prototypes.size(); }
};

/// Deterministic in spec.seed.
SyntheticDataset generate_dataset(const SyntheticTaskSpec& spec);

}  // namespace abmkit
