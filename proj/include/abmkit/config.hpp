#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "abmkit/abm.hpp"
#include "abmkit/dataset.hpp"
#include "abmkit/sampler.hpp"
#include "abmkit/train.hpp"

namespace abmkit {

class ConfigError : public TensorError {
 public:
  using TensorError::TensorError;
};

/// Backbone stand-in pretraining (implanted placement only).
struct PretrainSpec {
  std::size_t hidden = 48;
  std::size_t features = 32;
  std::size_t epochs = 2;
  double lr = 0.2;
};

/// One experiment: model, sampler, task, schedule, seed, output directory.
/// Parsing is strict: unknown keys are rejected, and the JSON round-trips
/// losslessly through to_json/from_json.
struct RunConfig {
  VariantSpec variant;
  Placement placement = Placement::top;
  std::size_t layers = 1;
  std::size_t width = 32;  // out_dim of every stack layer
  std::size_t rank = 0;    // 0 -> rank = width
  std::optional<std::size_t> pool_after;
  SamplerSpec sampler;
  SyntheticTaskSpec task;
  TrainConfig train;
  PretrainSpec pretrain;
  bool baselines = false;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void validate() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);

  /// FNV-1a over the canonical serialized form.
  std::uint64_t hash() const;
};

/// A model with the shapes the config describes, randomly initialized:
/// train fills it by optimization, eval fills it from a checkpoint. For
/// implanted placement this reproduces the converted layer's shapes
/// (width from the variant over K*C_raw, hidden rank, feature output).
std::unique_ptr<Classifier> build_model_shell(const RunConfig& cfg);

// Component (de)serializers used by RunConfig and the CLI reports.
nlohmann::json variant_to_json(const VariantSpec& spec);
VariantSpec variant_from_json(const nlohmann::json& j);
/// Stack structure (layer variants, dimensions, placement, pooling); the
/// weights themselves travel through the tensor checkpoint format.
nlohmann::json stack_to_json(const AbmStack& stack);
nlohmann::json sampler_to_json(const SamplerSpec& spec);
SamplerSpec sampler_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const SyntheticTaskSpec& spec);
SyntheticTaskSpec task_from_json(const nlohmann::json& j);
nlohmann::json train_to_json(const TrainConfig& cfg);
TrainConfig train_from_json(const nlohmann::json& j);

std::uint64_t fnv1a_64(const std::string& text);

}  // namespace abmkit
