#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/dataset.hpp"
#include "abmkit/model.hpp"
#include "abmkit/sampler.hpp"
#include "abmkit/surgery.hpp"
#include "abmkit/tensor.hpp"

namespace abmkit {

class TrainError : public TensorError {
 public:
  using TensorError::TensorError;
};

/// SGD schedule: fixed momentum 0.9, learning rate decayed by 10 at each
/// decay epoch (defaults: 60% and 80% of the run).
struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch = 32;
  std::size_t epochs = 15;
  std::vector<std::size_t> decay_epochs;  // empty -> defaults

  void validate() const;
  std::vector<std::size_t> effective_decay_epochs() const;
};

struct EvalMetrics {
  double top1 = 0.0;
  double top5 = 0.0;
  double loss = 0.0;
};

struct EpochRow {
  std::size_t epoch = 0;
  std::string split;
  double top1 = 0.0;
  double top5 = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRow> log;
  double best_val_top1 = 0.0;
  std::size_t best_epoch = 0;
  std::vector<std::pair<std::string, Tensor>> best_params;  // cloned snapshot
};

/// Deterministic evaluation over a split: test-center sampling, optionally
/// aggregated over spec.shifts shifted samplings. Parallel over samples.
EvalMetrics evaluate(const Classifier& model, const std::vector<VideoSample>& samples,
                     const SamplerSpec& spec, bool shifted);

/// Trains in place. Snippet starts are drawn per (video id, epoch); batch
/// gradients are computed in a fixed number of sample groups (independent
/// graphs over cloned weights, reduced in group order), so logs are
/// reproducible for a given seed regardless of worker count. NaN loss
/// aborts with a TrainError diagnostic.
TrainResult train_classifier(Classifier& model, const TrainConfig& cfg,
                             const SyntheticDataset& data, const SamplerSpec& sampler,
                             std::uint64_t seed, std::ostream* progress = nullptr);

/// Copies a snapshot produced by train_classifier back into the model
/// (names and shapes must line up).
void load_params(Classifier& model, const std::vector<std::pair<std::string, Tensor>>& params);

/// "epoch,split,top1,top5,loss" rows; top5 is left empty below 10 classes.
std::string metrics_csv(const std::vector<EpochRow>& log, std::size_t n_classes);

/// Pretrains a frame-prototype classifier (the in-repo stand-in for a
/// pretrained backbone): net [C -> hidden -> features] with a temporary
/// linear probe over prototype ids, trained on individual frames of the
/// train split. Returns the net and the probe's final accuracy.
struct PretrainResult {
  TwoLayerNet net;
  double frame_top1 = 0.0;
};
PretrainResult pretrain_frame_net(const SyntheticDataset& data, std::size_t hidden,
                                  std::size_t features, std::size_t epochs, double lr,
                                  std::uint64_t seed);

/// Implanted-placement pipeline: pretrain the two-layer frame net, tile its
/// first layer across the K snippet frames, convert it into a temporal ABM
/// via the auxiliary branch, and wrap it with a fresh head. The returned
/// report certifies the converted layer still computes what the widened
/// net computed.
struct ImplantResult {
  std::unique_ptr<AbmClassifier> model;
  TwoLayerNet widened_net;  // snippet-widened source, the identity reference
  SurgeryReport report;
  double pretrain_top1 = 0.0;
};
ImplantResult build_implanted_classifier(const SyntheticDataset& data, const SamplerSpec& sampler,
                                         const VariantSpec& variant,
                                         std::optional<std::size_t> pool_after,
                                         std::size_t hidden, std::size_t features,
                                         std::size_t pretrain_epochs, double pretrain_lr,
                                         std::uint64_t seed);

}  // namespace abmkit
