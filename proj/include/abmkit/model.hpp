#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "abmkit/abm.hpp"
#include "abmkit/flops.hpp"
#include "abmkit/tensor.hpp"

namespace abmkit {

/// A sequence classifier: [T x C_in] model input -> [classes] logits.
/// parameters() order is stable and shared with clone(), so gradients
/// collected from a clone align index-for-index with the original.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual Tensor logits(const Tensor& input) const = 0;
  virtual std::vector<std::pair<std::string, Tensor>> parameters() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  virtual std::size_t input_channels() const = 0;
  virtual std::size_t n_classes() const = 0;
  /// Set when the model only accepts one sequence length (concat MLP).
  virtual std::optional<std::size_t> fixed_time_steps() const { return std::nullopt; }

  /// Analytic multiply-add count of logits() on a [T x C_in] input,
  /// layer by layer. Matches the instrumented count exactly.
  virtual flops::FlopsReport analytic_flops(std::size_t time_steps) const = 0;

  std::size_t parameter_count() const;
};

/// ABM stack plus a per-frame linear head averaged over time.
class AbmClassifier : public Classifier {
 public:
  AbmClassifier(AbmStack stack, Tensor head_w, Tensor head_b);

  Tensor logits(const Tensor& input) const override;
  std::vector<std::pair<std::string, Tensor>> parameters() const override;
  std::unique_ptr<Classifier> clone() const override;
  std::size_t input_channels() const override;
  std::size_t n_classes() const override;
  flops::FlopsReport analytic_flops(std::size_t time_steps) const override;

  const AbmStack& stack() const { return stack_; }
  AbmStack& stack() { return stack_; }

 private:
  AbmStack stack_;
  Tensor head_w_;  // [classes x D]
  Tensor head_b_;  // [classes]
};

/// Mean over frames followed by a linear map; by construction blind to
/// frame order. Snippet-assembled inputs [N x K*C] are viewed as their
/// N*K individual frames before pooling, so the pooled vector is the plain
/// average of per-frame features.
class MeanPoolClassifier : public Classifier {
 public:
  MeanPoolClassifier(Tensor w, Tensor b, std::size_t snippet);
  static MeanPoolClassifier randn_init(std::size_t frame_channels, std::size_t snippet,
                                       std::size_t classes, std::mt19937_64& rng);

  Tensor logits(const Tensor& input) const override;
  std::vector<std::pair<std::string, Tensor>> parameters() const override;
  std::unique_ptr<Classifier> clone() const override;
  std::size_t input_channels() const override;
  std::size_t n_classes() const override;
  flops::FlopsReport analytic_flops(std::size_t time_steps) const override;

 private:
  Tensor w_;  // [classes x frame_channels]
  Tensor b_;
  std::size_t snippet_;
};

/// Flattens the whole sequence into one vector and applies a two-layer MLP;
/// position-sensitive, so it can memorize order.
class ConcatMlpClassifier : public Classifier {
 public:
  ConcatMlpClassifier(std::size_t time_steps, std::size_t channels, Tensor w1, Tensor b1,
                      Tensor w2, Tensor b2);
  static ConcatMlpClassifier randn_init(std::size_t time_steps, std::size_t channels,
                                        std::size_t hidden, std::size_t classes,
                                        std::mt19937_64& rng);

  Tensor logits(const Tensor& input) const override;
  std::vector<std::pair<std::string, Tensor>> parameters() const override;
  std::unique_ptr<Classifier> clone() const override;
  std::size_t input_channels() const override;
  std::size_t n_classes() const override;
  std::optional<std::size_t> fixed_time_steps() const override { return time_steps_; }
  flops::FlopsReport analytic_flops(std::size_t time_steps) const override;

 private:
  std::size_t time_steps_;
  std::size_t channels_;
  Tensor w1_, b1_, w2_, b2_;
};

/// Randomly initialized top-placement stack: `layers` ABM layers of the
/// given variant, all with out_dim = width and rank R (0 means R = width),
/// followed by a linear head.
AbmClassifier build_top_classifier(const VariantSpec& variant, std::size_t layers,
                                   std::size_t width, std::size_t rank,
                                   std::size_t input_channels, std::size_t classes,
                                   std::mt19937_64& rng);

/// Instrumented forward pass; returns the multiply counts of one logits()
/// call (no loss, no backward).
flops::MultiplyCounts instrumented_forward(const Classifier& model, const Tensor& input);

/// Analytic per-layer report checked against an instrumented forward on a
/// standard-normal input; throws TensorError on any disagreement.
flops::FlopsReport count_flops(const Classifier& model, std::size_t time_steps,
                               std::uint64_t probe_seed = 7);

}  // namespace abmkit
