#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "abmkit/model.hpp"
#include "abmkit/tensor.hpp"

namespace abmkit {

struct KeyframeResult {
  std::vector<std::size_t> frames;  // one frame per segment
  double score = 0.0;               // top-1 class probability of the winner
  std::size_t candidate_index = 0;  // which candidate won (first on ties)
};

/// Keyframe selection: draws n_candidates random one-frame-per-segment
/// tuples from a [L x C] video, scores each tuple by the model's top-1
/// class probability, and returns the best one (ties broken by first
/// occurrence). The model must accept [segments x C] inputs, i.e. be a
/// K = 1 model.
KeyframeResult select_keyframes(const Classifier& model, const Tensor& video,
                                std::size_t n_candidates, std::size_t segments,
                                std::mt19937_64& rng);

}  // namespace abmkit
