#include "abmkit/keyframes.hpp"

#include <algorithm>

#include "abmkit/ops.hpp"
#include "abmkit/sampler.hpp"

namespace abmkit {

KeyframeResult select_keyframes(const Classifier& model, const Tensor& video,
                                std::size_t n_candidates, std::size_t segments,
                                std::mt19937_64& rng) {
  if (video.rank() != 2) {
    throw ShapeError("select_keyframes: video must be [L x C], got " +
                     shape_to_string(video.shape()));
  }
  if (n_candidates < 1) throw ShapeError("select_keyframes: need at least one candidate");
  const std::size_t length = video.dim(0);
  if (length < segments) {
    throw ShapeError("select_keyframes: video of " + std::to_string(length) +
                     " frames cannot fill " + std::to_string(segments) + " segments");
  }
  if (model.input_channels() != video.dim(1)) {
    throw ShapeError("select_keyframes: model takes " + std::to_string(model.input_channels()) +
                     " channels per step, video provides " + std::to_string(video.dim(1)) +
                     " (keyframe selection is a K = 1 protocol)");
  }

  const SegmentBounds bounds = segment_bounds(length, segments);
  const SamplerSpec assembly{segments, 1, 1};

  KeyframeResult best;
  bool have_best = false;
  for (std::size_t cand = 0; cand < n_candidates; ++cand) {
    SampledIndices tuple;
    tuple.frames.reserve(segments);
    for (const auto& [begin, end] : bounds) {
      std::uniform_int_distribution<std::size_t> dist(begin, end - 1);
      tuple.frames.push_back(dist(rng));
      tuple.starts.push_back(tuple.frames.back());
    }
    Tensor logits = model.logits(assemble_snippets(video, tuple, assembly));
    const std::vector<double> probs = softmax_rows(reshape(logits, {1, logits.size()}));
    const double score = *std::max_element(probs.begin(), probs.end());
    if (!have_best || score > best.score) {
      best.frames = tuple.frames;
      best.score = score;
      best.candidate_index = cand;
      have_best = true;
    }
  }
  return best;
}

}  // namespace abmkit
