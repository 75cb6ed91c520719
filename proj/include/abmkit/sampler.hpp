#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "abmkit/tensor.hpp"

namespace abmkit {

enum class SampleMode { train_random, test_center };

/// N x K snippet sampling plus shifting inference. Training draws a random
/// snippet start per segment; testing takes the center snippet; shifting
/// averages ST time-shifted test samplings.
struct SamplerSpec {
  std::size_t segments = 8;  // N
  std::size_t snippet = 3;   // K
  std::size_t shifts = 3;    // ST

  void validate() const;
};

struct SampledIndices {
  std::vector<std::size_t> starts;  // one snippet start per segment
  std::vector<std::size_t> frames;  // flat list, segments * snippet long
};

using SegmentBounds = std::vector<std::pair<std::size_t, std::size_t>>;

/// Segment i covers [floor(i*L/N), floor((i+1)*L/N)); the ranges partition
/// [0, L).
SegmentBounds segment_bounds(std::size_t length, std::size_t segments);

/// Snippet per segment: train mode draws the start uniformly from
/// [begin, max(begin, end-K)], test mode centers it. Indices are K
/// consecutive frames clamped to the segment (the segment's final frame
/// repeats when the segment is shorter than K).
SampledIndices sample_snippet(const SegmentBounds& bounds, std::size_t snippet, SampleMode mode,
                              std::mt19937_64& rng);

/// Offsets {floor(i*seg_len/ST)} applied forward from the center start,
/// clamped to the segment (duplicates retained).
std::vector<std::size_t> shifting_offsets(std::size_t segment_length, std::size_t shifts);

/// Center sampling shifted by shifting_offsets(...)[shift]; shift 0 of
/// ST = 1 is exactly the test-center sampling.
SampledIndices sample_center_shifted(const SegmentBounds& bounds, std::size_t snippet,
                                     std::size_t shift, std::size_t shifts);

/// Mean of predict() logits over the ST shifted samplings of a video.
Tensor aggregate_shifted(const std::function<Tensor(const SampledIndices&)>& predict,
                         std::size_t video_length, const SamplerSpec& spec);

/// Gathers sampled frames of a [L x C] video into the [N x K*C] model
/// input (each segment's K frames concatenated along channels).
Tensor assemble_snippets(const Tensor& video, const SampledIndices& indices,
                         const SamplerSpec& spec);

}  // namespace abmkit
