#include "abmkit/sampler.hpp"

#include <algorithm>

namespace abmkit {

namespace {

// K consecutive indices from `start`, never leaving the segment: the
// segment's final frame repeats when it is shorter than K. An empty
// segment (possible only when N > L) replicates its left bound.
void append_snippet(std::vector<std::size_t>& out, std::size_t begin, std::size_t end,
                    std::size_t start, std::size_t snippet, std::size_t length) {
  const std::size_t last = end > begin ? end - 1 : std::min(begin, length - 1);
  for (std::size_t j = 0; j < snippet; ++j) {
    out.push_back(std::min(start + j, last));
  }
}

std::size_t max_start(std::size_t begin, std::size_t end, std::size_t snippet) {
  const std::size_t len = end - begin;
  return len > snippet ? end - snippet : begin;
}

}  // namespace

void SamplerSpec::validate() const {
  if (segments < 1 || snippet < 1 || shifts < 1) {
    throw ShapeError("sampler requires N, K, ST >= 1");
  }
}

SegmentBounds segment_bounds(std::size_t length, std::size_t segments) {
  if (length < 1) throw ShapeError("segment_bounds: video length must be >= 1");
  if (segments < 1) throw ShapeError("segment_bounds: segment count must be >= 1");
  SegmentBounds bounds(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    bounds[i].first = i * length / segments;
    bounds[i].second = (i + 1) * length / segments;
  }
  return bounds;
}

SampledIndices sample_snippet(const SegmentBounds& bounds, std::size_t snippet, SampleMode mode,
                              std::mt19937_64& rng) {
  if (snippet < 1) throw ShapeError("sample_snippet: snippet length must be >= 1");
  SampledIndices out;
  out.starts.reserve(bounds.size());
  out.frames.reserve(bounds.size() * snippet);
  const std::size_t length = bounds.empty() ? 1 : std::max<std::size_t>(1, bounds.back().second);
  for (const auto& [begin, end] : bounds) {
    const std::size_t hi = max_start(begin, end, snippet);
    std::size_t start;
    if (mode == SampleMode::train_random) {
      std::uniform_int_distribution<std::size_t> dist(begin, hi);
      start = dist(rng);
    } else {
      start = begin + (hi - begin) / 2;
    }
    out.starts.push_back(start);
    append_snippet(out.frames, begin, end, start, snippet, length);
  }
  return out;
}

std::vector<std::size_t> shifting_offsets(std::size_t segment_length, std::size_t shifts) {
  if (shifts < 1) throw ShapeError("shifting_offsets: ST must be >= 1");
  std::vector<std::size_t> offsets(shifts);
  for (std::size_t i = 0; i < shifts; ++i) offsets[i] = i * segment_length / shifts;
  return offsets;
}

SampledIndices sample_center_shifted(const SegmentBounds& bounds, std::size_t snippet,
                                     std::size_t shift, std::size_t shifts) {
  if (shift >= shifts) throw ShapeError("sample_center_shifted: shift index out of range");
  SampledIndices out;
  out.starts.reserve(bounds.size());
  out.frames.reserve(bounds.size() * snippet);
  const std::size_t length = bounds.empty() ? 1 : std::max<std::size_t>(1, bounds.back().second);
  for (const auto& [begin, end] : bounds) {
    const std::size_t hi = max_start(begin, end, snippet);
    const std::size_t center = begin + (hi - begin) / 2;
    const std::size_t offset = shift * (end - begin) / shifts;
    const std::size_t start = std::min(center + offset, hi);
    out.starts.push_back(start);
    append_snippet(out.frames, begin, end, start, snippet, length);
  }
  return out;
}

Tensor aggregate_shifted(const std::function<Tensor(const SampledIndices&)>& predict,
                         std::size_t video_length, const SamplerSpec& spec) {
  spec.validate();
  const SegmentBounds bounds = segment_bounds(video_length, spec.segments);
  std::vector<double> sum;
  Shape out_shape;
  for (std::size_t s = 0; s < spec.shifts; ++s) {
    Tensor logits = predict(sample_center_shifted(bounds, spec.snippet, s, spec.shifts));
    if (s == 0) {
      out_shape = logits.shape();
      sum.assign(logits.size(), 0.0);
    } else if (!same_shape(out_shape, logits.shape())) {
      throw ShapeError("aggregate_shifted: prediction shapes disagree");
    }
    const auto ld = logits.data();
    for (std::size_t i = 0; i < ld.size(); ++i) sum[i] += ld[i];
  }
  const double inv = 1.0 / static_cast<double>(spec.shifts);
  for (double& v : sum) v *= inv;
  return Tensor::from_vector(std::move(out_shape), std::move(sum));
}

Tensor assemble_snippets(const Tensor& video, const SampledIndices& indices,
                         const SamplerSpec& spec) {
  if (video.rank() != 2) {
    throw ShapeError("assemble_snippets: video must be [L x C], got " +
                     shape_to_string(video.shape()));
  }
  spec.validate();
  if (indices.frames.size() != spec.segments * spec.snippet) {
    throw ShapeError("assemble_snippets: expected " +
                     std::to_string(spec.segments * spec.snippet) + " frame indices, got " +
                     std::to_string(indices.frames.size()));
  }
  const std::size_t channels = video.dim(1);
  const auto vd = video.data();
  std::vector<double> out(spec.segments * spec.snippet * channels);
  for (std::size_t seg = 0; seg < spec.segments; ++seg) {
    for (std::size_t j = 0; j < spec.snippet; ++j) {
      const std::size_t frame = indices.frames[seg * spec.snippet + j];
      if (frame >= video.dim(0)) {
        throw ShapeError("assemble_snippets: frame index " + std::to_string(frame) +
                         " out of range for video " + shape_to_string(video.shape()));
      }
      std::copy_n(vd.begin() + frame * channels, channels,
                  out.begin() + (seg * spec.snippet + j) * channels);
    }
  }
  return Tensor::from_vector({spec.segments, spec.snippet * channels}, std::move(out));
}

}  // namespace abmkit
