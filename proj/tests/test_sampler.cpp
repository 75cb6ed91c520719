#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "abmkit/rng.hpp"
#include "abmkit/sampler.hpp"

using namespace abmkit;

TEST_CASE("segment bounds examples") {
  SegmentBounds even = segment_bounds(24, 8);
  REQUIRE(even.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(even[i].first == 3 * i);
    CHECK(even[i].second == 3 * (i + 1));
  }

  SegmentBounds singles = segment_bounds(8, 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(singles[i].second - singles[i].first == 1);

  SegmentBounds uneven = segment_bounds(10, 4);
  std::vector<std::size_t> lengths;
  for (auto [b, e] : uneven) lengths.push_back(e - b);
  CHECK(lengths == std::vector<std::size_t>{2, 3, 2, 3});

  CHECK_THROWS_AS(segment_bounds(0, 4), ShapeError);
}

TEST_CASE("segment bounds partition [0, L) exhaustively") {
  for (std::size_t length = 1; length <= 300; ++length) {
    for (std::size_t segments = 1; segments <= length; ++segments) {
      const SegmentBounds bounds = segment_bounds(length, segments);
      REQUIRE(bounds.size() == segments);
      CHECK(bounds.front().first == 0);
      CHECK(bounds.back().second == length);
      for (std::size_t i = 0; i < segments; ++i) {
        CHECK(bounds[i].first < bounds[i].second);  // non-empty when L >= N
        if (i) CHECK(bounds[i].first == bounds[i - 1].second);
      }
    }
  }
}

TEST_CASE("center snippet examples") {
  std::mt19937_64 rng = make_rng(1);
  SampledIndices exact = sample_snippet({{0, 3}}, 3, SampleMode::test_center, rng);
  CHECK(exact.starts == std::vector<std::size_t>{0});
  CHECK(exact.frames == std::vector<std::size_t>{0, 1, 2});

  SampledIndices degenerate = sample_snippet({{0, 1}}, 3, SampleMode::test_center, rng);
  CHECK(degenerate.frames == std::vector<std::size_t>{0, 0, 0});

  // centered inside a long segment
  SampledIndices centered = sample_snippet({{0, 7}}, 3, SampleMode::test_center, rng);
  CHECK(centered.starts == std::vector<std::size_t>{2});
  CHECK(centered.frames == std::vector<std::size_t>{2, 3, 4});
}

TEST_CASE("train sampling covers all legal starts uniformly") {
  const SegmentBounds bounds{{0, 6}};
  std::mt19937_64 rng = make_rng(2);
  std::map<std::size_t, std::size_t> counts;
  const std::size_t draws = 10000;
  for (std::size_t i = 0; i < draws; ++i) {
    SampledIndices s = sample_snippet(bounds, 3, SampleMode::train_random, rng);
    REQUIRE(s.starts[0] <= 3);
    counts[s.starts[0]]++;
  }
  REQUIRE(counts.size() == 4);
  // binomial 3 sigma band around draws/4
  const double mean = draws / 4.0;
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (const auto& [start, count] : counts) {
    CHECK(std::abs(double(count) - mean) < 3.0 * sigma);
  }
}

TEST_CASE("shifting offsets") {
  CHECK(shifting_offsets(6, 3) == std::vector<std::size_t>{0, 2, 4});
  CHECK(shifting_offsets(5, 1) == std::vector<std::size_t>{0});
  CHECK(shifting_offsets(2, 3) == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("shifted center sampling is deterministic and clamped") {
  const SegmentBounds bounds = segment_bounds(48, 8);  // segments of 6
  for (std::size_t shift = 0; shift < 3; ++shift) {
    SampledIndices a = sample_center_shifted(bounds, 3, shift, 3);
    SampledIndices b = sample_center_shifted(bounds, 3, shift, 3);
    CHECK(a.frames == b.frames);  // pure function of (L, N, K, ST)
  }
  // shift 0 of ST=1 is the plain center protocol
  std::mt19937_64 rng = make_rng(3);
  SampledIndices center = sample_snippet(bounds, 3, SampleMode::test_center, rng);
  SampledIndices unshifted = sample_center_shifted(bounds, 3, 0, 1);
  CHECK(center.frames == unshifted.frames);

  // offsets stay inside the segment
  SampledIndices last = sample_center_shifted(bounds, 3, 2, 3);
  for (std::size_t seg = 0; seg < 8; ++seg) {
    for (std::size_t j = 0; j < 3; ++j) {
      const std::size_t frame = last.frames[seg * 3 + j];
      CHECK(frame >= bounds[seg].first);
      CHECK(frame < bounds[seg].second);
    }
  }
}

TEST_CASE("K = 1 reduces to single-frame segment sampling") {
  const SegmentBounds bounds = segment_bounds(24, 8);
  SampledIndices s = sample_center_shifted(bounds, 1, 0, 1);
  REQUIRE(s.frames.size() == 8);
  for (std::size_t seg = 0; seg < 8; ++seg) {
    CHECK(s.frames[seg] == bounds[seg].first + (bounds[seg].second - 1 - bounds[seg].first) / 2);
  }
}

TEST_CASE("aggregate_shifted") {
  SamplerSpec spec{4, 2, 3};

  SUBCASE("constant videos are shift invariant") {
    auto predict = [](const SampledIndices&) { return Tensor::from_vector({2}, {1.5, -2.0}); };
    Tensor out = aggregate_shifted(predict, 20, spec);
    CHECK(out.data()[0] == 1.5);
    CHECK(out.data()[1] == -2.0);
  }

  SUBCASE("ST = 1 is bit-identical to the center prediction") {
    SamplerSpec one{4, 2, 1};
    auto predict = [](const SampledIndices& idx) {
      double acc = 0.0;
      for (std::size_t f : idx.frames) acc += double(f) * 0.37;
      return Tensor::from_vector({1}, {acc});
    };
    const SegmentBounds bounds = segment_bounds(21, 4);
    Tensor direct = predict(sample_center_shifted(bounds, 2, 0, 1));
    Tensor aggregated = aggregate_shifted(predict, 21, one);
    CHECK(aggregated.item() == direct.item());
  }

  SUBCASE("ST = 3 equals the hand-computed mean") {
    auto predict = [](const SampledIndices& idx) {
      double acc = 0.0;
      for (std::size_t f : idx.frames) acc += double(f * f) * 0.01 + 0.3;
      return Tensor::from_vector({1}, {acc});
    };
    const std::size_t length = 26;
    const SegmentBounds bounds = segment_bounds(length, spec.segments);
    double expect = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      expect += predict(sample_center_shifted(bounds, spec.snippet, s, 3)).item();
    }
    expect /= 3.0;
    CHECK(aggregate_shifted(predict, length, spec).item() == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("assemble_snippets gathers frames channel-wise") {
  std::vector<double> video_data;
  for (std::size_t t = 0; t < 6; ++t) {
    video_data.push_back(double(t));
    video_data.push_back(double(t) + 0.5);
  }
  Tensor video = Tensor::from_vector({6, 2}, video_data);
  SamplerSpec spec{2, 2, 1};
  SampledIndices idx;
  idx.frames = {0, 1, 4, 5};
  Tensor input = assemble_snippets(video, idx, spec);
  REQUIRE(input.shape() == Shape{2, 4});
  CHECK(input.at({0, 0}) == 0.0);
  CHECK(input.at({0, 2}) == 1.0);
  CHECK(input.at({1, 0}) == 4.0);
  CHECK(input.at({1, 3}) == 5.5);

  idx.frames = {0, 1, 4, 9};
  CHECK_THROWS_AS(assemble_snippets(video, idx, spec), ShapeError);
}

TEST_CASE("sampler spec validation") {
  CHECK_THROWS_AS((SamplerSpec{0, 3, 3}).validate(), ShapeError);
  CHECK_THROWS_AS((SamplerSpec{8, 0, 3}).validate(), ShapeError);
  CHECK_THROWS_AS((SamplerSpec{8, 3, 0}).validate(), ShapeError);
}
