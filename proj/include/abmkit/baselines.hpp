#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abmkit/dataset.hpp"
#include "abmkit/sampler.hpp"
#include "abmkit/train.hpp"

namespace abmkit {

/// One row of the comparison table (baselines and ABM runs alike).
struct MetricRow {
  std::string model;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t params = 0;
  std::uint64_t flops = 0;  // multiply-adds per video
};

struct BaselineReport {
  std::vector<MetricRow> rows;
  SamplerSpec sampler;  // the one budget every row trained under
  TrainConfig budget;
};

/// Trains the mean-pool linear classifier and the concat-all-frames MLP
/// under exactly the given sampler and budget and evaluates both on the
/// val split (shifted when sampler.shifts > 1).
BaselineReport run_baselines(const SyntheticDataset& data, const SamplerSpec& sampler,
                             const TrainConfig& budget, std::uint64_t seed,
                             std::size_t mlp_hidden = 128, std::ostream* progress = nullptr);

/// Aligned-text rendering of a comparison table.
std::string metric_table_text(const std::vector<MetricRow>& rows, std::size_t n_classes);

}  // namespace abmkit
