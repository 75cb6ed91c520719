#include "abmkit/baselines.hpp"

#include <cstdio>
#include <sstream>

#include "abmkit/model.hpp"
#include "abmkit/rng.hpp"

namespace abmkit {

BaselineReport run_baselines(const SyntheticDataset& data, const SamplerSpec& sampler,
                             const TrainConfig& budget, std::uint64_t seed,
                             std::size_t mlp_hidden, std::ostream* progress) {
  sampler.validate();
  budget.validate();
  const std::size_t channels = sampler.snippet * data.spec.channels;
  const std::size_t classes = data.spec.n_classes;

  BaselineReport report;
  report.sampler = sampler;
  report.budget = budget;

  {
    std::mt19937_64 rng = make_rng(mix_seed(seed, 0xb001));
    MeanPoolClassifier model =
        MeanPoolClassifier::randn_init(data.spec.channels, sampler.snippet, classes, rng);
    if (progress) (*progress) << "baseline: mean-pool" << std::endl;
    TrainResult trained = train_classifier(model, budget, data, sampler, seed, progress);
    load_params(model, trained.best_params);
    const EvalMetrics metrics = evaluate(model, data.val, sampler, sampler.shifts > 1);
    report.rows.push_back({"mean-pool", metrics.top1, metrics.top5, model.parameter_count(),
                           count_flops(model, sampler.segments).total()});
  }
  {
    std::mt19937_64 rng = make_rng(mix_seed(seed, 0xb002));
    ConcatMlpClassifier model =
        ConcatMlpClassifier::randn_init(sampler.segments, channels, mlp_hidden, classes, rng);
    if (progress) (*progress) << "baseline: concat-mlp" << std::endl;
    TrainResult trained = train_classifier(model, budget, data, sampler, seed, progress);
    load_params(model, trained.best_params);
    const EvalMetrics metrics = evaluate(model, data.val, sampler, sampler.shifts > 1);
    report.rows.push_back({"concat-mlp", metrics.top1, metrics.top5, model.parameter_count(),
                           count_flops(model, sampler.segments).total()});
  }
  return report;
}

std::string metric_table_text(const std::vector<MetricRow>& rows, std::size_t n_classes) {
  std::ostringstream out;
  char buf[160];
  const bool with_top5 = n_classes >= 10;
  std::snprintf(buf, sizeof(buf), "%-24s %8s %8s %10s %12s\n", "model", "top1",
                with_top5 ? "top5" : "", "params", "flops");
  out << buf;
  for (const MetricRow& row : rows) {
    char top5[16] = "";
    if (with_top5) std::snprintf(top5, sizeof(top5), "%8.4f", row.top5);
    std::snprintf(buf, sizeof(buf), "%-24s %8.4f %8s %10zu %12llu\n", row.model.c_str(), row.top1,
                  top5, row.params, static_cast<unsigned long long>(row.flops));
    out << buf;
  }
  return out.str();
}

}  // namespace abmkit
