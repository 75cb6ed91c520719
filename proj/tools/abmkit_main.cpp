#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abmkit/baselines.hpp"
#include "abmkit/checkpoint.hpp"
#include "abmkit/config.hpp"
#include "abmkit/dataset.hpp"
#include "abmkit/gradcheck_suite.hpp"
#include "abmkit/keyframes.hpp"
#include "abmkit/model.hpp"
#include "abmkit/rng.hpp"
#include "abmkit/sampler.hpp"
#include "abmkit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace abmkit;

namespace {

// --set path.to.key=value; the value is parsed as JSON when possible,
// otherwise taken as a string
void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--set expects key=value, got \"" + assignment + "\"");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &config;
  std::size_t begin = 0;
  for (;;) {
    const auto dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw ConfigError("bad --set path \"" + path + "\"");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

json load_config_json(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  in >> j;
  for (const std::string& assignment : overrides) apply_override(j, assignment);
  return j;
}

struct ArtifactWriter {
  fs::path dir;
  std::vector<std::string> artifacts;

  explicit ArtifactWriter(const std::string& out_dir) : dir(out_dir) {
    fs::create_directories(dir);
  }
  void write_text(const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << text;
    artifacts.push_back(name);
  }
  void note(const std::string& name) { artifacts.push_back(name); }
  void finish(std::uint64_t config_hash) {
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash));
    json manifest{{"config_hash", hex}, {"artifacts", artifacts}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
  }
};

json report_to_json(const SurgeryReport& report) {
  json table = json::array();
  for (const SliceRecord& rec : report.frozen_symbol_table) {
    table.push_back({{"param", rec.param},
                     {"rows", {rec.row_begin, rec.row_end}},
                     {"source", rec.source},
                     {"pretrained", rec.pretrained}});
  }
  return json{{"max_abs_deviation", report.max_abs_deviation},
              {"n_probes", report.n_probes},
              {"passed", report.passed},
              {"frozen_symbol_table", table}};
}

json flops_to_json(const flops::FlopsReport& report) {
  json layers = json::array();
  for (const auto& entry : report.per_layer) {
    layers.push_back({{"layer", entry.layer}, {"multiply_adds", entry.multiply_adds}});
  }
  return json{{"per_layer", layers},
              {"total_multiply_adds", report.total()},
              {"parameters", report.parameter_count}};
}

json rows_to_json(const std::vector<MetricRow>& rows, std::size_t n_classes) {
  json out = json::array();
  for (const MetricRow& row : rows) {
    json r{{"model", row.model}, {"top1", row.top1}, {"params", row.params}, {"flops", row.flops}};
    if (n_classes >= 10) r["top5"] = row.top5;
    out.push_back(r);
  }
  return out;
}

int cmd_gradcheck(std::size_t seeds, double eps, std::vector<std::string> checks,
                  bool checks_given, bool negative_control, const std::string& out_dir) {
  if (!checks_given) checks = gradcheck_suite_names();
  std::erase(checks, std::string{});
  if (checks.empty()) {
    std::cerr << "gradcheck: nothing to check\n";
    return 2;
  }
  json cases = json::array();
  bool all_passed = true;
  double suite_max = 0.0;
  for (const std::string& name : checks) {
    GradCheckCase result = run_gradcheck_case(name, seeds, eps, negative_control);
    all_passed = all_passed && result.passed;
    suite_max = std::max(suite_max, result.max_error);
    cases.push_back({{"name", result.name},
                     {"seeds", result.seeds},
                     {"tolerance", result.tolerance},
                     {"max_relative_error", result.max_error},
                     {"passed", result.passed}});
  }
  json report{{"eps", eps},
              {"negative_control", negative_control},
              {"max_relative_error", suite_max},
              {"passed", all_passed},
              {"cases", cases}};
  std::cout << report.dump(2) << std::endl;
  if (!out_dir.empty()) {
    ArtifactWriter writer(out_dir);
    writer.write_text("gradcheck.json", report.dump(2) + "\n");
    writer.finish(fnv1a_64(report.dump()));
  }
  return all_passed ? 0 : 1;
}

int cmd_surgery_verify(const std::string& checkpoint, char variant_kind, double beta,
                       std::size_t probes, std::size_t probe_frames) {
  auto tensors = load_checkpoint(checkpoint);
  auto need = [&](const std::string& name) -> Tensor {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint is missing tensor " + name);
    return it->second;
  };
  TwoLayerNet net;
  net.w1 = need("net.w1");
  net.b1 = need("net.b1");
  net.w2 = need("net.w2");
  net.b2 = need("net.b2");
  net.validate();

  VariantSpec target{variant_kind_from_char(variant_kind), 3, beta};
  target.validate();
  const std::size_t channels = net.in_dim();

  SurgeryResult wide = expand_temporal(build_auxiliary_branch(net), target, channels);
  std::vector<SliceRecord> table = std::move(wide.symbol_table);
  AbmParams module;
  if (tensors.count("module.a")) {
    // verify the module as stored (a corrupted checkpoint must fail)
    module.a = need("module.a");
    module.b = need("module.b");
    module.u = need("module.u");
    module.bias_a = need("module.bias_a");
    module.bias_b = need("module.bias_b");
    module.bias_out = need("module.bias_out");
    module.activation = Activation::relu;
    module.validate();
  } else {
    module = std::move(wide.params);
  }

  SurgeryReport report = verify_identity(
      [&](const Tensor& seq) { return net.forward_rows(seq); },
      [&](const Tensor& seq) {
        return target.kind == VariantKind::C ? abm_c_forward(module, seq)
                                             : abm_a_forward(module, seq, beta);
      },
      probes, {probe_frames, channels}, 0x5e7);
  report.frozen_symbol_table = std::move(table);

  std::cout << report_to_json(report).dump(2) << std::endl;
  return report.passed ? 0 : 1;
}

std::vector<std::pair<std::string, Tensor>> net_tensors(const TwoLayerNet& net,
                                                        const AbmParams& module) {
  std::vector<std::pair<std::string, Tensor>> out = net.named_tensors("net");
  auto named = module.named_tensors("module");
  out.insert(out.end(), named.begin(), named.end());
  return out;
}

int cmd_train(const RunConfig& cfg) {
  ArtifactWriter writer(cfg.out_dir);
  writer.write_text("config.json", cfg.to_json().dump(2) + "\n");

  std::cout << "generating dataset (" << task_kind_name(cfg.task.task) << ")..." << std::endl;
  SyntheticDataset data = generate_dataset(cfg.task);

  std::unique_ptr<Classifier> model;
  if (cfg.placement == Placement::top) {
    model = build_model_shell(cfg);
  } else {
    std::cout << "pretraining frame net..." << std::endl;
    ImplantResult implant = build_implanted_classifier(
        data, cfg.sampler, cfg.variant, cfg.pool_after, cfg.pretrain.hidden,
        cfg.pretrain.features, cfg.pretrain.epochs, cfg.pretrain.lr, cfg.seed);
    std::cout << "frame-prototype top1 " << implant.pretrain_top1 << ", surgery deviation "
              << implant.report.max_abs_deviation << std::endl;
    writer.write_text("surgery_report.json", report_to_json(implant.report).dump(2) + "\n");
    save_checkpoint((writer.dir / "surgery").string(),
                    net_tensors(implant.widened_net, implant.model->stack().layers[0].params));
    writer.note("surgery/manifest.json");
    if (!implant.report.passed) {
      std::cerr << "surgery identity check failed\n";
      return 1;
    }
    model = std::move(implant.model);
  }

  std::cout << "training (" << model->parameter_count() << " parameters)..." << std::endl;
  TrainResult result = train_classifier(*model, cfg.train, data, cfg.sampler, cfg.seed, &std::cout);

  writer.write_text("metrics.csv", metrics_csv(result.log, cfg.task.n_classes));
  save_checkpoint((writer.dir / "checkpoint_best").string(), result.best_params);
  writer.note("checkpoint_best/manifest.json");
  if (const auto* abm = dynamic_cast<const AbmClassifier*>(model.get())) {
    writer.write_text("model.json", stack_to_json(abm->stack()).dump(2) + "\n");
  }

  json report{{"best_val_top1", result.best_val_top1},
              {"best_epoch", result.best_epoch},
              {"parameters", model->parameter_count()},
              {"flops", flops_to_json(count_flops(*model, cfg.sampler.segments))}};

  if (cfg.baselines) {
    std::cout << "training baselines under the same budget..." << std::endl;
    BaselineReport baselines =
        run_baselines(data, cfg.sampler, cfg.train, cfg.seed, 128, &std::cout);
    std::vector<MetricRow> rows = baselines.rows;
    load_params(*model, result.best_params);
    const EvalMetrics abm_metrics =
        evaluate(*model, data.val, cfg.sampler, cfg.sampler.shifts > 1);
    MetricRow abm_row{"abm-" + std::string(1, variant_kind_char(cfg.variant.kind)) +
                          (cfg.placement == Placement::top ? "-top" : "-in") + " L=" +
                          std::to_string(cfg.layers),
                      abm_metrics.top1, abm_metrics.top5, model->parameter_count(),
                      count_flops(*model, cfg.sampler.segments).total()};
    rows.push_back(abm_row);
    writer.write_text("comparison.json", rows_to_json(rows, cfg.task.n_classes).dump(2) + "\n");
    writer.write_text("comparison.txt", metric_table_text(rows, cfg.task.n_classes));
    report["comparison"] = rows_to_json(rows, cfg.task.n_classes);
  }

  writer.write_text("report.json", report.dump(2) + "\n");
  writer.finish(cfg.hash());
  std::cout << "best val top1 " << result.best_val_top1 << " (epoch " << result.best_epoch << ")"
            << std::endl;
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::string checkpoint, bool no_shift,
             const std::string& out_dir) {
  if (checkpoint.empty()) {
    checkpoint = (fs::path(cfg.out_dir) / "checkpoint_best" / "manifest.json").string();
  }
  SyntheticDataset data = generate_dataset(cfg.task);
  std::unique_ptr<Classifier> model = build_model_shell(cfg);
  auto tensors = load_checkpoint(checkpoint);
  std::vector<std::pair<std::string, Tensor>> params(tensors.begin(), tensors.end());
  load_params(*model, params);

  const bool shifted = !no_shift && cfg.sampler.shifts > 1;
  const EvalMetrics metrics = evaluate(*model, data.val, cfg.sampler, shifted);
  json report{{"top1", metrics.top1}, {"loss", metrics.loss}, {"shifted", shifted},
              {"shifts", shifted ? cfg.sampler.shifts : std::size_t(1)}};
  if (cfg.task.n_classes >= 10) report["top5"] = metrics.top5;
  std::cout << report.dump(2) << std::endl;
  if (!out_dir.empty()) {
    ArtifactWriter writer(out_dir);
    writer.write_text("eval.json", report.dump(2) + "\n");
    writer.finish(cfg.hash());
  }
  return 0;
}

int cmd_bench(const RunConfig& cfg, bool sweep_beta, const std::string& out_dir) {
  json report;
  std::vector<MetricRow> rows;

  auto bench_one = [&](const RunConfig& one, const std::string& label) {
    std::unique_ptr<Classifier> model = build_model_shell(one);
    flops::FlopsReport fl = count_flops(*model, one.sampler.segments);
    rows.push_back({label, 0.0, 0.0, fl.parameter_count, fl.total()});
    return flops_to_json(fl);
  };

  if (sweep_beta || cfg.variant.kind == VariantKind::A) {
    json sweep = json::array();
    std::vector<double> betas{0.25, 0.5, 1.0};
    std::vector<std::uint64_t> totals;
    for (double beta : betas) {
      RunConfig one = cfg;
      one.variant.kind = VariantKind::A;
      one.variant.beta = beta;
      char label[48];
      std::snprintf(label, sizeof(label), "abm-A beta=%g", beta);
      json fl = bench_one(one, label);
      fl["beta"] = beta;
      totals.push_back(fl["total_multiply_adds"].get<std::uint64_t>());
      sweep.push_back(fl);
    }
    report["beta_sweep"] = sweep;
    report["flops_ratio_beta1_to_half"] = double(totals[2]) / double(totals[1]);
    bool monotone = totals[0] < totals[1] && totals[1] < totals[2];
    report["monotone_in_beta"] = monotone;
    if (!monotone) {
      std::cerr << "bench: FLOPs not strictly increasing in beta\n";
      return 1;
    }
  } else {
    report["model"] = bench_one(cfg, "abm-" + std::string(1, variant_kind_char(cfg.variant.kind)));
  }

  std::cout << report.dump(2) << std::endl;
  std::cout << metric_table_text(rows, cfg.task.n_classes);
  if (!out_dir.empty()) {
    ArtifactWriter writer(out_dir);
    writer.write_text("bench.json", report.dump(2) + "\n");
    writer.write_text("bench.txt", metric_table_text(rows, cfg.task.n_classes));
    writer.finish(cfg.hash());
  }
  return 0;
}

int cmd_keyframes(const RunConfig& cfg, std::string checkpoint, std::size_t videos,
                  std::size_t candidates, const std::string& out_dir) {
  if (cfg.sampler.snippet != 1) {
    throw ConfigError("keyframe selection is a K = 1 protocol; set sampler.snippet to 1");
  }
  if (checkpoint.empty()) {
    checkpoint = (fs::path(cfg.out_dir) / "checkpoint_best" / "manifest.json").string();
  }
  SyntheticDataset data = generate_dataset(cfg.task);
  std::unique_ptr<Classifier> model = build_model_shell(cfg);
  auto tensors = load_checkpoint(checkpoint);
  std::vector<std::pair<std::string, Tensor>> params(tensors.begin(), tensors.end());
  load_params(*model, params);

  videos = std::min<std::size_t>(videos, data.val.size());
  json out = json::array();
  for (std::size_t v = 0; v < videos; ++v) {
    std::mt19937_64 rng = make_rng(mix_seed(cfg.seed, 0x6e7f, v));
    KeyframeResult best =
        select_keyframes(*model, data.val[v].frames, candidates, cfg.sampler.segments, rng);
    out.push_back({{"video", v},
                   {"label", data.val[v].label},
                   {"frames", best.frames},
                   {"score", best.score}});
  }
  json report{{"candidates", candidates}, {"keyframes", out}};
  std::cout << report.dump(2) << std::endl;
  if (!out_dir.empty()) {
    ArtifactWriter writer(out_dir);
    writer.write_text("keyframes.json", report.dump(2) + "\n");
    writer.finish(cfg.hash());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"abmkit: factorized bilinear modules for temporal sequence classification"};
  app.require_subcommand(1);

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every composite");
  std::size_t gc_seeds = 20;
  double gc_eps = 1e-5;
  std::vector<std::string> gc_checks;
  bool gc_negative = false;
  std::string gc_out;
  gradcheck->add_option("--seeds", gc_seeds, "random configurations per check");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step");
  auto* gc_checks_opt =
      gradcheck->add_option("--checks", gc_checks, "subset of checks to run")->delimiter(',');
  gradcheck->add_flag("--negative-control", gc_negative,
                      "splice a wrong backward rule in (the suite must fail)");
  gradcheck->add_option("--out", gc_out, "write gradcheck.json under this directory");

  // surgery-verify
  auto* surgery = app.add_subcommand("surgery-verify",
                                     "check a converted module against its source network");
  std::string sv_checkpoint;
  std::string sv_variant = "C";
  double sv_beta = 1.0;
  std::size_t sv_probes = 100;
  std::size_t sv_frames = 5;
  surgery->add_option("--checkpoint", sv_checkpoint, "tensor manifest with net.* (and module.*)")
      ->required();
  surgery->add_option("--variant", sv_variant, "C or A")->check(CLI::IsMember({"C", "A"}));
  surgery->add_option("--beta", sv_beta, "dynamic fraction (variant A)");
  surgery->add_option("--probes", sv_probes, "number of random probe sequences");
  surgery->add_option("--probe-frames", sv_frames, "time steps per probe sequence");

  // config-driven commands
  std::string cfg_path, out_override, checkpoint_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed_override;
  bool no_shift = false, sweep_beta = false;
  std::size_t kf_videos = 8, kf_candidates = 200;

  auto add_config_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", cfg_path, "experiment config (JSON)")->required();
    cmd->add_option("--set", overrides, "override config values, e.g. --set train.lr=0.01")
        ->take_all();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { seed_override = v; }, "override config seed");
    cmd->add_option("--out", out_override, "override output directory");
  };

  auto* train_cmd = app.add_subcommand("train", "train a model and write artifacts");
  add_config_options(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the val split");
  add_config_options(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "tensor manifest to load");
  eval_cmd->add_flag("--no-shift", no_shift, "disable shifting inference");

  auto* bench_cmd = app.add_subcommand("bench", "analytic / instrumented FLOPs accounting");
  add_config_options(bench_cmd);
  bench_cmd->add_flag("--sweep-beta", sweep_beta, "sweep beta in {1/4, 1/2, 1}");

  auto* kf_cmd = app.add_subcommand("keyframes", "select keyframe tuples on val videos");
  add_config_options(kf_cmd);
  kf_cmd->add_option("--checkpoint", checkpoint_path, "tensor manifest to load");
  kf_cmd->add_option("--videos", kf_videos, "number of val videos");
  kf_cmd->add_option("--candidates", kf_candidates, "candidate tuples per video");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_seeds, gc_eps, gc_checks, gc_checks_opt->count() > 0, gc_negative,
                           gc_out);
    }
    if (surgery->parsed()) {
      return cmd_surgery_verify(sv_checkpoint, sv_variant[0], sv_beta, sv_probes, sv_frames);
    }

    json cfg_json = load_config_json(cfg_path, overrides);
    RunConfig cfg = RunConfig::from_json(cfg_json);
    if (seed_override) cfg.seed = *seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;

    if (train_cmd->parsed()) return cmd_train(cfg);
    if (eval_cmd->parsed()) return cmd_eval(cfg, checkpoint_path, no_shift, out_override);
    if (bench_cmd->parsed()) return cmd_bench(cfg, sweep_beta, out_override);
    if (kf_cmd->parsed()) {
      return cmd_keyframes(cfg, checkpoint_path, kf_videos, kf_candidates, out_override);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
