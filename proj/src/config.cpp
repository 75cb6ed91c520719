#include "abmkit/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "abmkit/rng.hpp"

namespace abmkit {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for \"") + key + "\": " + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a_64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

json variant_to_json(const VariantSpec& spec) {
  json j{{"kind", std::string(1, variant_kind_char(spec.kind))}, {"m", spec.window}};
  if (spec.kind == VariantKind::A) j["beta"] = spec.beta;
  return j;
}

VariantSpec variant_from_json(const json& j) {
  reject_unknown_keys(j, {"kind", "m", "beta"}, "variant");
  VariantSpec spec;
  const std::string kind = get_or<std::string>(j, "kind", "G");
  if (kind.size() != 1) throw ConfigError("variant kind must be one of G, S, C, A");
  spec.kind = variant_kind_from_char(kind[0]);
  spec.window = get_or<std::size_t>(j, "m", 3);
  spec.beta = get_or<double>(j, "beta", 0.0);
  spec.validate();
  return spec;
}

json stack_to_json(const AbmStack& stack) {
  json layers = json::array();
  for (const AbmStack::Layer& layer : stack.layers) {
    json l = variant_to_json(layer.spec);
    l["in"] = layer.params.in_a();
    l["rank"] = layer.params.rank_r();
    l["out"] = layer.params.out_dim();
    layers.push_back(l);
  }
  json j{{"placement", stack.placement == Placement::top ? "top" : "implanted"},
         {"layers", layers}};
  if (stack.temporal_pool_after) j["temporal_pool_after"] = *stack.temporal_pool_after;
  return j;
}

json sampler_to_json(const SamplerSpec& spec) {
  return {{"segments", spec.segments}, {"snippet", spec.snippet}, {"shifts", spec.shifts}};
}

SamplerSpec sampler_from_json(const json& j) {
  reject_unknown_keys(j, {"segments", "snippet", "shifts"}, "sampler");
  SamplerSpec spec;
  spec.segments = get_or<std::size_t>(j, "segments", 8);
  spec.snippet = get_or<std::size_t>(j, "snippet", 3);
  spec.shifts = get_or<std::size_t>(j, "shifts", 3);
  spec.validate();
  return spec;
}

json task_to_json(const SyntheticTaskSpec& spec) {
  return {{"task", task_kind_name(spec.task)}, {"classes", spec.n_classes},
          {"frames", spec.frames},             {"channels", spec.channels},
          {"noise", spec.noise_sigma},         {"seed", spec.seed},
          {"train", spec.train_samples},       {"val", spec.val_samples}};
}

SyntheticTaskSpec task_from_json(const json& j) {
  reject_unknown_keys(j, {"task", "classes", "frames", "channels", "noise", "seed", "train", "val"},
                      "task");
  SyntheticTaskSpec spec;
  spec.task = task_kind_from_name(get_or<std::string>(j, "task", "order-discrimination"));
  spec.n_classes = get_or<std::size_t>(j, "classes", 20);
  spec.frames = get_or<std::size_t>(j, "frames", 24);
  spec.channels = get_or<std::size_t>(j, "channels", 16);
  spec.noise_sigma = get_or<double>(j, "noise", 0.1);
  spec.seed = get_or<std::uint64_t>(j, "seed", 1);
  spec.train_samples = get_or<std::size_t>(j, "train", 10000);
  spec.val_samples = get_or<std::size_t>(j, "val", 2000);
  spec.validate();
  return spec;
}

json train_to_json(const TrainConfig& cfg) {
  return {{"lr", cfg.lr},
          {"momentum", cfg.momentum},
          {"batch", cfg.batch},
          {"epochs", cfg.epochs},
          {"decay_epochs", cfg.decay_epochs}};
}

TrainConfig train_from_json(const json& j) {
  reject_unknown_keys(j, {"lr", "momentum", "batch", "epochs", "decay_epochs"}, "train");
  TrainConfig cfg;
  cfg.lr = get_or<double>(j, "lr", 0.05);
  cfg.momentum = get_or<double>(j, "momentum", 0.9);
  cfg.batch = get_or<std::size_t>(j, "batch", 32);
  cfg.epochs = get_or<std::size_t>(j, "epochs", 15);
  cfg.decay_epochs = get_or<std::vector<std::size_t>>(j, "decay_epochs", {});
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  variant.validate();
  sampler.validate();
  task.validate();
  train.validate();
  if (layers < 1) throw ConfigError("layers must be >= 1");
  if (width < 1) throw ConfigError("width must be >= 1");
  if (placement == Placement::implanted && layers != 1) {
    throw ConfigError("implanted placement converts one two-layer subnet; layers must be 1");
  }
  if (pool_after) {
    if (placement != Placement::implanted) {
      throw ConfigError("pool_after is only valid for implanted placement");
    }
    if (*pool_after >= layers) throw ConfigError("pool_after layer index out of range");
  }
  if (placement == Placement::implanted &&
      (variant.kind != VariantKind::C && variant.kind != VariantKind::A)) {
    throw ConfigError("implanted placement targets variant C or A");
  }
  if (out_dir.empty()) throw ConfigError("output directory must not be empty");
}

json RunConfig::to_json() const {
  json j{{"variant", variant_to_json(variant)},
         {"placement", placement == Placement::top ? "top" : "implanted"},
         {"layers", layers},
         {"width", width},
         {"rank", rank},
         {"sampler", sampler_to_json(sampler)},
         {"task", task_to_json(task)},
         {"train", train_to_json(train)},
         {"pretrain",
          {{"hidden", pretrain.hidden},
           {"features", pretrain.features},
           {"epochs", pretrain.epochs},
           {"lr", pretrain.lr}}},
         {"baselines", baselines},
         {"seed", seed},
         {"out", out_dir}};
  if (pool_after) j["pool_after"] = *pool_after;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"variant", "placement", "layers", "width", "rank", "pool_after", "sampler",
                       "task", "train", "pretrain", "baselines", "seed", "out"},
                      "config");
  RunConfig cfg;
  if (j.contains("variant")) cfg.variant = variant_from_json(j.at("variant"));
  const std::string placement = get_or<std::string>(j, "placement", "top");
  if (placement == "top") {
    cfg.placement = Placement::top;
  } else if (placement == "implanted") {
    cfg.placement = Placement::implanted;
  } else {
    throw ConfigError("placement must be \"top\" or \"implanted\"");
  }
  cfg.layers = get_or<std::size_t>(j, "layers", 1);
  cfg.width = get_or<std::size_t>(j, "width", 32);
  cfg.rank = get_or<std::size_t>(j, "rank", 0);
  if (j.contains("pool_after")) cfg.pool_after = j.at("pool_after").get<std::size_t>();
  if (j.contains("sampler")) cfg.sampler = sampler_from_json(j.at("sampler"));
  if (j.contains("task")) cfg.task = task_from_json(j.at("task"));
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    reject_unknown_keys(p, {"hidden", "features", "epochs", "lr"}, "pretrain");
    cfg.pretrain.hidden = get_or<std::size_t>(p, "hidden", cfg.pretrain.hidden);
    cfg.pretrain.features = get_or<std::size_t>(p, "features", cfg.pretrain.features);
    cfg.pretrain.epochs = get_or<std::size_t>(p, "epochs", cfg.pretrain.epochs);
    cfg.pretrain.lr = get_or<double>(p, "lr", cfg.pretrain.lr);
  }
  cfg.baselines = get_or<bool>(j, "baselines", false);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.out_dir = get_or<std::string>(j, "out", "out");
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("bad JSON in " + path + ": " + e.what());
  }
  return from_json(j);
}

std::uint64_t RunConfig::hash() const { return fnv1a_64(to_json().dump()); }

std::unique_ptr<Classifier> build_model_shell(const RunConfig& cfg) {
  cfg.validate();
  const std::size_t input_channels = cfg.sampler.snippet * cfg.task.channels;
  std::mt19937_64 rng = make_rng(mix_seed(cfg.seed, 0x4d0d));
  if (cfg.placement == Placement::top) {
    return std::make_unique<AbmClassifier>(build_top_classifier(
        cfg.variant, cfg.layers, cfg.width, cfg.rank, input_channels, cfg.task.n_classes, rng));
  }

  // implanted: one converted layer, rank = pretrain hidden, out = features
  std::size_t width = 3 * input_channels;
  if (cfg.variant.kind == VariantKind::A) {
    width = input_channels + 2 * dynamic_channels(input_channels, cfg.variant.beta);
  }
  AbmParams params = AbmParams::randn_init(cfg.pretrain.features, width, width,
                                           cfg.pretrain.hidden, rng, Activation::relu);
  AbmStack stack({{cfg.variant, std::move(params)}}, Placement::implanted, cfg.pool_after);
  Tensor head_w = Tensor::randn({cfg.task.n_classes, cfg.pretrain.features}, rng,
                                1.0 / std::sqrt(double(cfg.pretrain.features)), true);
  Tensor head_b = Tensor::zeros({cfg.task.n_classes}, true);
  return std::make_unique<AbmClassifier>(std::move(stack), std::move(head_w), std::move(head_b));
}

}  // namespace abmkit
