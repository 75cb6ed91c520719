#include "abmkit/model.hpp"

#include <cmath>

#include "abmkit/ops.hpp"
#include "abmkit/rng.hpp"

namespace abmkit {

namespace {

// Multiplies of one abm_g_rows call on n rows of width w.
std::uint64_t abm_layer_multiplies(std::size_t n, std::size_t w, std::size_t r, std::size_t d) {
  return static_cast<std::uint64_t>(n) * w * r * 2 + static_cast<std::uint64_t>(n) * r +
         static_cast<std::uint64_t>(n) * r * d;
}

}  // namespace

std::size_t Classifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, tensor] : parameters()) n += tensor.size();
  return n;
}

AbmClassifier::AbmClassifier(AbmStack stack, Tensor head_w, Tensor head_b)
    : stack_(std::move(stack)), head_w_(std::move(head_w)), head_b_(std::move(head_b)) {
  stack_.validate();
  if (head_w_.rank() != 2 || head_w_.dim(1) != stack_.output_dim()) {
    throw ShapeError("classifier head " + shape_to_string(head_w_.shape()) +
                     " does not match stack output " + std::to_string(stack_.output_dim()));
  }
  if (head_b_.shape() != Shape{head_w_.dim(0)}) {
    throw ShapeError("classifier head bias must have one entry per class");
  }
}

Tensor AbmClassifier::logits(const Tensor& input) const {
  return classify(stack_, input, head_w_, head_b_);
}

std::vector<std::pair<std::string, Tensor>> AbmClassifier::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t l = 0; l < stack_.layers.size(); ++l) {
    auto named = stack_.layers[l].params.named_tensors("layer" + std::to_string(l));
    out.insert(out.end(), named.begin(), named.end());
  }
  out.emplace_back("head.w", head_w_);
  out.emplace_back("head.b", head_b_);
  return out;
}

std::unique_ptr<Classifier> AbmClassifier::clone() const {
  return std::make_unique<AbmClassifier>(stack_.clone(), head_w_.clone(), head_b_.clone());
}

std::size_t AbmClassifier::input_channels() const { return stack_.input_channels(); }

std::size_t AbmClassifier::n_classes() const { return head_w_.dim(0); }

flops::FlopsReport AbmClassifier::analytic_flops(std::size_t time_steps) const {
  flops::FlopsReport report;
  std::size_t t = time_steps;
  for (std::size_t l = 0; l < stack_.layers.size(); ++l) {
    const AbmParams& p = stack_.layers[l].params;
    report.per_layer.push_back({"abm" + std::to_string(l),
                                abm_layer_multiplies(t, p.in_a(), p.rank_r(), p.out_dim())});
    if (stack_.temporal_pool_after && *stack_.temporal_pool_after == l) t /= 2;
  }
  const std::size_t classes = n_classes();
  report.per_layer.push_back(
      {"head", static_cast<std::uint64_t>(t) * stack_.output_dim() * classes + classes});
  report.parameter_count = parameter_count();
  return report;
}

MeanPoolClassifier::MeanPoolClassifier(Tensor w, Tensor b, std::size_t snippet)
    : w_(std::move(w)), b_(std::move(b)), snippet_(snippet) {
  if (w_.rank() != 2 || b_.shape() != Shape{w_.dim(0)}) {
    throw ShapeError("mean-pool classifier needs w [classes x C] and matching bias");
  }
  if (snippet_ < 1) throw ShapeError("mean-pool classifier needs snippet >= 1");
}

MeanPoolClassifier MeanPoolClassifier::randn_init(std::size_t frame_channels, std::size_t snippet,
                                                  std::size_t classes, std::mt19937_64& rng) {
  Tensor w =
      Tensor::randn({classes, frame_channels}, rng, 1.0 / std::sqrt(double(frame_channels)), true);
  Tensor b = Tensor::zeros({classes}, true);
  return MeanPoolClassifier(std::move(w), std::move(b), snippet);
}

Tensor MeanPoolClassifier::logits(const Tensor& input) const {
  const std::size_t frame_c = w_.dim(1);
  if (input.rank() != 2 || input.dim(1) != snippet_ * frame_c) {
    throw ShapeError("mean-pool classifier expects [T x " + std::to_string(snippet_ * frame_c) +
                     "], got " + shape_to_string(input.shape()));
  }
  Tensor pooled;
  {
    flops::LabelScope label("pool");
    // view the snippet-assembled steps as their individual frames
    Tensor frames = reshape(input, {input.dim(0) * snippet_, frame_c});
    pooled = mean_over_axis(frames, 0);
  }
  flops::LabelScope label("head");
  Tensor row = reshape(pooled, {1, pooled.dim(0)});
  Tensor out = add_bias(matmul(row, transpose(w_)), b_);
  return reshape(out, {out.dim(1)});
}

std::vector<std::pair<std::string, Tensor>> MeanPoolClassifier::parameters() const {
  return {{"w", w_}, {"b", b_}};
}

std::unique_ptr<Classifier> MeanPoolClassifier::clone() const {
  return std::make_unique<MeanPoolClassifier>(w_.clone(), b_.clone(), snippet_);
}

std::size_t MeanPoolClassifier::input_channels() const { return snippet_ * w_.dim(1); }

std::size_t MeanPoolClassifier::n_classes() const { return w_.dim(0); }

flops::FlopsReport MeanPoolClassifier::analytic_flops(std::size_t) const {
  flops::FlopsReport report;
  const std::size_t c = w_.dim(1);
  report.per_layer.push_back({"pool", static_cast<std::uint64_t>(c)});
  report.per_layer.push_back({"head", static_cast<std::uint64_t>(c) * n_classes()});
  report.parameter_count = parameter_count();
  return report;
}

ConcatMlpClassifier::ConcatMlpClassifier(std::size_t time_steps, std::size_t channels, Tensor w1,
                                         Tensor b1, Tensor w2, Tensor b2)
    : time_steps_(time_steps),
      channels_(channels),
      w1_(std::move(w1)),
      b1_(std::move(b1)),
      w2_(std::move(w2)),
      b2_(std::move(b2)) {
  if (w1_.rank() != 2 || w1_.dim(1) != time_steps_ * channels_) {
    throw ShapeError("concat-MLP first layer must take T*C inputs");
  }
  if (b1_.shape() != Shape{w1_.dim(0)} || w2_.dim(1) != w1_.dim(0) ||
      b2_.shape() != Shape{w2_.dim(0)}) {
    throw ShapeError("concat-MLP layer dimensions disagree");
  }
}

ConcatMlpClassifier ConcatMlpClassifier::randn_init(std::size_t time_steps, std::size_t channels,
                                                    std::size_t hidden, std::size_t classes,
                                                    std::mt19937_64& rng) {
  const std::size_t flat = time_steps * channels;
  Tensor w1 = Tensor::randn({hidden, flat}, rng, 1.0 / std::sqrt(double(flat)), true);
  Tensor b1 = Tensor::zeros({hidden}, true);
  Tensor w2 = Tensor::randn({classes, hidden}, rng, 1.0 / std::sqrt(double(hidden)), true);
  Tensor b2 = Tensor::zeros({classes}, true);
  return ConcatMlpClassifier(time_steps, channels, std::move(w1), std::move(b1), std::move(w2),
                             std::move(b2));
}

Tensor ConcatMlpClassifier::logits(const Tensor& input) const {
  if (input.shape() != Shape{time_steps_, channels_}) {
    throw ShapeError("concat-MLP expects [" + std::to_string(time_steps_) + " x " +
                     std::to_string(channels_) + "], got " + shape_to_string(input.shape()));
  }
  Tensor flat = reshape(input, {1, time_steps_ * channels_});
  Tensor hidden;
  {
    flops::LabelScope label("mlp1");
    hidden = relu(add_bias(matmul(flat, transpose(w1_)), b1_));
  }
  flops::LabelScope label("mlp2");
  Tensor out = add_bias(matmul(hidden, transpose(w2_)), b2_);
  return reshape(out, {out.dim(1)});
}

std::vector<std::pair<std::string, Tensor>> ConcatMlpClassifier::parameters() const {
  return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_}};
}

std::unique_ptr<Classifier> ConcatMlpClassifier::clone() const {
  return std::make_unique<ConcatMlpClassifier>(time_steps_, channels_, w1_.clone(), b1_.clone(),
                                               w2_.clone(), b2_.clone());
}

std::size_t ConcatMlpClassifier::input_channels() const { return channels_; }

std::size_t ConcatMlpClassifier::n_classes() const { return w2_.dim(0); }

flops::FlopsReport ConcatMlpClassifier::analytic_flops(std::size_t) const {
  flops::FlopsReport report;
  const std::size_t flat = time_steps_ * channels_;
  report.per_layer.push_back({"mlp1", static_cast<std::uint64_t>(flat) * w1_.dim(0)});
  report.per_layer.push_back(
      {"mlp2", static_cast<std::uint64_t>(w1_.dim(0)) * n_classes()});
  report.parameter_count = parameter_count();
  return report;
}

AbmClassifier build_top_classifier(const VariantSpec& variant, std::size_t layers,
                                   std::size_t width, std::size_t rank,
                                   std::size_t input_channels, std::size_t classes,
                                   std::mt19937_64& rng) {
  variant.validate();
  if (layers < 1) throw ShapeError("stack needs at least one layer");
  const std::size_t r = rank == 0 ? width : rank;

  std::vector<AbmStack::Layer> stack_layers;
  stack_layers.reserve(layers);
  std::size_t channels = input_channels;
  for (std::size_t l = 0; l < layers; ++l) {
    std::size_t entry_width = channels;
    switch (variant.kind) {
      case VariantKind::G:
      case VariantKind::S:
        entry_width = channels;
        break;
      case VariantKind::C:
        entry_width = 3 * channels;
        break;
      case VariantKind::A:
        entry_width = channels + 2 * dynamic_channels(channels, variant.beta);
        break;
    }
    stack_layers.push_back(
        {variant, AbmParams::randn_init(width, entry_width, entry_width, r, rng)});
    channels = width;
  }
  AbmStack stack(std::move(stack_layers), Placement::top);

  Tensor head_w = Tensor::randn({classes, width}, rng, 1.0 / std::sqrt(double(width)), true);
  Tensor head_b = Tensor::zeros({classes}, true);
  return AbmClassifier(std::move(stack), std::move(head_w), std::move(head_b));
}

flops::MultiplyCounts instrumented_forward(const Classifier& model, const Tensor& input) {
  flops::CountingScope scope;
  model.logits(input);
  return scope.counts();
}

flops::FlopsReport count_flops(const Classifier& model, std::size_t time_steps,
                               std::uint64_t probe_seed) {
  flops::FlopsReport report = model.analytic_flops(time_steps);

  std::mt19937_64 rng = make_rng(probe_seed);
  Tensor probe = Tensor::randn({time_steps, model.input_channels()}, rng);
  const flops::MultiplyCounts counts = instrumented_forward(model, probe);

  if (counts.total != report.total()) {
    throw TensorError("FLOPs accounting drift: analytic " + std::to_string(report.total()) +
                      " vs instrumented " + std::to_string(counts.total));
  }
  for (const auto& entry : report.per_layer) {
    if (counts.labeled(entry.layer) != entry.multiply_adds) {
      throw TensorError("FLOPs accounting drift in layer " + entry.layer + ": analytic " +
                        std::to_string(entry.multiply_adds) + " vs instrumented " +
                        std::to_string(counts.labeled(entry.layer)));
    }
  }
  return report;
}

}  // namespace abmkit
