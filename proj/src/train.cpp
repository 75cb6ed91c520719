#include "abmkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "abmkit/ops.hpp"
#include "abmkit/parallel.hpp"
#include "abmkit/rng.hpp"

namespace abmkit {

namespace {

constexpr std::uint64_t kTagShuffle = 0x5f31;
constexpr std::uint64_t kTagSnippet = 0x5f32;
constexpr std::uint64_t kTagPretrain = 0x5f33;

// Fixed group count keeps the gradient reduction order independent of the
// worker count, so runs reproduce bit-for-bit under any ABMKIT_THREADS.
constexpr std::size_t kGradGroups = 8;

bool label_in_topk(std::span<const double> logits, std::size_t label, std::size_t k) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j] > logits[label] || (logits[j] == logits[label] && j < label)) ++rank;
  }
  return rank < k;
}

double nll_of(std::span<const double> logits, std::size_t label) {
  double row_max = logits[0];
  for (double v : logits) row_max = std::max(row_max, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - row_max);
  return -(logits[label] - row_max - std::log(sum));
}

struct Sgd {
  double momentum;
  std::vector<std::vector<double>> velocity;

  explicit Sgd(const std::vector<std::pair<std::string, Tensor>>& params, double momentum_in)
      : momentum(momentum_in) {
    velocity.reserve(params.size());
    for (const auto& [name, t] : params) velocity.emplace_back(t.size(), 0.0);
  }

  void step(std::vector<std::pair<std::string, Tensor>>& params,
            const std::vector<std::vector<double>>& grads, double lr) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p].second.mutable_data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        velocity[p][i] = momentum * velocity[p][i] + grads[p][i];
        w[i] -= lr * velocity[p][i];
      }
    }
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw TrainError("learning rate must be finite, >= 0");
  if (momentum != 0.9) {
    throw TrainError("momentum is fixed at 0.9, got " + std::to_string(momentum));
  }
  if (batch < 1) throw TrainError("batch size must be >= 1");
  if (epochs < 1) throw TrainError("epoch count must be >= 1");
  for (std::size_t d : decay_epochs) {
    if (d < 1 || d > epochs) throw TrainError("decay epoch " + std::to_string(d) + " outside run");
  }
}

std::vector<std::size_t> TrainConfig::effective_decay_epochs() const {
  if (!decay_epochs.empty()) return decay_epochs;
  // two x0.1 decays at 60% and 80% of the run
  std::vector<std::size_t> out;
  const auto at = [&](double frac) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * double(epochs))));
  };
  out.push_back(at(0.6));
  if (at(0.8) != out.back()) out.push_back(at(0.8));
  return out;
}

EvalMetrics evaluate(const Classifier& model, const std::vector<VideoSample>& samples,
                     const SamplerSpec& spec, bool shifted) {
  spec.validate();
  if (samples.empty()) throw TrainError("evaluate: empty split");
  const std::size_t n = samples.size();
  std::vector<double> top1(n), top5(n), loss(n);

  parallel_for(n, [&](std::size_t i) {
    const VideoSample& sample = samples[i];
    const std::size_t length = sample.frames.dim(0);
    Tensor logits;
    if (shifted) {
      logits = aggregate_shifted(
          [&](const SampledIndices& idx) {
            return model.logits(assemble_snippets(sample.frames, idx, spec));
          },
          length, spec);
    } else {
      const SegmentBounds bounds = segment_bounds(length, spec.segments);
      const SampledIndices idx = sample_center_shifted(bounds, spec.snippet, 0, 1);
      logits = model.logits(assemble_snippets(sample.frames, idx, spec));
    }
    const auto ld = logits.data();
    top1[i] = label_in_topk(ld, sample.label, 1) ? 1.0 : 0.0;
    top5[i] = label_in_topk(ld, sample.label, 5) ? 1.0 : 0.0;
    loss[i] = nll_of(ld, sample.label);
  });

  EvalMetrics metrics;
  for (std::size_t i = 0; i < n; ++i) {
    metrics.top1 += top1[i];
    metrics.top5 += top5[i];
    metrics.loss += loss[i];
  }
  metrics.top1 /= double(n);
  metrics.top5 /= double(n);
  metrics.loss /= double(n);
  return metrics;
}

TrainResult train_classifier(Classifier& model, const TrainConfig& cfg,
                             const SyntheticDataset& data, const SamplerSpec& sampler,
                             std::uint64_t seed, std::ostream* progress) {
  cfg.validate();
  sampler.validate();
  if (data.train.empty() || data.val.empty()) throw TrainError("train: empty dataset");
  if (model.n_classes() != data.spec.n_classes) {
    throw TrainError("model emits " + std::to_string(model.n_classes()) + " classes, task has " +
                     std::to_string(data.spec.n_classes));
  }
  if (model.input_channels() != sampler.snippet * data.spec.channels) {
    throw TrainError("model takes " + std::to_string(model.input_channels()) +
                     " channels per step, sampler provides K*C = " +
                     std::to_string(sampler.snippet * data.spec.channels));
  }
  if (auto fixed = model.fixed_time_steps(); fixed && *fixed != sampler.segments) {
    throw TrainError("model is fixed to " + std::to_string(*fixed) + " time steps, sampler has " +
                     std::to_string(sampler.segments) + " segments");
  }

  auto params = model.parameters();
  Sgd optimizer(params, cfg.momentum);
  const auto decay_at = cfg.effective_decay_epochs();

  TrainResult result;
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  double lr = cfg.lr;
  const bool shifted_val = sampler.shifts > 1;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (std::find(decay_at.begin(), decay_at.end(), epoch) != decay_at.end()) lr *= 0.1;

    std::mt19937_64 shuffle_rng = make_rng(mix_seed(seed, kTagShuffle, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    double epoch_correct = 0.0;
    std::size_t epoch_count = 0;

    for (std::size_t batch_begin = 0; batch_begin < order.size(); batch_begin += cfg.batch) {
      const std::size_t batch_size = std::min(cfg.batch, order.size() - batch_begin);
      const std::size_t groups = std::min(kGradGroups, batch_size);

      struct GroupOut {
        double loss_sum = 0.0;  // per-sample NLL summed over the group
        double correct = 0.0;
        std::size_t count = 0;
        std::vector<std::vector<double>> grads;  // scaled by group size
      };
      std::vector<GroupOut> outs(groups);

      try {
        parallel_for(groups, [&](std::size_t g) {
          const std::size_t lo = batch_begin + g * batch_size / groups;
          const std::size_t hi = batch_begin + (g + 1) * batch_size / groups;
          if (lo == hi) return;

          auto worker = model.clone();
          auto worker_params = worker->parameters();
          Graph graph;
          AutogradScope scope(graph);

          std::vector<Tensor> rows;
          std::vector<std::size_t> labels;
          rows.reserve(hi - lo);
          for (std::size_t s = lo; s < hi; ++s) {
            const std::size_t vid = order[s];
            const VideoSample& sample = data.train[vid];
            std::mt19937_64 snippet_rng = make_rng(mix_seed(seed ^ kTagSnippet, vid, epoch));
            const SegmentBounds bounds = segment_bounds(sample.frames.dim(0), sampler.segments);
            const SampledIndices idx =
                sample_snippet(bounds, sampler.snippet, SampleMode::train_random, snippet_rng);
            Tensor input = assemble_snippets(sample.frames, idx, sampler);
            Tensor row = worker->logits(input);
            rows.push_back(reshape(row, {1, row.dim(0)}));
            labels.push_back(sample.label);
          }

          Tensor logits = rows.size() == 1 ? rows[0] : concat(rows, 0);
          Tensor loss = softmax_cross_entropy(logits, labels);
          graph.backward(loss);

          GroupOut& out = outs[g];
          out.count = hi - lo;
          out.loss_sum = loss.item() * double(out.count);
          const auto ld = logits.data();
          for (std::size_t r = 0; r < labels.size(); ++r) {
            if (label_in_topk(ld.subspan(r * worker->n_classes(), worker->n_classes()),
                              labels[r], 1)) {
              out.correct += 1.0;
            }
          }
          out.grads.reserve(worker_params.size());
          for (auto& [name, t] : worker_params) {
            if (t.has_grad()) {
              auto gr = t.grad();
              out.grads.emplace_back(gr.begin(), gr.end());
            } else {
              out.grads.emplace_back(t.size(), 0.0);
            }
          }
        });
      } catch (const NumericError& e) {
        throw TrainError("divergence at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch_begin / cfg.batch) + ": " + e.what());
      }

      // reduce in fixed group order, weighted by group share of the batch
      std::vector<std::vector<double>> total(params.size());
      for (std::size_t p = 0; p < params.size(); ++p) {
        total[p].assign(params[p].second.size(), 0.0);
      }
      double batch_loss = 0.0;
      for (std::size_t g = 0; g < groups; ++g) {
        if (outs[g].count == 0) continue;
        const double weight = double(outs[g].count) / double(batch_size);
        batch_loss += outs[g].loss_sum / double(batch_size);
        epoch_correct += outs[g].correct;
        for (std::size_t p = 0; p < params.size(); ++p) {
          // group grads are means over the group; rescale to batch means
          const double scale = weight;
          for (std::size_t i = 0; i < total[p].size(); ++i) {
            total[p][i] += scale * outs[g].grads[p][i];
          }
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw TrainError("divergence at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      epoch_loss += batch_loss * double(batch_size);
      epoch_count += batch_size;

      optimizer.step(params, total, lr);
    }

    EpochRow train_row{epoch, "train", epoch_correct / double(epoch_count), 0.0,
                       epoch_loss / double(epoch_count)};
    const EvalMetrics val = evaluate(model, data.val, sampler, shifted_val);
    EpochRow val_row{epoch, "val", val.top1, val.top5, val.loss};
    result.log.push_back(train_row);
    result.log.push_back(val_row);

    if (result.best_params.empty() || val.top1 > result.best_val_top1) {
      result.best_val_top1 = val.top1;
      result.best_epoch = epoch;
      result.best_params.clear();
      for (const auto& [name, t] : params) result.best_params.emplace_back(name, t.clone());
    }

    if (progress) {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "epoch %zu/%zu lr %.5f train loss %.4f top1 %.4f | val top1 %.4f top5 %.4f",
                    epoch, cfg.epochs, lr, train_row.loss, train_row.top1, val.top1, val.top5);
      (*progress) << line << std::endl;
    }
  }
  return result;
}

void load_params(Classifier& model, const std::vector<std::pair<std::string, Tensor>>& params) {
  auto targets = model.parameters();
  for (auto& [name, target] : targets) {
    const Tensor* source = nullptr;
    for (const auto& [sname, s] : params) {
      if (sname == name) {
        source = &s;
        break;
      }
    }
    if (!source) throw TrainError("missing parameter in snapshot: " + name);
    if (!same_shape(source->shape(), target.shape())) {
      throw TrainError("parameter " + name + " shape mismatch: snapshot " +
                       shape_to_string(source->shape()) + " vs model " +
                       shape_to_string(target.shape()));
    }
    auto dst = target.mutable_data();
    const auto src = source->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

std::string metrics_csv(const std::vector<EpochRow>& log, std::size_t n_classes) {
  std::ostringstream out;
  out << "epoch,split,top1,top5,loss\n";
  char buf[64];
  for (const EpochRow& row : log) {
    out << row.epoch << ',' << row.split << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", row.top1);
    out << buf << ',';
    if (n_classes >= 10) {
      std::snprintf(buf, sizeof(buf), "%.6f", row.top5);
      out << buf;
    }
    out << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", row.loss);
    out << buf << '\n';
  }
  return out.str();
}

PretrainResult pretrain_frame_net(const SyntheticDataset& data, std::size_t hidden,
                                  std::size_t features, std::size_t epochs, double lr,
                                  std::uint64_t seed) {
  if (data.train.empty()) throw TrainError("pretrain: empty dataset");
  const std::size_t channels = data.spec.channels;
  const std::size_t n_protos = data.n_prototypes();

  // frame pool from the train split, last tenth held out for the accuracy probe
  const std::size_t max_videos = std::min<std::size_t>(data.train.size(), 1000);
  std::vector<std::pair<std::size_t, std::size_t>> frames;  // (video, frame)
  for (std::size_t v = 0; v < max_videos; ++v) {
    for (std::size_t t = 0; t < data.train[v].frames.dim(0); ++t) frames.emplace_back(v, t);
  }
  const std::size_t held = std::max<std::size_t>(1, frames.size() / 10);
  const std::size_t train_count = frames.size() - held;

  std::mt19937_64 rng = make_rng(mix_seed(seed, kTagPretrain));
  TwoLayerNet net = TwoLayerNet::randn_init(channels, hidden, features, rng);
  Tensor probe_w = Tensor::randn({n_protos, features}, rng, 1.0 / std::sqrt(double(features)), true);
  Tensor probe_b = Tensor::zeros({n_protos}, true);

  std::vector<std::pair<std::string, Tensor>> params = net.named_tensors("net");
  params.emplace_back("probe.w", probe_w);
  params.emplace_back("probe.b", probe_b);
  Sgd optimizer(params, 0.9);

  const std::size_t batch = 64;
  std::vector<std::size_t> order(train_count);
  std::iota(order.begin(), order.end(), 0);

  auto batch_tensor = [&](std::size_t lo, std::size_t hi, const std::vector<std::size_t>& ids,
                          std::vector<std::size_t>& labels) {
    std::vector<double> xs((hi - lo) * channels);
    labels.clear();
    for (std::size_t s = lo; s < hi; ++s) {
      const auto [v, t] = frames[ids[s]];
      const auto fd = data.train[v].frames.data();
      std::copy_n(fd.begin() + t * channels, channels, xs.begin() + (s - lo) * channels);
      labels.push_back(data.train[v].prototype_ids[t]);
    }
    return Tensor::from_vector({hi - lo, channels}, std::move(xs));
  };

  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t lo = 0; lo < train_count; lo += batch) {
      const std::size_t hi = std::min(train_count, lo + batch);
      std::vector<std::size_t> labels;
      Tensor xs = batch_tensor(lo, hi, order, labels);

      Graph graph;
      AutogradScope scope(graph);
      Tensor feats = net.forward_rows(xs);
      Tensor logits = add_bias(matmul(feats, transpose(probe_w)), probe_b);
      Tensor loss = softmax_cross_entropy(logits, labels);
      graph.backward(loss);

      std::vector<std::vector<double>> grads;
      grads.reserve(params.size());
      for (auto& [name, t] : params) {
        if (t.has_grad()) {
          auto gr = t.grad();
          grads.emplace_back(gr.begin(), gr.end());
        } else {
          grads.emplace_back(t.size(), 0.0);
        }
        t.zero_grad();
      }
      optimizer.step(params, grads, lr);
    }
  }

  // probe accuracy on the held-out frames
  std::vector<std::size_t> held_ids(held);
  std::iota(held_ids.begin(), held_ids.end(), train_count);
  std::vector<std::size_t> labels;
  Tensor xs = batch_tensor(0, held, held_ids, labels);
  Tensor logits = add_bias(matmul(net.forward_rows(xs), transpose(probe_w)), probe_b);
  double correct = 0.0;
  const auto ld = logits.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (label_in_topk(ld.subspan(i * n_protos, n_protos), labels[i], 1)) correct += 1.0;
  }

  PretrainResult out;
  out.net = net;
  out.frame_top1 = correct / double(labels.size());
  return out;
}

ImplantResult build_implanted_classifier(const SyntheticDataset& data, const SamplerSpec& sampler,
                                         const VariantSpec& variant,
                                         std::optional<std::size_t> pool_after,
                                         std::size_t hidden, std::size_t features,
                                         std::size_t pretrain_epochs, double pretrain_lr,
                                         std::uint64_t seed) {
  variant.validate();
  if (variant.kind != VariantKind::C && variant.kind != VariantKind::A) {
    throw TrainError("implanted placement targets variant C or A");
  }
  sampler.validate();

  ImplantResult out;
  PretrainResult pretrained =
      pretrain_frame_net(data, hidden, features, pretrain_epochs, pretrain_lr, seed);
  out.pretrain_top1 = pretrained.frame_top1;
  out.widened_net = pretrained.net.widen_input(sampler.snippet);

  const std::size_t channels = sampler.snippet * data.spec.channels;
  SurgeryResult converted = build_auxiliary_branch(out.widened_net);
  SurgeryResult wide = expand_temporal(converted, variant, channels);

  const TwoLayerNet& net = out.widened_net;
  out.report = verify_identity(
      [&](const Tensor& seq) { return net.forward_rows(seq); },
      [&](const Tensor& seq) {
        return variant.kind == VariantKind::C ? abm_c_forward(wide.params, seq)
                                              : abm_a_forward(wide.params, seq, variant.beta);
      },
      100, {sampler.segments, channels}, mix_seed(seed, 0x1de));
  out.report.frozen_symbol_table = wide.symbol_table;

  AbmStack stack({{variant, std::move(wide.params)}}, Placement::implanted, pool_after);
  std::mt19937_64 head_rng = make_rng(mix_seed(seed, 0x6ead));
  Tensor head_w =
      Tensor::randn({data.spec.n_classes, features}, head_rng, 1.0 / std::sqrt(double(features)), true);
  Tensor head_b = Tensor::zeros({data.spec.n_classes}, true);
  out.model =
      std::make_unique<AbmClassifier>(std::move(stack), std::move(head_w), std::move(head_b));
  return out;
}

}  // namespace abmkit
