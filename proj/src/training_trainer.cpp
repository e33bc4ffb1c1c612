#include "mouthtrace/training/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "mouthtrace/parallel.hpp"
#include "mouthtrace/training/early_stop.hpp"
#include "mouthtrace/training/losses.hpp"
#include "mouthtrace/training/sampling.hpp"

namespace mouthtrace::training {

namespace {

// Substream purposes; keys are (epoch * kPurposes + purpose, index).
enum Purpose : std::uint64_t { kOrder = 0, kSample = 1, kDropout = 2, kSplit = 3, kInit = 4, kPurposes = 8 };

Rng stream(const Rng& base, int epoch, Purpose purpose, std::uint64_t index = 0) {
  return base.substream(static_cast<std::uint64_t>(epoch) * kPurposes + purpose, index);
}

enum class Task { lipread, forgery };

struct LoopSpec {
  Task task;
  nn::Mode extractor_mode;
};

void check_frames(const std::vector<VideoSample>& data, std::int64_t clip_length) {
  if (data.empty()) throw DataError("training set is empty");
  for (const auto& s : data) {
    const Shape& f = s.frames.shape();
    if (f.size() != 4 || f[3] != 1) {
      throw ShapeError("video " + s.id + ": frames must be [F, H, W, 1], got " + shape_string(f));
    }
    if (f[0] < clip_length) {
      throw DataError("video " + s.id + " has " + std::to_string(f[0]) + " frames, fewer than the clip length " +
                      std::to_string(clip_length));
    }
  }
}

struct Batch {
  Tensor clips;
  std::vector<int> labels;
};

Tensor stack(const std::vector<Tensor>& clips) {
  Shape s = clips.front().shape();
  s.insert(s.begin(), static_cast<std::int64_t>(clips.size()));
  Tensor out(s);
  const std::int64_t each = clips.front().numel();
  for (std::size_t i = 0; i < clips.size(); ++i) std::copy_n(clips[i].ptr(), each, out.ptr() + i * each);
  return out;
}

double batch_loss(Task task, const nn::Var& logits, const std::vector<int>& labels, nn::Var* graph) {
  nn::Var loss = task == Task::lipread ? ce_loss(logits, labels) : bce_loss(logits, labels);
  if (graph) *graph = loss;
  return loss.value().item();
}

std::int64_t correct(Task task, const Tensor& logits, const std::vector<int>& labels) {
  std::int64_t hits = 0;
  const std::int64_t L = logits.dim(1);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const float* row = logits.ptr() + static_cast<std::int64_t>(n) * L;
    const int pred = task == Task::lipread ? static_cast<int>(std::max_element(row, row + L) - row) : (row[0] >= 0.0f);
    hits += pred == labels[n];
  }
  return hits;
}

struct EvalClip {
  std::size_t video;
  std::int64_t start;
};

// Mean clip loss over the validation videos: non-overlapping windows,
// centre crop, eval mode throughout.
double validation_loss(nn::Model& model, Task task, const std::vector<VideoSample>& data,
                       const std::vector<std::size_t>& videos, std::int64_t batch_size) {
  const std::int64_t T = model.config().clip_length;
  std::vector<EvalClip> clips;
  for (auto v : videos)
    for (auto start : clip_starts(data[v].frames.dim(0), T, T)) clips.push_back({v, start});
  if (clips.empty()) return std::numeric_limits<double>::quiet_NaN();
  const nn::Head head = task == Task::lipread ? nn::Head::lipread : nn::Head::forgery;
  double total = 0.0;
  for (std::size_t first = 0; first < clips.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(clips.size() - first, static_cast<std::size_t>(batch_size));
    std::vector<Tensor> parts(count);
    std::vector<int> labels(count);
    parallel_for(static_cast<std::int64_t>(count), [&](std::int64_t i) {
      const auto& c = clips[first + static_cast<std::size_t>(i)];
      Rng unused(0);
      parts[static_cast<std::size_t>(i)] = augment(slice_frames(data[c.video].frames, c.start, T), unused, false);
      labels[static_cast<std::size_t>(i)] = data[c.video].label;
    });
    const Tensor logits = model.predict(stack(parts), head);
    for (std::size_t i = 0; i < count; ++i) {
      const Tensor row(Shape{logits.dim(1)}, std::vector<float>(logits.ptr() + i * logits.dim(1),
                                                                 logits.ptr() + (i + 1) * logits.dim(1)));
      total += task == Task::lipread ? ce_loss(row, labels[i]) : bce_loss(row[0], labels[i]);
    }
  }
  return total / static_cast<double>(clips.size());
}

TrainResult run_training(const std::vector<VideoSample>& data, nn::Model& model, const TrainConfig& config,
                         const LoopSpec& spec, const EpochCallback& on_epoch) {
  const std::int64_t T = model.config().clip_length;
  const Rng base(config.seed);
  Rng split_rng = stream(base, 0, kSplit);
  auto [train_idx, val_idx] = split_validation(data, config.val_fraction, split_rng);
  if (train_idx.empty()) throw DataError("no training videos left after the validation split");

  std::vector<int> train_labels;
  for (auto i : train_idx) train_labels.push_back(data[i].label);
  if (spec.task == Task::forgery) {
    const std::set<int> classes(train_labels.begin(), train_labels.end());
    if (classes.size() != 2) throw DataError("forgery training needs both real and fake videos");
  }

  const nn::Head head = spec.task == Task::lipread ? nn::Head::lipread : nn::Head::forgery;
  AdamState adam;
  EarlyStopper stopper(config.patience, config.min_delta);
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng order_rng = stream(base, epoch, kOrder);
    std::vector<std::size_t> order;
    if (spec.task == Task::forgery) {
      for (auto k : oversample_epoch(train_labels, order_rng)) order.push_back(train_idx[k]);
    } else {
      order = train_idx;
      shuffle(order, order_rng);
    }

    double loss_sum = 0.0;
    std::int64_t seen = 0, hits = 0;
    bool out_of_steps = false;
    std::uint64_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min(order.size() - first, static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor> parts(count);
      std::vector<int> labels(count);
      parallel_for(static_cast<std::int64_t>(count), [&](std::int64_t i) {
        const std::size_t pos = first + static_cast<std::size_t>(i);
        const VideoSample& s = data[order[pos]];
        Rng rng = stream(base, epoch, kSample, pos);
        const std::int64_t F = s.frames.dim(0);
        const auto start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(F - T + 1)));
        CropParams crop = draw_crop(s.frames.dim(1), s.frames.dim(2), rng, config.augment_crop);
        if (!config.augment_crop) crop.flip = config.augment_flip && rng.bernoulli(0.5);
        if (!config.augment_flip) crop.flip = false;
        parts[static_cast<std::size_t>(i)] = crop_clip(slice_frames(s.frames, start, T), crop);
        labels[static_cast<std::size_t>(i)] = s.label;
      });

      Rng dropout_rng = stream(base, epoch, kDropout, batch_index++);
      nn::ParamBinder bind(model.params(), true);
      nn::ForwardOptions options{.head = head,
                                 .extractor_mode = spec.extractor_mode,
                                 .tcn_mode = nn::Mode::train,
                                 .record = true,
                                 .dropout_rng = &dropout_rng};
      nn::Var logits = model.forward(bind, stack(parts), options);
      nn::Var loss;
      const double value = batch_loss(spec.task, logits, labels, &loss);
      if (!std::isfinite(value)) throw NumericError("training loss is not finite at epoch " + std::to_string(epoch));
      nn::backward(loss);
      adam_step(model.params(), bind.gradients(), adam, config.adam);
      ++result.steps;

      loss_sum += value * static_cast<double>(count);
      seen += static_cast<std::int64_t>(count);
      hits += correct(spec.task, logits.value(), labels);
      if (config.max_steps > 0 && result.steps >= config.max_steps) {
        out_of_steps = true;
        break;
      }
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(seen);
    log.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    log.val_loss = val_idx.empty() ? log.train_loss
                                   : validation_loss(model, spec.task, data, val_idx, config.batch_size);
    log.lr = config.adam.learning_rate;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.val_loss < best_val || result.best.empty()) {
      best_val = log.val_loss;
      result.best = model.params().to_map();
      result.best_epoch = epoch;
    }
    if (stopper.update(log.val_loss) || out_of_steps) break;
  }

  model.params().load(result.best, {nn::kAllPartitions.begin(), nn::kAllPartitions.end()});
  return result;
}

}  // namespace

FinetuneMode parse_finetune_mode(const std::string& name) {
  if (name == "frozen") return FinetuneMode::frozen;
  if (name == "ft_whole") return FinetuneMode::ft_whole;
  if (name == "scratch") return FinetuneMode::scratch;
  throw ConfigError("unknown finetune mode '" + name + "' (expected frozen, ft_whole or scratch)");
}

const char* finetune_mode_name(FinetuneMode mode) {
  switch (mode) {
    case FinetuneMode::frozen: return "frozen";
    case FinetuneMode::ft_whole: return "ft_whole";
    case FinetuneMode::scratch: return "scratch";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batchSize must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (min_delta < 0.0) throw ConfigError("minDelta must be >= 0");
  if (max_epochs < 1) throw ConfigError("maxEpochs must be >= 1");
  if (max_steps < 0) throw ConfigError("maxSteps must be >= 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("valFraction must be in [0, 1)");
  if (!(adam.learning_rate > 0.0f)) throw ConfigError("learningRate must be positive");
  if (adam.beta1 < 0.0f || adam.beta1 >= 1.0f || adam.beta2 < 0.0f || adam.beta2 >= 1.0f) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0f)) throw ConfigError("Adam eps must be positive");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const std::vector<VideoSample>& data, double fraction, Rng& rng) {
  std::vector<std::string> groups;
  for (const auto& s : data) groups.push_back(s.group.empty() ? s.id : s.group);
  std::vector<std::string> unique(groups.begin(), groups.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::size_t n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(unique.size())));
  if (fraction > 0.0 && n_val == 0 && unique.size() >= 2) n_val = 1;
  if (n_val >= unique.size()) n_val = unique.size() - 1;
  shuffle(unique, rng);
  const std::set<std::string> val_groups(unique.begin(), unique.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train, val;
  for (std::size_t i = 0; i < data.size(); ++i) (val_groups.count(groups[i]) ? val : train).push_back(i);
  return {train, val};
}

std::vector<std::int64_t> clip_starts(std::int64_t frames, std::int64_t clip_length, std::int64_t stride) {
  if (clip_length < 1 || stride < 1) throw ConfigError("clip length and stride must be positive");
  std::vector<std::int64_t> starts;
  for (std::int64_t s = 0; s + clip_length <= frames; s += stride) starts.push_back(s);
  return starts;
}

Tensor slice_frames(const Tensor& frames, std::int64_t start, std::int64_t length) {
  const Shape& s = frames.shape();
  if (s.empty() || start < 0 || length < 0 || start + length > s[0]) {
    throw ShapeError("frame slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside " + shape_string(s));
  }
  Shape out = s;
  out[0] = length;
  const std::int64_t per = frames.numel() / std::max<std::int64_t>(s[0], 1);
  return Tensor(out, std::vector<float>(frames.ptr() + start * per, frames.ptr() + (start + length) * per));
}

TrainResult pretrain_lipreading(const std::vector<LipreadingSample>& data, nn::Model& model,
                                const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const std::int64_t L = model.config().lipread_classes;
  if (L < 2) throw ConfigError("lipreading needs at least 2 classes, got " + std::to_string(L));
  check_frames(data, model.config().clip_length);
  for (const auto& s : data)
    if (s.label < 0 || s.label >= L) {
      throw DataError("video " + s.id + ": word label " + std::to_string(s.label) + " outside [0, " +
                      std::to_string(L) + ")");
    }
  auto& store = model.params();
  for (auto p : nn::kAllPartitions) store.set_trainable(p, true);
  store.set_trainable(nn::Partition::forgery_head, false);
  auto result = run_training(data, model, config, LoopSpec{Task::lipread, nn::Mode::train}, on_epoch);
  store.set_trainable(nn::Partition::forgery_head, true);
  return result;
}

TrainResult finetune_forgery(const std::vector<ForgerySample>& data, nn::Model& model, const TensorMap& pretrained,
                             FinetuneMode mode, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  check_frames(data, model.config().clip_length);
  for (const auto& s : data)
    if (s.label != 0 && s.label != 1) throw DataError("video " + s.id + ": forgery label must be 0 or 1");

  auto& store = model.params();
  const Rng base(config.seed);
  Rng init = stream(base, 0, kInit);
  if (mode == FinetuneMode::scratch) {
    const std::uint64_t seed = init.next_u64();
    for (auto p : nn::kAllPartitions) model.reinitialize(p, seed);
  } else {
    store.load(pretrained, {nn::Partition::feature_extractor, nn::Partition::temporal_net});
    model.reinitialize(nn::Partition::forgery_head, init.next_u64());
  }
  for (auto p : nn::kAllPartitions) store.set_trainable(p, true);
  store.set_trainable(nn::Partition::lipread_head, false);
  const bool frozen = mode == FinetuneMode::frozen;
  store.set_trainable(nn::Partition::feature_extractor, !frozen);
  auto result = run_training(data, model, config,
                             LoopSpec{Task::forgery, frozen ? nn::Mode::eval : nn::Mode::train}, on_epoch);
  for (auto p : nn::kAllPartitions) store.set_trainable(p, true);
  return result;
}

}  // namespace mouthtrace::training
