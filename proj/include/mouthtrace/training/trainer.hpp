#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mouthtrace/checkpoint.hpp"
#include "mouthtrace/nn/model.hpp"
#include "mouthtrace/training/adam.hpp"

namespace mouthtrace::training {

/// One preprocessed video. For lipreading the label is a word index, for
/// forgery detection 0 (real) or 1 (fake).
struct VideoSample {
  std::string id;
  /// Videos sharing a group (e.g. a fake and its source) never straddle the
  /// train/validation split. Empty means the id.
  std::string group;
  Tensor frames;  // [F, 96, 96, 1] in [0, 1]
  int label = 0;
  std::string method;
};

using LipreadingSample = VideoSample;
using ForgerySample = VideoSample;

enum class FinetuneMode { frozen, ft_whole, scratch };

FinetuneMode parse_finetune_mode(const std::string& name);
const char* finetune_mode_name(FinetuneMode mode);

struct TrainConfig {
  std::int64_t batch_size = 32;
  AdamConfig adam;
  int patience = 10;
  double min_delta = 1e-4;
  int max_epochs = 100;
  std::int64_t max_steps = 0;  // 0 = unlimited
  double val_fraction = 0.1;
  bool augment_crop = true;
  bool augment_flip = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  /// Whole-store snapshot (parameters and buffers) at the epoch with the
  /// lowest validation loss, earliest on ties. Also left in the model.
  TensorMap best;
  int best_epoch = 0;
  std::int64_t steps = 0;
  std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Videos assigned to validation, chosen by group with a seeded shuffle.
/// Returns {train indices, validation indices}, both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    const std::vector<VideoSample>& data, double fraction, Rng& rng);

/// Joint training of extractor, temporal net and lipreading head with
/// softmax cross entropy.
TrainResult pretrain_lipreading(const std::vector<LipreadingSample>& data, nn::Model& model,
                                const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Binary forgery training with a fresh forgery head. frozen: extractor
/// and temporal net start from `pretrained`, the extractor is fixed and
/// runs on running statistics. ft_whole: same start, everything trains.
/// scratch: `pretrained` is ignored and all weights are re-initialized.
TrainResult finetune_forgery(const std::vector<ForgerySample>& data, nn::Model& model, const TensorMap& pretrained,
                             FinetuneMode mode, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Non-overlapping clip windows starting at 0, T, 2T, ...; a video shorter
/// than T yields none.
std::vector<std::int64_t> clip_starts(std::int64_t frames, std::int64_t clip_length, std::int64_t stride);

/// Frames [start, start + length) of a [F, ...] tensor.
Tensor slice_frames(const Tensor& frames, std::int64_t start, std::int64_t length);

}  // namespace mouthtrace::training
