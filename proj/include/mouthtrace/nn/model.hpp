#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mouthtrace/nn/ops.hpp"
#include "mouthtrace/nn/params.hpp"

namespace mouthtrace::nn {

/// Spatio-temporal front-end followed by a per-frame ResNet-18 trunk.
struct ExtractorConfig {
  std::int64_t frontend_channels = 64;
  std::array<std::int64_t, 3> frontend_kernel{5, 7, 7};  // (T, H, W)
  std::vector<std::int64_t> stage_channels{64, 128, 256, 512};
  std::int64_t blocks_per_stage = 2;
};

/// Multi-scale temporal convolutional network.
struct TcnConfig {
  std::int64_t blocks = 4;
  std::vector<std::int64_t> kernels{3, 5, 7};
  std::int64_t branch_width = 256;
  float dropout = 0.2f;
};

struct ModelConfig {
  std::int64_t clip_length = 25;
  std::int64_t input_size = 88;
  ExtractorConfig extractor;
  TcnConfig tcn;
  std::int64_t lipread_classes = 500;
  // Grayscale in [0,1] is standardized with these before the first layer.
  float input_mean = 0.421f;
  float input_std = 0.165f;

  std::int64_t embedding_dim() const { return extractor.stage_channels.back(); }
  std::int64_t tcn_width() const {
    return tcn.branch_width * static_cast<std::int64_t>(tcn.kernels.size());
  }

  /// Full-width defaults (512-D embeddings, 768-wide MS-TCN, 500 words).
  static ModelConfig full();
  /// Narrow widths for CPU-scale experiments and tests.
  static ModelConfig desk();

  void validate() const;
};

enum class Head { lipread, forgery };

enum class Mode { eval, train };

struct ForwardOptions {
  Head head = Head::forgery;
  Mode extractor_mode = Mode::eval;
  Mode tcn_mode = Mode::eval;
  /// Record the graph for backward(); leaves of frozen partitions still get
  /// no gradient.
  bool record = false;
  Rng* dropout_rng = nullptr;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  /// Re-draws one partition from the initializer (e.g. a fresh forgery head).
  void reinitialize(Partition p, std::uint64_t seed);

  // Batched graph building blocks.
  /// clips [N, T, H, W, 1] in [0,1] -> embeddings [N, T, D].
  Var extract(ParamBinder& bind, const Var& clips, Mode mode);
  /// embeddings [N, T, D] -> features [N, C_out, T].
  Var temporal(ParamBinder& bind, const Var& embeddings, Mode mode, Rng* dropout_rng);
  /// features [N, C_out, T] -> logits [N, classes]; temporal mean then affine.
  Var head(ParamBinder& bind, const Var& features, Head head);

  /// Whole network, logits [N, classes].
  Var forward(ParamBinder& bind, const Tensor& clips, const ForwardOptions& options);

  /// Eval-mode logits for a batch of clips [N, T, H, W, 1], no graph. Reads
  /// the store only, so concurrent calls are safe.
  Tensor predict(const Tensor& clips, Head head = Head::forgery) const;

  // Single-clip conveniences.
  /// clip [T, H, W, 1] -> [T, D].
  Tensor feature_extract(const Tensor& clip, Mode mode = Mode::eval);
  /// embeddings [T, D] -> [T, C_out].
  Tensor mstcn_forward(const Tensor& embeddings, Mode mode = Mode::eval, Rng* dropout_rng = nullptr);
  /// features [T, C_out] -> logits [classes].
  Tensor classify(const Tensor& features, Head head);

 private:
  void build();
  Var basic_block(ParamBinder& bind, const std::string& prefix, const Var& x, std::int64_t in_ch, std::int64_t out_ch,
                  std::int64_t stride, Mode mode);
  Var bn(ParamBinder& bind, const std::string& prefix, const Var& x, Mode mode);

  ModelConfig config_;
  std::uint64_t init_seed_;
  ParameterStore store_;
};

}  // namespace mouthtrace::nn
