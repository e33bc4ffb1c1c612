#include "mouthtrace/nn/model.hpp"

#include <cmath>

namespace mouthtrace::nn {

namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string pname(Partition p, const std::string& path) { return std::string(partition_prefix(p)) + "/" + path; }

const std::string kExtractor = "extractor/";
const std::string kTcn = "tcn/";

}  // namespace

ModelConfig ModelConfig::full() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.extractor.frontend_channels = 8;
  c.extractor.stage_channels = {8, 16, 24, 32};
  c.tcn.branch_width = 8;
  c.lipread_classes = 4;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](std::int64_t v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(clip_length, "clipLength");
  positive(input_size, "inputSize");
  positive(extractor.frontend_channels, "extractor.frontendChannels");
  positive(extractor.blocks_per_stage, "extractor.blocksPerStage");
  if (extractor.stage_channels.empty()) throw ConfigError("extractor.stageChannels must not be empty");
  for (auto c : extractor.stage_channels) positive(c, "extractor.stageChannels");
  for (auto k : extractor.frontend_kernel) {
    positive(k, "extractor.frontendKernel");
    if (k % 2 == 0) throw ConfigError("extractor.frontendKernel entries must be odd");
  }
  positive(tcn.blocks, "tcn.blocks");
  positive(tcn.branch_width, "tcn.branchWidth");
  if (tcn.kernels.empty()) throw ConfigError("tcn.kernels must not be empty");
  for (auto k : tcn.kernels)
    if (k < 1 || k % 2 == 0) throw ConfigError("tcn.kernels must be odd and positive");
  if (tcn.dropout < 0.0f || tcn.dropout >= 1.0f) throw ConfigError("tcn.dropout must be in [0,1)");
  positive(lipread_classes, "lipreadClasses");
  if (!(input_std > 0.0f)) throw ConfigError("inputStd must be positive");
}

Model::Model(const ModelConfig& config, std::uint64_t init_seed) : config_(config), init_seed_(init_seed) {
  config_.validate();
  build();
}

void Model::build() {
  const auto& ex = config_.extractor;
  auto conv_w = [&](const std::string& name, Shape shape) { store_.add_parameter(name, Tensor(std::move(shape))); };
  auto bn_params = [&](const std::string& prefix, std::int64_t c) {
    store_.add_parameter(prefix + ".gamma", Tensor(Shape{c}, 1.0f));
    store_.add_parameter(prefix + ".beta", Tensor(Shape{c}, 0.0f));
    store_.add_buffer(prefix + ".running_mean", Tensor(Shape{c}, 0.0f));
    store_.add_buffer(prefix + ".running_var", Tensor(Shape{c}, 1.0f));
  };

  // Front-end.
  const std::int64_t F = ex.frontend_channels;
  conv_w(kExtractor + "frontend.conv.weight",
         Shape{F, 1, ex.frontend_kernel[0], ex.frontend_kernel[1], ex.frontend_kernel[2]});
  bn_params(kExtractor + "frontend.bn", F);

  // ResNet trunk.
  std::int64_t in_ch = F;
  for (std::size_t s = 0; s < ex.stage_channels.size(); ++s) {
    const std::int64_t out_ch = ex.stage_channels[s];
    for (std::int64_t b = 0; b < ex.blocks_per_stage; ++b) {
      const std::int64_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string pre = kExtractor + "layer" + std::to_string(s + 1) + "." + std::to_string(b);
      conv_w(pre + ".conv1.weight", Shape{out_ch, in_ch, 3, 3});
      bn_params(pre + ".bn1", out_ch);
      conv_w(pre + ".conv2.weight", Shape{out_ch, out_ch, 3, 3});
      bn_params(pre + ".bn2", out_ch);
      if (stride != 1 || in_ch != out_ch) {
        conv_w(pre + ".downsample.conv.weight", Shape{out_ch, in_ch, 1, 1});
        bn_params(pre + ".downsample.bn", out_ch);
      }
      in_ch = out_ch;
    }
  }

  // MS-TCN.
  const auto& tc = config_.tcn;
  const std::int64_t W = tc.branch_width;
  std::int64_t tin = config_.embedding_dim();
  for (std::int64_t blk = 0; blk < tc.blocks; ++blk) {
    const std::string pre = kTcn + "block" + std::to_string(blk);
    for (std::size_t br = 0; br < tc.kernels.size(); ++br) {
      const std::string bpre = pre + ".branch" + std::to_string(br);
      const std::int64_t k = tc.kernels[br];
      conv_w(bpre + ".conv0.weight", Shape{W, tin, k});
      bn_params(bpre + ".bn0", W);
      store_.add_parameter(bpre + ".prelu.slope", Tensor(Shape{W}, 0.25f));
      conv_w(bpre + ".conv1.weight", Shape{W, W, k});
      bn_params(bpre + ".bn1", W);
    }
    const std::int64_t tout = config_.tcn_width();
    if (tin != tout) {
      conv_w(pre + ".downsample.weight", Shape{tout, tin, 1});
      store_.add_parameter(pre + ".downsample.bias", Tensor(Shape{tout}, 0.0f));
    }
    store_.add_parameter(pre + ".prelu.slope", Tensor(Shape{tout}, 0.25f));
    tin = tout;
  }

  // Heads.
  store_.add_parameter(pname(Partition::lipread_head, "linear.weight"), Tensor(Shape{config_.lipread_classes, tin}));
  store_.add_parameter(pname(Partition::lipread_head, "linear.bias"), Tensor(Shape{config_.lipread_classes}));
  store_.add_parameter(pname(Partition::forgery_head, "linear.weight"), Tensor(Shape{1, tin}));
  store_.add_parameter(pname(Partition::forgery_head, "linear.bias"), Tensor(Shape{1}));

  for (auto p : kAllPartitions) reinitialize(p, init_seed_);
}

void Model::reinitialize(Partition p, std::uint64_t seed) {
  const Rng base(seed);
  for (const auto& [name, entry] : store_.entries()) {
    if (entry.partition != p) continue;
    Tensor& t = store_.get(name);
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".weight")) {
      // Kaiming-uniform over fan-in with ReLU gain: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
      const std::int64_t fan_in = t.numel() / t.dim(0);
      const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
      Rng rng = base.substream(name_hash(name));
      for (auto& v : t.data()) v = (2.0f * rng.uniform_float() - 1.0f) * bound;
    } else if (ends_with(".gamma") || ends_with(".running_var")) {
      t = Tensor(t.shape(), 1.0f);
    } else if (ends_with(".slope")) {
      t = Tensor(t.shape(), 0.25f);
    } else {
      t = Tensor(t.shape(), 0.0f);
    }
  }
}

Var Model::bn(ParamBinder& bind, const std::string& prefix, const Var& x, Mode mode) {
  return batch_norm(x, bind(prefix + ".gamma"), bind(prefix + ".beta"), bind.buffer(prefix + ".running_mean"),
                    bind.buffer(prefix + ".running_var"), mode == Mode::train);
}

Var Model::basic_block(ParamBinder& bind, const std::string& prefix, const Var& x, std::int64_t in_ch,
                       std::int64_t out_ch, std::int64_t stride, Mode mode) {
  ConvOptions c1{.stride = {stride}, .padding = {1}};
  ConvOptions c2{.padding = {1}};
  Var y = conv(x, bind(prefix + ".conv1.weight"), std::nullopt, c1);
  y = relu(bn(bind, prefix + ".bn1", y, mode));
  y = conv(y, bind(prefix + ".conv2.weight"), std::nullopt, c2);
  y = bn(bind, prefix + ".bn2", y, mode);
  Var shortcut = x;
  if (stride != 1 || in_ch != out_ch) {
    shortcut = conv(x, bind(prefix + ".downsample.conv.weight"), std::nullopt, ConvOptions{.stride = {stride}});
    shortcut = bn(bind, prefix + ".downsample.bn", shortcut, mode);
  }
  return relu(add(y, shortcut));
}

Var Model::extract(ParamBinder& bind, const Var& clips, Mode mode) {
  const Shape& s = clips.shape();
  if (s.size() != 5 || s[4] != 1 || s[2] != config_.input_size || s[3] != config_.input_size || s[1] < 1) {
    throw ShapeError("extractor expects clips [N, T, " + std::to_string(config_.input_size) + ", " +
                     std::to_string(config_.input_size) + ", 1], got " + shape_string(s));
  }
  const std::int64_t N = s[0], T = s[1];
  const auto& ex = config_.extractor;

  Tensor normalized = clips.value().reshaped(Shape{N, 1, T, s[2], s[3]});
  const float inv_std = 1.0f / config_.input_std;
  for (auto& v : normalized.data()) v = (v - config_.input_mean) * inv_std;
  Var x = make_result(std::move(normalized), {clips},
      [inv_std](const Tensor& dy, const std::vector<std::shared_ptr<Node>>& parents) {
        parents[0]->accumulate(scale(dy, inv_std).reshaped(parents[0]->value.shape()));
      },
      "normalize");

  const auto& k = ex.frontend_kernel;
  ConvOptions front{.stride = {1, 2, 2}, .padding = {k[0] / 2, k[1] / 2, k[2] / 2}};
  x = conv(x, bind(kExtractor + "frontend.conv.weight"), std::nullopt, front);
  x = relu(bn(bind, kExtractor + "frontend.bn", x, mode));
  x = max_pool(x, {1, 3, 3}, {1, 2, 2}, {0, 1, 1});

  // Fold time into the batch: [N, F, T, H, W] -> [N*T, F, H, W].
  const Shape fs = x.shape();
  x = permute(x, {0, 2, 1, 3, 4});
  x = reshape(x, Shape{N * T, fs[1], fs[3], fs[4]});

  std::int64_t in_ch = ex.frontend_channels;
  for (std::size_t st = 0; st < ex.stage_channels.size(); ++st) {
    for (std::int64_t b = 0; b < ex.blocks_per_stage; ++b) {
      const std::int64_t stride = (st > 0 && b == 0) ? 2 : 1;
      const std::string pre = kExtractor + "layer" + std::to_string(st + 1) + "." + std::to_string(b);
      x = basic_block(bind, pre, x, in_ch, ex.stage_channels[st], stride, mode);
      in_ch = ex.stage_channels[st];
    }
  }
  x = global_avg_pool_spatial(x);
  return reshape(x, Shape{N, T, in_ch});
}

Var Model::temporal(ParamBinder& bind, const Var& embeddings, Mode mode, Rng* dropout_rng) {
  const Shape& s = embeddings.shape();
  if (s.size() != 3 || s[2] != config_.embedding_dim() || s[1] < 1) {
    throw ShapeError("temporal net expects [N, T, " + std::to_string(config_.embedding_dim()) + "], got " +
                     shape_string(s));
  }
  const auto& tc = config_.tcn;
  const bool train = mode == Mode::train;
  Var x = permute(embeddings, {0, 2, 1});
  std::int64_t tin = config_.embedding_dim();
  for (std::int64_t blk = 0; blk < tc.blocks; ++blk) {
    const std::string pre = kTcn + "block" + std::to_string(blk);
    const std::int64_t dilation = std::int64_t{1} << blk;
    std::vector<Var> branches;
    for (std::size_t br = 0; br < tc.kernels.size(); ++br) {
      const std::string bpre = pre + ".branch" + std::to_string(br);
      ConvOptions same{.dilation = {dilation}, .same = true};
      Var y = conv(x, bind(bpre + ".conv0.weight"), std::nullopt, same);
      y = bn(bind, bpre + ".bn0", y, mode);
      y = prelu(y, bind(bpre + ".prelu.slope"));
      y = dropout(y, tc.dropout, train, dropout_rng);
      y = conv(y, bind(bpre + ".conv1.weight"), std::nullopt, same);
      y = bn(bind, bpre + ".bn1", y, mode);
      branches.push_back(y);
    }
    Var merged = concat(branches, 1);
    Var residual = x;
    if (tin != config_.tcn_width()) {
      residual = conv(x, bind(pre + ".downsample.weight"), bind(pre + ".downsample.bias"), ConvOptions{});
    }
    x = prelu(add(merged, residual), bind(pre + ".prelu.slope"));
    tin = config_.tcn_width();
  }
  return x;
}

Var Model::head(ParamBinder& bind, const Var& features, Head which) {
  const Shape& s = features.shape();
  if (s.size() != 3 || s[1] != config_.tcn_width()) {
    throw ShapeError("classifier expects [N, " + std::to_string(config_.tcn_width()) + ", T], got " +
                     shape_string(s));
  }
  const Partition p = which == Head::forgery ? Partition::forgery_head : Partition::lipread_head;
  Var pooled = mean_axis(features, 2);
  return linear(pooled, bind(pname(p, "linear.weight")), bind(pname(p, "linear.bias")));
}

Var Model::forward(ParamBinder& bind, const Tensor& clips, const ForwardOptions& options) {
  Var x = extract(bind, Var::constant(clips), options.extractor_mode);
  x = temporal(bind, x, options.tcn_mode, options.dropout_rng);
  return head(bind, x, options.head);
}

Tensor Model::predict(const Tensor& clips, Head which) const {
  // Eval mode never writes to the store.
  auto& self = const_cast<Model&>(*this);
  ParamBinder bind(self.store_, false);
  return self.forward(bind, clips, ForwardOptions{.head = which}).value();
}

Tensor Model::feature_extract(const Tensor& clip, Mode mode) {
  const Shape& s = clip.shape();
  if (s.size() != 4) throw ShapeError("feature_extract expects a clip [T, H, W, 1], got " + shape_string(s));
  ParamBinder bind(store_, false);
  Var out = extract(bind, Var::constant(clip.reshaped(Shape{1, s[0], s[1], s[2], s[3]})), mode);
  return out.value().reshaped(Shape{s[0], config_.embedding_dim()});
}

Tensor Model::mstcn_forward(const Tensor& embeddings, Mode mode, Rng* dropout_rng) {
  const Shape& s = embeddings.shape();
  if (s.size() != 2) throw ShapeError("mstcn_forward expects [T, D], got " + shape_string(s));
  ParamBinder bind(store_, false);
  Var out = temporal(bind, Var::constant(embeddings.reshaped(Shape{1, s[0], s[1]})), mode, dropout_rng);
  return permute_tensor(out.value(), {0, 2, 1}).reshaped(Shape{s[0], config_.tcn_width()});
}

Tensor Model::classify(const Tensor& features, Head which) {
  const Shape& s = features.shape();
  if (s.size() != 2) throw ShapeError("classify expects [T, C], got " + shape_string(s));
  ParamBinder bind(store_, false);
  Var in = Var::constant(permute_tensor(features.reshaped(Shape{1, s[0], s[1]}), {0, 2, 1}));
  Var out = head(bind, in, which);
  return out.value().reshaped(Shape{out.shape()[1]});
}

}  // namespace mouthtrace::nn
