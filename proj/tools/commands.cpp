#include "commands.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

#include "mouthtrace/checkpoint.hpp"
#include "mouthtrace/corruptions/corruptions.hpp"
#include "mouthtrace/eval/occlusion.hpp"
#include "mouthtrace/eval/probe.hpp"
#include "mouthtrace/eval/protocols.hpp"
#include "mouthtrace/gradcheck.hpp"
#include "mouthtrace/preprocess/pipeline.hpp"
#include "mouthtrace/synth/synthetic.hpp"
#include "mouthtrace/training/sampling.hpp"
#include "mouthtrace/training/trainer.hpp"

namespace mouthtrace::cli {

using json = nlohmann::json;
using preprocess::Manifest;
using preprocess::ManifestEntry;
using training::VideoSample;

namespace {

std::uint64_t require_seed(const RunConfig& config) {
  if (!config.seed) throw ConfigError("a seed is required (--seed or \"seed\" in the config)");
  return *config.seed;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

bool in_splits(const ManifestEntry& e, std::initializer_list<const char*> splits) {
  for (const char* s : splits)
    if (e.split == s) return true;
  return false;
}

/// Preprocessed videos of the given splits. Lipreading samples take their
/// label from the word index.
std::vector<VideoSample> load_samples(const Manifest& manifest, std::initializer_list<const char*> splits,
                                      bool lipreading) {
  std::vector<VideoSample> out;
  for (const auto& e : manifest.entries) {
    if (!in_splits(e, splits)) continue;
    if (e.clips_path.empty())
      throw DataError("manifest entry " + e.video_id + " has no clipsPath; run `mouthtrace preprocess` first");
    VideoSample s;
    s.id = e.video_id;
    s.group = e.source;
    s.frames = preprocess::load_cached_frames(manifest.resolve(e.clips_path));
    s.method = e.method;
    if (lipreading) {
      if (!e.word) throw DataError("manifest entry " + e.video_id + " has no word label");
      s.label = *e.word;
    } else {
      s.label = e.label;
    }
    out.push_back(std::move(s));
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_sidecar(const fs::path& checkpoint, const RunConfig& config, const std::string& task) {
  json j{{"task", task}, {"model", model_to_json(config.model)}, {"config", to_json(config)}};
  std::ofstream out(sidecar_path(checkpoint));
  if (!out) throw DataError("cannot write " + sidecar_path(checkpoint).string());
  out << j.dump(2) << "\n";
}

nn::ModelConfig sidecar_model(const fs::path& checkpoint) {
  const fs::path side = sidecar_path(checkpoint);
  if (!fs::exists(side)) throw DataError("missing checkpoint config " + side.string());
  const json j = read_json_file(side);
  if (!j.contains("model")) throw FormatError(side.string() + ": no \"model\" entry");
  return model_from_json(j["model"]);
}

/// Model with the architecture from the checkpoint sidecar and every
/// partition loaded from the checkpoint.
std::shared_ptr<nn::Model> load_model(const fs::path& checkpoint) {
  auto model = std::make_shared<nn::Model>(sidecar_model(checkpoint), 0);
  const TensorMap weights = load_tensors(checkpoint);
  model->params().load(weights, {nn::kAllPartitions.begin(), nn::kAllPartitions.end()});
  return model;
}

std::uint64_t init_seed(std::uint64_t seed) { return Rng(seed).substream(0x6d6f64656cULL, 0).next_u64(); }

void log_epoch(std::ostream& log, const training::EpochLog& e) {
  json j{{"epoch", e.epoch},     {"trainLoss", e.train_loss}, {"valLoss", e.val_loss},
         {"trainAccuracy", e.train_accuracy}, {"lr", e.lr}, {"seconds", e.seconds}};
  log << j.dump() << "\n";
  log.flush();
  std::cerr << "epoch " << e.epoch << "  train loss " << std::fixed << std::setprecision(4) << e.train_loss
            << "  val loss " << e.val_loss << "  train acc " << e.train_accuracy << "  " << std::setprecision(1)
            << e.seconds << " s\n";
  std::cerr.unsetf(std::ios::floatfield);
}

std::vector<eval::RawVideo> load_raw(const Manifest& manifest, const char* split) {
  std::vector<eval::RawVideo> out;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    eval::RawVideo v;
    v.id = e.video_id;
    v.label = e.label;
    v.method = e.method;
    v.frames = preprocess::read_frames(manifest.resolve(e.frames_path));
    v.landmarks = preprocess::read_landmarks(manifest.resolve(e.landmarks_path));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

fs::path sidecar_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".config.json"); }

int run_synth(const RunConfig& config, const fs::path& out) {
  synth::SynthConfig sc = config.synth.config;
  sc.seed = require_seed(config);
  const bool lipreading = config.synth.mode == "lipreading";
  const auto videos = lipreading ? synth::gen_lipreading(sc) : synth::gen_forgery(sc);
  const auto splits = synth::assign_splits(videos, sc.test_fraction, sc.seed);
  synth::write_corpus(videos, splits, config.synth.dataset, out, lipreading);
  std::cerr << "wrote " << videos.size() << " videos to " << (out / "manifest.jsonl").string() << "\n";
  return kExitOk;
}

int run_preprocess(const RunConfig& config, const fs::path& manifest_path, const fs::path& out) {
  const Manifest manifest = preprocess::read_manifest(manifest_path);
  fs::create_directories(out);
  const Manifest done = preprocess::preprocess_manifest(manifest, out, config.preprocess);
  preprocess::write_manifest(out / "manifest.jsonl", done);
  std::cerr << "preprocessed " << done.entries.size() << " videos into " << out.string() << "\n";
  return kExitOk;
}

int run_train(const RunConfig& config_in, const TrainArgs& args) {
  RunConfig config = config_in;
  const std::uint64_t seed = require_seed(config);
  config.train.config.seed = seed;
  const Manifest manifest = preprocess::read_manifest(args.manifest, false);
  const bool lipreading = config.train.task == "lipreading";
  // Train and val entries both go to the trainer, which holds out its own
  // validation videos by group.
  const auto data = load_samples(manifest, {"train", "val"}, lipreading);
  if (data.empty()) throw DataError("no train/val videos in " + args.manifest.string());

  ensure_parent(args.checkpoint);
  const fs::path log_path = args.log.empty() ? fs::path(args.checkpoint.string() + ".log.jsonl") : args.log;
  ensure_parent(log_path);
  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write " + log_path.string());
  const auto on_epoch = [&log](const training::EpochLog& e) { log_epoch(log, e); };

  training::TrainResult result;
  std::unique_ptr<nn::Model> model;
  if (lipreading) {
    model = std::make_unique<nn::Model>(config.model, init_seed(seed));
    result = training::pretrain_lipreading(data, *model, config.train.config, on_epoch);
  } else {
    TensorMap pretrained;
    if (config.train.finetune != training::FinetuneMode::scratch) {
      if (args.pretrained.empty())
        throw ConfigError("--pretrained is required for finetune mode " +
                          std::string(training::finetune_mode_name(config.train.finetune)));
      config.model = sidecar_model(args.pretrained);
      pretrained = load_tensors(args.pretrained);
    }
    model = std::make_unique<nn::Model>(config.model, init_seed(seed));
    result = training::finetune_forgery(data, *model, pretrained, config.train.finetune, config.train.config, on_epoch);
  }
  save_tensors(args.checkpoint, model->params().to_map());
  write_sidecar(args.checkpoint, config, config.train.task);
  std::cerr << "best epoch " << result.best_epoch << " after " << result.steps << " steps; saved "
            << args.checkpoint.string() << "\n";
  return kExitOk;
}

int run_eval(const RunConfig& config, const EvalArgs& args) {
  const Manifest manifest = preprocess::read_manifest(args.manifest, false);
  const auto& ev = config.eval;
  const std::string& protocol = ev.protocol;
  json report;
  if (protocol == "frame-probe") {
    const auto train = load_samples(manifest, {"train", "val"}, false);
    const auto test = load_samples(manifest, {"test"}, false);
    report = eval::to_json(eval::run_frame_probe(train, test, ev.probe));
  } else if (protocol == "cross-manipulation") {
    const auto train = load_samples(manifest, {"train", "val"}, false);
    const auto test = load_samples(manifest, {"test"}, false);
    RunConfig tc = config;
    tc.train.config.seed = require_seed(config);
    TensorMap pretrained;
    if (tc.train.finetune != training::FinetuneMode::scratch) {
      if (args.pretrained.empty()) throw ConfigError("cross-manipulation needs --pretrained weights");
      tc.model = sidecar_model(args.pretrained);
      pretrained = load_tensors(args.pretrained);
    }
    const eval::TrainFn trainer = [&](const std::vector<VideoSample>& subset) {
      auto model = std::make_shared<nn::Model>(tc.model, init_seed(tc.train.config.seed));
      training::finetune_forgery(subset, *model, pretrained, tc.train.finetune, tc.train.config);
      return model;
    };
    const auto r = eval::protocol_cross_manipulation(train, test, ev.held_out, trainer, ev.score);
    std::cerr << eval::format_table(r);
    report = eval::to_json(r);
  } else {
    if (args.checkpoint.empty()) throw ConfigError("--checkpoint is required for protocol " + protocol);
    const auto model = load_model(args.checkpoint);
    if (protocol == "plain") {
      const auto r = eval::protocol_plain(*model, load_samples(manifest, {"test"}, false), ev.score);
      if (r.auc) std::cerr << "video AUC " << *r.auc << "\n";
      report = eval::to_json(r);
    } else if (protocol == "clip-sweep") {
      const auto rows =
          eval::protocol_clip_sweep(*model, load_samples(manifest, {"test"}, false), ev.sweep_lengths, ev.score.batch_size);
      report = eval::to_json(rows);
    } else if (protocol == "robustness") {
      const auto r = eval::protocol_robustness(*model, load_raw(manifest, "test"), require_seed(config), ev.score,
                                               config.preprocess.options);
      std::cerr << eval::format_table(r);
      report = eval::to_json(r);
    } else {
      throw ConfigError("unknown protocol '" + protocol + "'");
    }
  }
  ensure_parent(args.out);
  eval::write_json(args.out, report);
  std::cerr << "wrote " << args.out.string() << "\n";
  return kExitOk;
}

int run_corrupt(const CorruptArgs& args) {
  corruptions::CorruptionSpec spec;
  spec.kind = corruptions::parse_kind(args.kind);
  spec.severity = args.severity;
  spec.seed = args.seed;
  spec.validate();
  const auto files = list_frames(args.in);
  if (files.empty()) throw DataError("no frames in " + args.in.string());
  std::vector<Image> frames;
  for (const auto& f : files) frames.push_back(read_image(f));
  const auto out = corruptions::apply_corruption(frames, spec);
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < files.size(); ++i) write_image(args.out / files[i].filename(), out[i]);
  std::cerr << "mean frame PSNR " << corruptions::mean_frame_psnr(frames, out) << " dB\n";
  return kExitOk;
}

int run_occlude(const OccludeArgs& args) {
  const auto model = load_model(args.checkpoint);
  const Tensor clips = preprocess::load_cached_clips(args.clips);
  if (args.index < 0 || args.index >= clips.dim(0))
    throw DataError("clip index " + std::to_string(args.index) + " out of range (" + std::to_string(clips.dim(0)) +
                    " clips)");
  const Tensor clip96 = training::slice_frames(clips, args.index, 1)
                           .reshaped({clips.dim(1), clips.dim(2), clips.dim(3), clips.dim(4)});
  Rng unused(0);
  const Tensor clip = training::crop_clip(clip96, training::draw_crop(clips.dim(2), clips.dim(3), unused, false));
  eval::OcclusionOptions opts;
  opts.block = args.block;
  const auto map = eval::occlusion_map(eval::model_probability(*model, args.label), clip, opts);
  ensure_parent(args.out);
  eval::write_heatmap_pgm(args.out, map);
  fs::path overlay = args.overlay;
  if (overlay.empty()) overlay = args.out.parent_path() / (args.out.stem().string() + "_overlay.png");
  write_image(overlay, eval::heatmap_overlay(map, clip));
  std::cerr << map.forwards << " occluded forwards; wrote " << args.out.string() << " and " << overlay.string()
            << "\n";
  return kExitOk;
}

int run_gradcheck(int instances, std::uint64_t seed, double tolerance) {
  const auto reports = gradcheck::run_layer_checks(instances, seed, tolerance);
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << std::left << std::setw(24) << r.layer << std::right << std::setw(4) << r.instances << "  "
              << std::scientific << std::setprecision(3) << r.worst_relative_error << "  "
              << (r.passed ? "PASS" : "FAIL") << "\n";
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int run_params(const RunConfig& config) {
  const nn::Model model(config.model, 0);
  std::int64_t total = 0;
  for (const auto p : nn::kAllPartitions) {
    const auto n = model.params().parameter_count(p);
    total += n;
    std::cout << std::left << std::setw(16) << nn::partition_prefix(p) << std::right << std::setw(12) << n << "\n";
  }
  std::cout << std::left << std::setw(16) << "total" << std::right << std::setw(12) << total << "\n";
  return kExitOk;
}

}  // namespace mouthtrace::cli
