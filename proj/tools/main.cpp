#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mouthtrace/error.hpp"
#include "mouthtrace/parallel.hpp"

namespace {

using namespace mouthtrace;
namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

/// Flag values that override the config file when given.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode, family, task, finetune, protocol;
  std::optional<int> num_videos, frames, vocab, epochs, smoothing_window;
  std::optional<double> strength, lr, test_fraction;
  std::optional<std::int64_t> steps, batch_size, clip_length, stride;
  std::vector<std::string> held_out;
};

RunConfig resolve(const std::string& config_path, int threads, const Overrides& o) {
  RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (o.seed) c.seed = o.seed;
  if (c.seed) {
    c.synth.config.seed = *c.seed;
    c.train.config.seed = *c.seed;
  }
  if (threads > 0) c.threads = threads;
  if (o.mode) c.synth.mode = *o.mode;
  if (o.family) c.synth.config.family = synth::parse_family(*o.family);
  if (o.num_videos) c.synth.config.num_videos = *o.num_videos;
  if (o.frames) c.synth.config.frames_per_video = *o.frames;
  if (o.vocab) c.synth.config.vocab = *o.vocab;
  if (o.strength) c.synth.config.strength = *o.strength;
  if (o.test_fraction) c.synth.config.test_fraction = *o.test_fraction;
  if (o.clip_length) {
    c.preprocess.clip_length = *o.clip_length;
    c.eval.score.clip_length = *o.clip_length;
  }
  if (o.stride) {
    c.preprocess.stride = *o.stride;
    c.eval.score.stride = *o.stride;
  }
  if (o.smoothing_window) c.preprocess.options.smoothing_window = *o.smoothing_window;
  if (o.task) c.train.task = *o.task;
  if (o.finetune) c.train.finetune = training::parse_finetune_mode(*o.finetune);
  if (o.epochs) c.train.config.max_epochs = *o.epochs;
  if (o.steps) c.train.config.max_steps = *o.steps;
  if (o.batch_size) c.train.config.batch_size = *o.batch_size;
  if (o.lr) c.train.config.adam.learning_rate = static_cast<float>(*o.lr);
  if (o.protocol) c.eval.protocol = *o.protocol;
  if (!o.held_out.empty()) c.eval.held_out = o.held_out;
  // Re-validate the merged result through the same checks as a file.
  c = parse_run_config(nlohmann::json::object(), c);
  set_num_threads(c.threads);
  std::cerr << "config " << to_json(c).dump() << "\n";
  return c;
}

void add_seed(CLI::App* app, Overrides& o) { app->add_option("--seed", o.seed, "Random seed"); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lip-movement forgery detection: synthetic data, preprocessing, training and evaluation"};
  app.require_subcommand(1);
  std::string config_path;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config (camelCase sections); flags override it")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  Overrides o;

  fs::path synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  add_seed(synth, o);
  synth->add_option("--mode", o.mode, "lipreading | forgery");
  synth->add_option("--num-videos", o.num_videos, "Number of videos");
  synth->add_option("--frames", o.frames, "Frames per video");
  synth->add_option("--vocab", o.vocab, "Lipreading classes");
  synth->add_option("--family", o.family, "jitter | shape_flicker | incomplete_close");
  synth->add_option("--strength", o.strength, "Artefact strength");
  synth->add_option("--test-fraction", o.test_fraction, "Fraction of sources in the test split");

  fs::path pre_manifest, pre_out;
  auto* pre = app.add_subcommand("preprocess", "Align, crop and cache clips");
  pre->add_option("--manifest", pre_manifest, "Input manifest.jsonl")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--clip-length", o.clip_length, "Frames per clip");
  pre->add_option("--stride", o.stride, "Frames between clip starts");
  pre->add_option("--smoothing-window", o.smoothing_window, "Landmark smoothing window");

  cli::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Lipreading pretraining or forgery finetuning");
  train->add_option("--manifest", train_args.manifest, "Preprocessed manifest.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_args.checkpoint, "Checkpoint path")->required();
  add_seed(train, o);
  train->add_option("--task", o.task, "lipreading | forgery");
  train->add_option("--mode", o.finetune, "frozen | ft_whole | scratch");
  train->add_option("--pretrained", train_args.pretrained, "Lipreading checkpoint")->check(CLI::ExistingFile);
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--steps", o.steps, "Maximum optimizer steps (0 = unlimited)");
  train->add_option("--batch-size", o.batch_size, "Clips per step");
  train->add_option("--lr", o.lr, "Adam learning rate");
  train->add_option("--log", train_args.log, "JSON-lines epoch log");

  cli::EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "Score the test split under a protocol");
  ev->add_option("--checkpoint", eval_args.checkpoint, "Forgery checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--pretrained", eval_args.pretrained, "Lipreading checkpoint (cross-manipulation)")
      ->check(CLI::ExistingFile);
  ev->add_option("--manifest", eval_args.manifest, "Preprocessed manifest.jsonl")->required()->check(CLI::ExistingFile);
  ev->add_option("--protocol", o.protocol, "plain | cross-manipulation | robustness | clip-sweep | frame-probe");
  ev->add_option("--out", eval_args.out, "Report JSON")->required();
  ev->add_option("--clip-length", o.clip_length, "Frames per scored clip");
  ev->add_option("--stride", o.stride, "Frames between scored clips");
  ev->add_option("--held-out", o.held_out, "Held-out methods (cross-manipulation)");
  ev->add_option("--mode", o.finetune, "Finetune mode for cross-manipulation training");
  ev->add_option("--epochs", o.epochs, "Maximum epochs for cross-manipulation training");
  add_seed(ev, o);

  cli::CorruptArgs corrupt_args;
  auto* corrupt = app.add_subcommand("corrupt", "Apply one corruption to a frame directory");
  corrupt->add_option("--kind", corrupt_args.kind,
                      "saturation | contrast | block | noise | blur | pixelation | compression")
      ->required();
  corrupt->add_option("--severity", corrupt_args.severity, "1..5")->required();
  corrupt->add_option("--seed", corrupt_args.seed, "Random seed")->required();
  corrupt->add_option("--in", corrupt_args.in, "Input frame directory")->required()->check(CLI::ExistingDirectory);
  corrupt->add_option("--out", corrupt_args.out, "Output frame directory")->required();

  cli::OccludeArgs occ_args;
  auto* occ = app.add_subcommand("occlude", "Occlusion sensitivity heatmap for one clip");
  occ->add_option("--checkpoint", occ_args.checkpoint, "Forgery checkpoint")->required()->check(CLI::ExistingFile);
  occ->add_option("--clip", occ_args.clips, "Clip cache (.lfw)")->required()->check(CLI::ExistingFile);
  occ->add_option("--index", occ_args.index, "Clip index in the cache");
  occ->add_option("--label", occ_args.label, "Class whose probability is mapped (1 fake, 0 real)");
  occ->add_option("--block", occ_args.block, "Occluder side in pixels");
  occ->add_option("--out", occ_args.out, "Heatmap .pgm")->required();
  occ->add_option("--overlay", occ_args.overlay, "Overlay .png");

  int gc_instances = 20;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-3;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  gc->add_option("--instances", gc_instances, "Random instances per layer");
  gc->add_option("--seed", gc_seed, "Random seed");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");

  auto* params = app.add_subcommand("params", "Trainable parameters per partition");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gc) return cli::run_gradcheck(gc_instances, gc_seed, gc_tol);
    if (*corrupt) return cli::run_corrupt(corrupt_args);
    if (*occ) return cli::run_occlude(occ_args);
    const RunConfig config = resolve(config_path, threads, o);
    if (*synth) return cli::run_synth(config, synth_out);
    if (*pre) return cli::run_preprocess(config, pre_manifest, pre_out);
    if (*train) return cli::run_train(config, train_args);
    if (*ev) return cli::run_eval(config, eval_args);
    if (*params) return cli::run_params(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
