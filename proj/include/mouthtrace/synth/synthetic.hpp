#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mouthtrace/image.hpp"
#include "mouthtrace/preprocess/geometry.hpp"

namespace mouthtrace::synth {

enum class ArtefactFamily { jitter, shape_flicker, incomplete_close };

ArtefactFamily parse_family(const std::string& name);
const char* family_name(ArtefactFamily family);

struct SynthConfig {
  int num_videos = 100;
  int frames_per_video = 40;
  int vocab = 4;
  ArtefactFamily family = ArtefactFamily::jitter;
  double strength = 1.0;
  std::uint64_t seed = 0;
  int image_size = 128;
  double noise_sigma = 3.0;  // per-pixel appearance noise std, 0..255 scale
  double test_fraction = 0.2;

  void validate() const;
};

struct SynthVideo {
  std::string id;
  std::string source;  // shared by a fake and the real video it was made from
  int label = 0;       // word index for lipreading; 0 real / 1 fake for forgery
  std::string method;
  std::vector<Image> frames;
  preprocess::LandmarkTrack landmarks;
  std::vector<double> aperture;  // rendered mouth opening per frame (canonical px)
};

/// Word classes differ only in the frequency of the mouth-opening cycle; the
/// phase is random per video, so single frames carry no class information.
std::vector<SynthVideo> gen_lipreading(const SynthConfig& config);

/// num_videos / 2 sources, each rendered once as real and once with the
/// artefact applied to its mouth trajectory. Pose, texture, noise and
/// landmark jitter are shared within a pair, so strength 0 gives identical
/// real and fake videos.
std::vector<SynthVideo> gen_forgery(const SynthConfig& config);

/// Split by source: a seeded test_fraction of sources goes to "test", the
/// rest to "train". Returned per video, in input order.
std::vector<std::string> assign_splits(const std::vector<SynthVideo>& videos, double test_fraction,
                                       std::uint64_t seed);

/// Frames as PNG under <out>/frames/<id>/, landmarks as <out>/landmarks/<id>.json
/// and one manifest.jsonl with relative paths.
void write_corpus(const std::vector<SynthVideo>& videos, const std::vector<std::string>& splits,
                  const std::string& dataset, const std::filesystem::path& out_dir, bool lipreading);

}  // namespace mouthtrace::synth
