#include "mouthtrace/eval/protocols.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "mouthtrace/rng.hpp"

namespace mouthtrace::eval {

using json = nlohmann::json;
using training::VideoSample;

namespace {

std::vector<VideoScore> score_all(const nn::Model& model, const std::vector<VideoSample>& videos,
                                  const ScoreOptions& options) {
  if (videos.empty()) throw DataError("no videos to evaluate");
  return score_videos(model, videos, options);
}

std::string percent(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

PlainReport protocol_plain(const nn::Model& model, const std::vector<VideoSample>& videos, const ScoreOptions& options) {
  PlainReport r;
  r.options = options;
  r.videos = score_all(model, videos, options);
  std::vector<double> s;
  std::vector<int> y;
  for (const auto& v : r.videos) {
    s.push_back(v.video_score);
    y.push_back(v.label);
  }
  if (std::set<int>(y.begin(), y.end()).size() == 2) r.auc = roc_auc(s, y).auc;
  r.accuracy = accuracy(s, y);
  return r;
}

std::vector<std::string> fake_methods(const std::vector<VideoSample>& train, const std::vector<VideoSample>& test) {
  std::set<std::string> m;
  for (const auto* set : {&train, &test})
    for (const auto& v : *set)
      if (v.label == 1) m.insert(v.method);
  return {m.begin(), m.end()};
}

CrossManipulationReport protocol_cross_manipulation(const std::vector<VideoSample>& train,
                                                    const std::vector<VideoSample>& test,
                                                    const std::vector<std::string>& held_out, const TrainFn& trainer,
                                                    const ScoreOptions& options) {
  const std::vector<std::string> methods = fake_methods(train, test);
  if (methods.size() < 2) throw DataError("cross-manipulation needs at least two fake methods");
  const std::vector<std::string> targets = held_out.empty() ? methods : held_out;
  CrossManipulationReport report;
  double total = 0.0;
  for (const auto& m : targets) {
    std::vector<VideoSample> tr, te;
    for (const auto& v : train)
      if (v.label == 0 || v.method != m) tr.push_back(v);
    bool any_fake = false;
    for (const auto& v : test)
      if (v.label == 0 || v.method == m) {
        te.push_back(v);
        any_fake |= v.label == 1;
      }
    if (!any_fake) throw DataError("held-out method '" + m + "' has no fake test videos");
    const std::shared_ptr<nn::Model> model = trainer(tr);
    CrossManipulationRow row;
    row.held_out = m;
    row.auc = video_auc(score_all(*model, te, options));
    row.train_videos = static_cast<std::int64_t>(tr.size());
    row.test_videos = static_cast<std::int64_t>(te.size());
    total += row.auc;
    report.rows.push_back(row);
  }
  report.average = total / static_cast<double>(report.rows.size());
  return report;
}

RobustnessReport protocol_robustness(const nn::Model& model, const std::vector<RawVideo>& videos, std::uint64_t seed,
                                     const ScoreOptions& options, const preprocess::PreprocessOptions& pre,
                                     const CorruptFn& corrupt) {
  if (videos.empty()) throw DataError("no videos to evaluate");
  const Rng base(seed);
  std::vector<std::uint64_t> seeds;
  for (std::size_t v = 0; v < videos.size(); ++v) seeds.push_back(base.substream(v, 0).next_u64());

  auto run = [&](const std::optional<corruptions::CorruptionSpec>& cell) {
    std::vector<VideoSample> samples;
    for (std::size_t v = 0; v < videos.size(); ++v) {
      const RawVideo& raw = videos[v];
      std::vector<Image> frames;
      if (cell) {
        corruptions::CorruptionSpec spec = *cell;
        spec.seed = seeds[v];
        frames = corrupt(raw.frames, spec);
      }
      samples.push_back({raw.id, raw.id, preprocess::preprocess_frames(cell ? frames : raw.frames, raw.landmarks, pre),
                         raw.label, raw.method});
    }
    return video_auc(score_all(model, samples, options));
  };

  RobustnessReport r;
  r.clean = run(std::nullopt);
  double grand = 0.0;
  for (std::size_t k = 0; k < corruptions::kAllKinds.size(); ++k) {
    double sum = 0.0;
    for (int s = 1; s <= corruptions::kSeverities; ++s) {
      const double auc = run(corruptions::CorruptionSpec{corruptions::kAllKinds[k], s, 0});
      r.cells[k][static_cast<std::size_t>(s - 1)] = auc;
      sum += auc;
    }
    r.kind_mean[k] = sum / corruptions::kSeverities;
    grand += r.kind_mean[k];
  }
  r.average = grand / static_cast<double>(corruptions::kAllKinds.size());
  return r;
}

std::vector<ClipSweepRow> protocol_clip_sweep(const nn::Model& model, const std::vector<VideoSample>& videos,
                                              const std::vector<std::int64_t>& lengths, std::int64_t batch_size) {
  std::vector<ClipSweepRow> rows;
  for (auto T : lengths) {
    const ScoreOptions options{T, T, batch_size};
    const auto scores = score_all(model, videos, options);
    ClipSweepRow row;
    row.clip_length = T;
    for (const auto& v : scores) row.clips += static_cast<std::int64_t>(v.clip_scores.size());
    row.auc = video_auc(scores);
    rows.push_back(row);
  }
  return rows;
}

json to_json(const VideoScore& v) {
  return json{{"videoId", v.video_id},
              {"label", v.label == 1 ? "fake" : "real"},
              {"method", v.method},
              {"clipScores", v.clip_scores},
              {"videoScore", v.video_score}};
}

json to_json(const PlainReport& r) {
  json videos = json::array();
  for (const auto& v : r.videos) videos.push_back(to_json(v));
  return json{{"protocol", "plain"},
              {"clipLength", r.options.clip_length},
              {"stride", r.options.stride},
              {"videos", videos},
              {"auc", r.auc ? json(*r.auc) : json(nullptr)},
              {"accuracy", r.accuracy}};
}

json to_json(const CrossManipulationReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back(json{{"heldOut", row.held_out},
                        {"auc", row.auc},
                        {"trainVideos", row.train_videos},
                        {"testVideos", row.test_videos}});
  return json{{"protocol", "cross-manipulation"}, {"rows", rows}, {"average", r.average}};
}

json to_json(const RobustnessReport& r) {
  json kinds = json::object();
  for (std::size_t k = 0; k < corruptions::kAllKinds.size(); ++k)
    kinds[corruptions::kind_name(corruptions::kAllKinds[k])] =
        json{{"severities", std::vector<double>(r.cells[k].begin(), r.cells[k].end())}, {"mean", r.kind_mean[k]}};
  return json{{"protocol", "robustness"}, {"clean", r.clean}, {"kinds", kinds}, {"average", r.average}};
}

json to_json(const std::vector<ClipSweepRow>& rows) {
  json out = json::array();
  for (const auto& row : rows)
    out.push_back(json{{"clipLength", row.clip_length}, {"clips", row.clips}, {"auc", row.auc}});
  return json{{"protocol", "clip-sweep"}, {"rows", out}};
}

json to_json(const ProbeResult& r) {
  return json{{"protocol", "frame-probe"},
              {"trainFrames", r.train_frames},
              {"testFrames", r.test_frames},
              {"trainFrameAuc", r.train_frame_auc},
              {"testFrameAuc", r.test_frame_auc},
              {"testVideoAuc", r.test_video_auc}};
}

std::string format_table(const RobustnessReport& r) {
  std::string out = "kind          clean      1      2      3      4      5   mean\n";
  for (std::size_t k = 0; k < corruptions::kAllKinds.size(); ++k) {
    char name[16];
    std::snprintf(name, sizeof name, "%-12s", corruptions::kind_name(corruptions::kAllKinds[k]));
    out += std::string(name) + " " + percent(r.clean);
    for (double v : r.cells[k]) out += " " + percent(v);
    out += " " + percent(r.kind_mean[k]) + "\n";
  }
  out += "average                                              " + percent(r.average) + "\n";
  return out;
}

std::string format_table(const CrossManipulationReport& r) {
  std::string out = "held out              auc\n";
  for (const auto& row : r.rows) {
    char name[24];
    std::snprintf(name, sizeof name, "%-18s", row.held_out.c_str());
    out += std::string(name) + " " + percent(row.auc) + "\n";
  }
  out += "average            " + percent(r.average) + "\n";
  return out;
}

void write_json(const std::filesystem::path& path, const json& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << report.dump(2) << "\n";
}

}  // namespace mouthtrace::eval
