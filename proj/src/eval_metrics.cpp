#include "mouthtrace/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mouthtrace/error.hpp"

namespace mouthtrace::eval {

VideoScore make_video_score(std::string video_id, std::vector<double> clip_scores, int label, std::string method) {
  if (clip_scores.empty()) throw DataError("video " + video_id + " has no clips to score");
  double total = 0.0;
  for (double s : clip_scores) total += s;
  VideoScore v;
  v.video_id = std::move(video_id);
  v.video_score = total / static_cast<double>(clip_scores.size());
  v.clip_scores = std::move(clip_scores);
  v.label = label;
  v.method = std::move(method);
  return v;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DataError("roc_auc: score and label counts differ");
  std::int64_t P = 0, N = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("roc_auc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw DataError("roc_auc: NaN score");
    (labels[i] == 1 ? P : N) += 1;
  }
  if (P == 0 || N == 0) throw DataError("roc_auc needs both real and fake videos");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  // Twice the area in units of one (positive, negative) pair; exact integers.
  std::int64_t tp = 0, fp = 0, area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::int64_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += (fp - fp0) * (tp + tp0);
    roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(N));
    roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(P));
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
  return roc;
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size()) throw DataError("accuracy: score and label counts differ");
  if (scores.empty()) throw DataError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += static_cast<int>(scores[i] >= threshold) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace mouthtrace::eval
