#pragma once

#include <string>
#include <vector>

namespace mouthtrace::eval {

struct VideoScore {
  std::string video_id;
  std::vector<double> clip_scores;  // sigmoid probabilities
  double video_score = 0.0;         // mean of clip_scores
  int label = 0;
  std::string method;
};

/// Builds a score from clip probabilities; throws DataError when there are none.
VideoScore make_video_score(std::string video_id, std::vector<double> clip_scores, int label,
                            std::string method = {});

struct RocCurve {
  // From (0, 0) to (1, 1), one point per distinct score threshold.
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

/// Positives are label 1 (fake). Tied scores form one step, so the
/// trapezoidal area equals P(s_pos > s_neg) + P(s_pos = s_neg) / 2 exactly.
/// Throws DataError unless both classes are present.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Fraction with (score >= threshold) == label. Throws DataError when empty.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

}  // namespace mouthtrace::eval
