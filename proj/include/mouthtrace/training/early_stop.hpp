#pragma once

#include <vector>

namespace mouthtrace::training {

/// Patience counter over validation losses. An epoch counts as an
/// improvement only when it beats the reference by strictly more than
/// min_delta; the first epoch always sets the reference.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta);

  /// Records one validation loss; returns true once training should stop.
  bool update(double val_loss);

  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  double min_delta_;
  bool seen_ = false;
  double reference_ = 0.0;
  int stale_ = 0;
};

/// Stop decision for a whole history (replays EarlyStopper).
bool early_stop(const std::vector<double>& val_loss_history, int patience = 10, double min_delta = 1e-4);

}  // namespace mouthtrace::training
