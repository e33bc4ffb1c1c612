#include "mouthtrace/training/early_stop.hpp"

#include "mouthtrace/error.hpp"

namespace mouthtrace::training {

EarlyStopper::EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (min_delta < 0.0) throw ConfigError("minDelta must be >= 0");
}

bool EarlyStopper::update(double val_loss) {
  if (!seen_ || val_loss < reference_ - min_delta_) {
    seen_ = true;
    reference_ = val_loss;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

bool early_stop(const std::vector<double>& val_loss_history, int patience, double min_delta) {
  if (val_loss_history.empty()) throw DataError("early_stop on an empty history");
  EarlyStopper stopper(patience, min_delta);
  bool stop = false;
  for (double v : val_loss_history) stop = stopper.update(v);
  return stop;
}

}  // namespace mouthtrace::training
