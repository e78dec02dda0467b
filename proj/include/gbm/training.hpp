#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gbm/losses.hpp"
#include "gbm/optim.hpp"
#include "gbm/scorenet.hpp"

namespace gbm {

struct TrainOptions {
  long iterations = 2000;
  long batch_size = 256;
  AdamWOptions adam{2e-3, 0.9, 0.999, 1e-8, 0.0};
  /// Cosine decay of the learning rate down to lr * lr_floor; 1 disables.
  double lr_floor = 0.05;
  /// Iteration count the schedule spans; 0 means the end of this call.
  long schedule_horizon = 0;
  MdsmOptions mdsm;
  std::uint64_t seed = 1;
  /// Use sign-preserving exponentiated updates instead of AdamW. Every
  /// parameter must then be nonzero.
  bool egd = false;
  double egd_eta = 1e-3;
};

struct TrainLogRow {
  long iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  long clip_count = 0;
};

/// Optimizer state carried across (resumed) runs.
struct TrainState {
  AdamWState adam;
  long iteration = 0;
};

/// Minimizes the Monte-Carlo M-DSM loss over `data` (d x n, positive).
/// Iteration i draws its batch, steps and noise from (seed, i) alone, so a
/// resumed run continues the same sequence. Throws NumericError on a
/// non-finite loss or gradient, leaving `net` at the last finite parameters.
std::vector<TrainLogRow> train_score_net(
    ScoreNet<double>& net, const Eigen::ArrayXXd& data, const SdeConfig& config,
    const TrainOptions& options, TrainState& state,
    const std::function<void(const TrainLogRow&, const ScoreNet<double>&)>& on_step = {});

}  // namespace gbm
