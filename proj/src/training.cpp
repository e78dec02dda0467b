#include "gbm/training.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gbm/datasets.hpp"

namespace gbm {

std::vector<TrainLogRow> train_score_net(
    ScoreNet<double>& net, const Eigen::ArrayXXd& data, const SdeConfig& config,
    const TrainOptions& options, TrainState& state,
    const std::function<void(const TrainLogRow&, const ScoreNet<double>&)>& on_step) {
  config.validate();
  require_positive(data, "train_score_net");
  if (data.rows() != net.architecture().input_dim)
    throw StructuralError("train_score_net: data dimension does not match the network");
  const EpochBatcher batcher(static_cast<long>(data.cols()), options.batch_size, options.seed);
  const Rng root(options.seed);
  if (options.egd && (net.parameters().array() == 0.0).any())
    throw DomainError("train_score_net: exponentiated updates need nonzero parameters");

  std::vector<TrainLogRow> log;
  const long end = state.iteration + options.iterations;
  const double total = static_cast<double>(std::max(options.schedule_horizon > 0 ? options.schedule_horizon : end, 1L));
  for (long it = state.iteration; it < end; ++it) {
    const std::vector<long> idx = batcher.batch(it);
    Eigen::ArrayXXd x0(data.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) x0.col(static_cast<Eigen::Index>(i)) = data.col(idx[i]);
    Rng rng = root.split(static_cast<std::uint64_t>(it) + 1);
    const TrainingBatch batch = make_training_batch(x0, config, rng);

    ScoreNet<double>::Cache cache;
    const LossReport rep = mdsm_loss(net, batch, config, options.mdsm, &cache);
    const Eigen::VectorXd grad = net.backward(rep.output_grad, cache);
    if (!std::isfinite(rep.loss) || !grad.allFinite())
      throw NumericError("training diverged at iteration " + std::to_string(it), it);

    const double progress = std::min(1.0, static_cast<double>(it) / total);
    const double scale =
        options.lr_floor + (1.0 - options.lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    const Eigen::VectorXd previous = net.parameters();
    if (options.egd) {
      auto& p = net.parameters_mut();
      p.array() *= (-options.egd_eta * scale * grad.array() * p.array().sign()).exp();
    } else {
      adamw_step(net.parameters_mut(), grad, state.adam, options.adam, scale);
    }
    // Checkpoints store binary32; anything beyond that range counts as divergence.
    if (!(net.parameters().array().abs() <= std::numeric_limits<float>::max()).all()) {
      net.parameters_mut() = previous;
      throw NumericError("training diverged at iteration " + std::to_string(it) + " (parameter overflow)", it);
    }
    state.iteration = it + 1;

    TrainLogRow row{it, rep.loss, grad.norm(), rep.clip_count};
    log.push_back(row);
    if (on_step) on_step(row, net);
  }
  return log;
}

}  // namespace gbm
