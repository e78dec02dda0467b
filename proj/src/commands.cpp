#include "gbm/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>

#include "gbm/checkpoint.hpp"
#include "gbm/datasets.hpp"
#include "gbm/eval.hpp"
#include "gbm/io.hpp"
#include "gbm/log.hpp"
#include "gbm/sampler.hpp"
#include "gbm/score.hpp"
#include "gbm/training.hpp"

namespace gbm {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const LoadError*>(&e) ||
      dynamic_cast<const ParseError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e))
    return exit_io;
  if (dynamic_cast<const NumericError*>(&e)) return exit_divergence;
  return exit_failure;
}

namespace {

struct Data {
  Eigen::ArrayXXd x;
  std::optional<std::vector<MixtureComponent>> truth;
  long height = 0;
  long width = 0;
  bool images() const { return height > 0; }
};

Data load_data(const RunConfig& c) {
  Data d;
  if (c.dataset_source == DatasetSource::toy) {
    const ToyDatasetSpec spec = c.toy_spec();
    d.x = generate_toy(spec).values;
    d.truth = spec.components;
    return d;
  }
  if (c.idx_images.empty()) throw ConfigError("dataset.source = idx needs dataset.images");
  ImageDataset ds = load_idx(c.idx_images, c.idx_labels.empty() ? std::nullopt
                                                                  : std::optional<fs::path>(c.idx_labels));
  if (c.image_limit > 0 && c.image_limit < ds.size()) {
    ds.images = Eigen::ArrayXXd(ds.images.leftCols(c.image_limit));
    if (ds.labels) ds.labels->resize(static_cast<std::size_t>(c.image_limit));
  }
  if (c.crop > 0) ds = crop_border(ds, c.crop);
  if (c.downsample > 1) ds = downsample(ds, c.downsample);
  d.x = std::move(ds.images);
  d.height = ds.height;
  d.width = ds.width;
  return d;
}

fs::path prepare_out(const RunConfig& c) {
  fs::create_directories(c.out);
  write_text(c.out / "config.ini", c.to_ini().serialize());
  return c.out;
}

void write_summary(const fs::path& out, const json& j) { write_text(out / "summary.json", j.dump(2) + "\n"); }

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const LogNormalParams& p) { return {{"mu", to_json(p.mu)}, {"sigma", p.sigma}}; }

LogNormalParams params_from_json(const json& j) {
  const auto mu = j.at("mu").get<std::vector<double>>();
  return {Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())),
          j.at("sigma").get<double>()};
}

json to_json(const SdeConfig& s) {
  return {{"sigma", s.sigma},
          {"delta", s.delta},
          {"n_steps", s.n_steps},
          {"mu", to_json(s.mu)},
          {"drift_variant", to_string(s.drift_variant)}};
}

/// Log-normal fit of the data pushed to the last grid step.
LogNormalParams terminal_fit(const Eigen::ArrayXXd& data, const SdeConfig& sde, Rng rng) {
  const double t = static_cast<double>(sde.n_steps - 1) * sde.delta;
  return fit_lognormal(SampleBatch{forward_closed_form(data, t, sde, rng), sde.n_steps - 1, rng.seed()});
}

/// KS of each log-coordinate against the mixture's log-marginal.
std::vector<double> ks_log_marginals(const Eigen::ArrayXXd& values, const std::vector<MixtureComponent>& comps) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    const Eigen::ArrayXd y = values.row(i).transpose().log();
    const auto cdf = [&comps, i](double v) {
      double f = 0.0;
      for (const auto& c : comps) f += c.weight * normal_cdf((v - c.params.mu(i)) / c.params.sigma);
      return f;
    };
    out.push_back(ks_statistic(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())), cdf));
  }
  return out;
}

std::string step_name(const char* prefix, long k, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%05ld%s", prefix, k, ext);
  return buf;
}

void write_train_log(const fs::path& path, const std::vector<TrainLogRow>& rows) {
  std::string s = "iteration,loss,grad_norm,clip_count\n";
  for (const auto& r : rows)
    s += std::to_string(r.iteration) + "," + format_decimal(r.loss) + "," + format_decimal(r.grad_norm) + "," +
         std::to_string(r.clip_count) + "\n";
  write_text(path, s);
}

}  // namespace

json cmd_simulate(const RunConfig& c) {
  c.validate();
  const fs::path out = prepare_out(c);
  const Data data = load_data(c);
  const SdeConfig& sde = c.sde;
  const long last = sde.n_steps - 1;
  const std::set<long> snapshot_steps{0, sde.n_steps / 4, sde.n_steps / 2, 3 * sde.n_steps / 4, last};
  const Eigen::Index kept = std::min<Eigen::Index>(c.record_samples, data.x.cols());

  Trajectory recorded;
  recorded.config = sde;
  recorded.seed = c.seed;
  std::vector<std::string> snapshots;
  const auto observer = [&](long k, const Eigen::ArrayXXd& x) {
    if (k % c.record_every == 0 || k == last) {
      recorded.states.push_back(SampleBatch{x.leftCols(kept), k, c.seed});
      recorded.steps.push_back(k);
    }
    if (data.images() && snapshot_steps.count(k)) {
      const std::string name = step_name("snapshot_k", k, ".pgm");
      write_pgm(out / name, x, data.height, data.width, std::min<long>(c.image_snapshots, x.cols()));
      snapshots.push_back(name);
    }
  };
  const Trajectory traj = simulate_forward(data.x, sde, c.seed, sde.n_steps, observer);
  const SampleBatch& terminal = traj.states.back();

  write_trajectory_csv(out / "trajectory.csv", recorded, kept);
  write_batch_csv(out / "terminal.csv", terminal);
  write_log_histogram_csv(out / "terminal_log_histogram.csv", terminal.values, c.histogram_bins);

  json j = {{"command", "simulate"},
            {"samples", data.x.cols()},
            {"dim", data.x.rows()},
            {"terminal_step", last},
            {"terminal_fit", to_json(fit_lognormal(terminal))},
            {"sde", to_json(sde)},
            {"snapshots", snapshots}};
  if (data.truth) {
    const LogNormalMixtureScore law(*data.truth, sde);
    json comps = json::array();
    for (const auto& m : law.marginal_components(last))
      comps.push_back({{"weight", m.weight}, {"params", to_json(m.params)}});
    j["predicted_terminal"] = comps;
    j["ks_terminal_log_marginals"] = ks_log_marginals(terminal.values, law.marginal_components(last));
  }
  write_summary(out, j);
  return j;
}

json cmd_train(const RunConfig& c) {
  c.validate();
  const fs::path out = prepare_out(c);
  const Data data = load_data(c);
  const SdeConfig& sde = c.sde;
  const Rng root(c.seed);

  ScoreNetArchitecture arch;
  arch.input_dim = data.x.rows();
  arch.time_frequencies = c.time_frequencies;
  arch.n_steps = sde.n_steps;
  arch.hidden = c.hidden;

  const bool egd = c.optimizer == OptimizerKind::egd;
  ScoreNet<double> net(arch);
  TrainState state;
  if (!c.resume.empty()) {
    auto loaded = load_checkpoint<double>(c.resume);
    if (!(loaded.net.architecture() == arch))
      throw ConfigError("resume checkpoint architecture does not match the configured network");
    net = std::move(loaded.net);
    state.iteration = loaded.metadata.value("iteration", 0L);
  } else {
    Rng init = root.split(1);
    net = ScoreNet<double>::initialized(arch, init, egd ? 1.0 : 0.0);
    if (egd) {
      // Exponentiated updates cannot leave zero; give every parameter a sign
      // and a small log-normal magnitude.
      auto& p = net.parameters_mut();
      for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) == 0.0) p(i) = (init.uniform() < 0.5 ? -1.0 : 1.0) * 1e-2 * std::exp(0.5 * init.normal());
    }
  }

  const LogNormalParams fit = terminal_fit(data.x, sde, root.split(2));
  const auto metadata = [&](long iteration) {
    json m = {{"iteration", iteration},
              {"sde", to_json(sde)},
              {"terminal_fit", to_json(fit)},
              {"seed", c.seed},
              {"optimizer", egd ? "egd" : "adamw"}};
    if (data.images()) m["image"] = {{"height", data.height}, {"width", data.width}};
    return m;
  };

  TrainOptions opts;
  opts.iterations = c.iterations;
  opts.batch_size = c.batch_size;
  opts.adam = c.adam;
  opts.lr_floor = c.lr_floor;
  opts.schedule_horizon = state.iteration + c.iterations;
  opts.mdsm.target_clip = c.target_clip;
  opts.seed = c.seed;
  opts.egd = egd;
  opts.egd_eta = c.egd_eta;

  const long start = state.iteration;
  std::vector<TrainLogRow> rows;
  const auto on_step = [&](const TrainLogRow& row, const ScoreNet<double>& current) {
    rows.push_back(row);
    const long done = row.iteration + 1;
    if (done % c.checkpoint_every == 0) {
      save_checkpoint(current, out / step_name("checkpoint_", done, ".gbmnet"), metadata(done));
      save_checkpoint(current, out / "checkpoint.gbmnet", metadata(done));
    }
  };

  try {
    train_score_net(net, data.x, sde, opts, state, on_step);
  } catch (const NumericError& e) {
    // Parameters are still the last finite ones.
    save_checkpoint(net, out / "checkpoint.gbmnet", metadata(state.iteration));
    write_train_log(out / "train_log.csv", rows);
    write_summary(out, {{"command", "train"},
                        {"diverged", true},
                        {"error", e.what()},
                        {"start_iteration", start},
                        {"iteration", state.iteration}});
    throw;
  }
  save_checkpoint(net, out / "checkpoint.gbmnet", metadata(state.iteration));
  write_train_log(out / "train_log.csv", rows);

  json j = {{"command", "train"},
            {"diverged", false},
            {"start_iteration", start},
            {"iteration", state.iteration},
            {"parameters", net.parameter_count()},
            {"terminal_fit", to_json(fit)},
            {"checkpoint", "checkpoint.gbmnet"}};
  if (!rows.empty()) {
    j["initial_loss"] = rows.front().loss;
    j["final_loss"] = rows.back().loss;
  }
  write_summary(out, j);
  return j;
}

json cmd_sample(const RunConfig& c) {
  c.validate();
  const fs::path out = prepare_out(c);
  const SdeConfig& sde = c.sde;
  const Rng root(c.seed);

  std::unique_ptr<ScoreNet<double>> net;
  std::unique_ptr<ScoreField> field;
  std::optional<std::vector<MixtureComponent>> truth;
  std::optional<LogNormalParams> fit;
  long height = 0, width = 0;
  Eigen::Index dim = 0;

  const std::string& spec = c.score;
  if (spec.rfind("checkpoint:", 0) == 0) {
    auto loaded = load_checkpoint<double>(spec.substr(11));
    net = std::make_unique<ScoreNet<double>>(std::move(loaded.net));
    if (net->architecture().n_steps != sde.n_steps)
      log_warning("checkpoint was trained with n_steps = " + std::to_string(net->architecture().n_steps) +
                  ", sampling with " + std::to_string(sde.n_steps));
    field = std::make_unique<NetworkScore>(*net);
    dim = net->architecture().input_dim;
    if (loaded.metadata.contains("terminal_fit")) fit = params_from_json(loaded.metadata["terminal_fit"]);
    if (loaded.metadata.contains("image")) {
      height = loaded.metadata["image"].value("height", 0L);
      width = loaded.metadata["image"].value("width", 0L);
    }
    if (!fit && c.sampler == SamplerVariant::annealed) {
      const Data data = load_data(c);
      fit = terminal_fit(data.x, sde, root.split(2));
    }
  } else if (spec == "analytic:dataset") {
    if (c.dataset_source != DatasetSource::toy)
      throw ConfigError("--score analytic:dataset needs a toy dataset");
    truth = c.toy_spec().components;
  } else if (spec.rfind("analytic:lognormal:", 0) == 0) {
    const std::string rest = spec.substr(19);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--score analytic:lognormal:M:S, got '" + spec + "'");
    RunConfig probe;
    probe.toy_means = rest.substr(0, colon);
    probe.toy_sigmas = rest.substr(colon + 1);
    try {
      truth = probe.toy_spec().components;
    } catch (const ConfigError&) {
      throw ConfigError("--score analytic:lognormal:M:S, got '" + spec + "'");
    }
  } else {
    throw ConfigError("--score must be checkpoint:PATH, analytic:dataset or analytic:lognormal:M:S, got '" + spec +
                      "'");
  }

  if (truth) {
    field = std::make_unique<LogNormalMixtureScore>(*truth, sde);
    dim = truth->front().params.dim();
    ToyDatasetSpec ref = c.toy_spec();
    ref.components = *truth;
    fit = terminal_fit(generate_toy(ref).values, sde, root.split(2));
  }

  Rng init_rng = root.split(3);
  Rng noise = root.split(4);
  Eigen::ArrayXXd init = c.sampler == SamplerVariant::plain ? plain_initial_state(dim, c.sample_count, init_rng)
                                                             : fitted_initial_state(*fit, c.sample_count, init_rng);
  SamplerOptions opts;
  opts.max_clamped_steps = c.max_clamped_steps;
  const SamplerResult r = c.sampler == SamplerVariant::plain
                              ? sample_plain(*field, sde, std::move(init), noise, opts)
                              : sample_annealed(*field, sde, c.anneal, std::move(init), noise, opts);

  write_batch_csv(out / "samples.csv", SampleBatch{r.samples, 0, c.seed});
  if (height > 0 && height * width == r.samples.rows())
    write_pgm(out / "samples.pgm", r.samples, height, width, std::min<long>(c.image_snapshots, r.samples.cols()));

  json j = {{"command", "sample"},
            {"score", to_string(field->kind())},
            {"sampler", to_string(c.sampler)},
            {"drift_variant", to_string(sde.drift_variant)},
            {"samples", r.samples.cols()},
            {"dim", r.samples.rows()},
            {"clamped_steps", r.diagnostics.clamped_steps},
            {"clamped_entries", r.diagnostics.clamped_entries}};
  if (fit) j["initial_fit"] = to_json(*fit);
  std::optional<std::vector<MixtureComponent>> reference = truth;
  if (!reference && c.dataset_source == DatasetSource::toy) {
    auto comps = c.toy_spec().components;
    if (comps.front().params.dim() == r.samples.rows()) reference = std::move(comps);
  }
  if (reference) j["ks_log_marginals"] = ks_log_marginals(r.samples, *reference);
  write_summary(out, j);
  return j;
}

json cmd_validate(const RunConfig& c) {
  c.validate();
  if (c.validate_samples.empty()) throw ConfigError("validate needs validate.samples");
  const fs::path out = prepare_out(c);
  const SampleBatch samples = read_batch_csv(c.validate_samples);
  const Eigen::ArrayXXd reference =
      c.validate_reference.empty() ? load_data(c).x : read_batch_csv(c.validate_reference).values;

  EvalOptions opts;
  opts.projections = c.projections;
  opts.seed = c.seed;
  opts.neighbors = c.neighbors;
  opts.neighbor_queries = c.neighbor_queries;
  const EvalReport report = evaluate(samples.values, reference, opts);
  json j = report.to_json();
  write_text(out / "report.json", j.dump(2) + "\n");
  report.write_csv(out / "report.csv");
  j["command"] = "validate";
  write_summary(out, j);
  return j;
}

namespace {

struct DemoTask {
  Eigen::MatrixXd inputs;  // P x n
  Eigen::RowVectorXd targets;
  Eigen::Index hidden;

  // theta = [W1 (H x P, column-major) ; w2 (H)].
  double loss(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    const Eigen::Index p = inputs.rows(), n = inputs.cols();
    const Eigen::Map<const Eigen::MatrixXd> w1(theta.data(), hidden, p);
    const Eigen::Map<const Eigen::VectorXd> w2(theta.data() + hidden * p, hidden);
    const Eigen::MatrixXd a = (w1 * inputs).array().tanh().matrix();
    const Eigen::RowVectorXd r = w2.transpose() * a - targets;
    if (grad) {
      const Eigen::RowVectorXd g = r / static_cast<double>(n);
      grad->resize(theta.size());
      Eigen::Map<Eigen::MatrixXd> g1(grad->data(), hidden, p);
      Eigen::Map<Eigen::VectorXd> g2(grad->data() + hidden * p, hidden);
      g2 = a * g.transpose();
      g1 = ((w2 * g).array() * (1.0 - a.array().square())).matrix() * inputs.transpose();
    }
    return 0.5 * r.squaredNorm() / static_cast<double>(n);
  }
};

json log_abs_report(const Eigen::VectorXd& theta) {
  const Eigen::ArrayXd y = theta.array().abs().log();
  const double m = y.mean();
  const double s = std::sqrt((y - m).square().mean());
  const double ks = ks_statistic(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                                 [m, s](double v) { return normal_cdf((v - m) / s); });
  return {{"log_abs_mean", m},
          {"log_abs_sd", s},
          {"ks_vs_fitted_normal", ks},
          {"ks_threshold", 1.36 / std::sqrt(static_cast<double>(y.size()))}};
}

long sign_changes(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return static_cast<long>((a.array().sign() != b.array().sign()).count());
}

}  // namespace

json cmd_egd_demo(const RunConfig& c) {
  c.validate();
  const fs::path out = prepare_out(c);
  const Rng root(c.seed);
  Rng data_rng = root.split(1);
  Rng init_rng = root.split(2);
  const Eigen::Index p = c.demo_inputs, h = c.demo_hidden, n = c.demo_samples;

  DemoTask task;
  task.hidden = h;
  task.inputs = data_rng.normal_array(p, n).matrix();
  const Eigen::MatrixXd teacher1 = data_rng.normal_array(h, p).matrix() / std::sqrt(static_cast<double>(p));
  const Eigen::VectorXd teacher2 = data_rng.normal_array(h, 1).matrix() / std::sqrt(static_cast<double>(h));
  task.targets = teacher2.transpose() * (teacher1 * task.inputs).array().tanh().matrix();

  Eigen::VectorXd theta0(h * p + h);
  for (Eigen::Index i = 0; i < theta0.size(); ++i) {
    const double fan_in = static_cast<double>(i < h * p ? p : h);
    const double sign = init_rng.uniform() < 0.5 ? -1.0 : 1.0;
    theta0(i) = sign * std::exp(-0.5 * std::log(fan_in) + 0.5 * init_rng.normal());
  }

  EgdState st = EgdState::create(theta0, c.demo_eta);
  Eigen::VectorXd grad;
  std::string curve = "step,loss\n";
  const double initial_loss = task.loss(st.x, nullptr);
  for (long s = 0; s < c.demo_steps; ++s) {
    const double l = task.loss(st.x, &grad);
    curve += std::to_string(s) + "," + format_decimal(l) + "\n";
    st = egd_step(st, grad);
  }
  const double final_loss = task.loss(st.x, nullptr);
  write_text(out / "egd_loss.csv", curve);
  write_log_histogram_csv(out / "log_weights_initial.csv", theta0.array().abs().transpose(), c.histogram_bins);
  write_log_histogram_csv(out / "log_weights_final.csv", st.x.array().abs().transpose(), c.histogram_bins);

  json j = {{"command", "egd-demo"},
            {"parameters", theta0.size()},
            {"steps", c.demo_steps},
            {"eta", c.demo_eta},
            {"initial_loss", initial_loss},
            {"final_loss", final_loss},
            {"sign_flips", st.sign_flips + sign_changes(theta0, st.x)},
            {"initial_weights", log_abs_report(theta0)},
            {"final_weights", log_abs_report(st.x)}};

  if (c.demo_baseline) {
    EgdState gd = EgdState::create(theta0, c.demo_eta);
    for (long s = 0; s < c.demo_steps; ++s) {
      task.loss(gd.x, &grad);
      gd = gradient_descent_step(gd, grad);
    }
    j["baseline"] = {{"final_loss", task.loss(gd.x, nullptr)},
                     {"sign_flips_during_training", gd.sign_flips},
                     {"sign_changes_vs_initial", sign_changes(theta0, gd.x)}};
  }
  write_summary(out, j);
  return j;
}

json run_command(const RunConfig& c) {
  if (c.command == "simulate") return cmd_simulate(c);
  if (c.command == "train") return cmd_train(c);
  if (c.command == "sample") return cmd_sample(c);
  if (c.command == "validate") return cmd_validate(c);
  if (c.command == "egd-demo") return cmd_egd_demo(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace gbm
