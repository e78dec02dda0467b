#include <doctest.h>

#include <cmath>
#include <vector>

#include "gbm/eval.hpp"
#include "gbm/sampler.hpp"
#include "gbm/score.hpp"
#include "gbm/sde.hpp"

using namespace gbm;

namespace {

// Score whose scaled form x o s is a fixed constant.
struct ConstantScaled final : ScoreField {
  double value;
  explicit ConstantScaled(double v) : value(v) {}
  Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long) const override { return value / x; }
  Eigen::ArrayXXd scaled(const Eigen::ArrayXXd& x, long) const override {
    return Eigen::ArrayXXd::Constant(x.rows(), x.cols(), value);
  }
  ScoreKind kind() const override { return ScoreKind::analytic_lognormal; }
};

struct NanScore final : ScoreField {
  Eigen::ArrayXXd operator()(const Eigen::ArrayXXd& x, long) const override {
    return Eigen::ArrayXXd::Constant(x.rows(), x.cols(), std::nan(""));
  }
  ScoreKind kind() const override { return ScoreKind::network; }
};

SdeConfig three_halves(double sigma = 0.8) {
  SdeConfig c = SdeConfig::zero_log_drift(sigma);
  c.mu = Eigen::VectorXd::Constant(1, 1.5 * sigma * sigma);
  return c;
}

}  // namespace

TEST_CASE("SdeConfig defaults and validation") {
  const SdeConfig c = SdeConfig::zero_log_drift();
  CHECK(c.sigma == 0.8);
  CHECK(c.delta == 0.001);
  CHECK(c.n_steps == 1000);
  CHECK(c.mu(0) == doctest::Approx(0.32));
  CHECK(c.horizon() == doctest::Approx(1.0));
  CHECK(c.log_drift(3).abs().maxCoeff() < 1e-15);
  SdeConfig bad = c;
  bad.delta = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.n_steps = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.mu = Eigen::Vector2d(0.1, 0.2);
  CHECK_THROWS_AS(bad.drift(3), StructuralError);
}

TEST_CASE("forward_closed_form") {
  const SdeConfig c = SdeConfig::zero_log_drift();
  const Eigen::ArrayXXd x0 = (Eigen::ArrayXXd(2, 2) << 0.5, 2.0, 3.0, 1.0).finished();
  Rng rng(1);
  CHECK((forward_closed_form(x0, 0.0, c, rng) == x0).all());
  const Eigen::ArrayXXd one = Eigen::ArrayXXd::Ones(1, 1);
  CHECK(forward_closed_form(one, 1.0, c, one)(0, 0) == doctest::Approx(2.225540928492468).epsilon(1e-12));
  CHECK_THROWS_AS(forward_closed_form(-one, 0.5, c, one), DomainError);
  CHECK_THROWS_AS(forward_closed_form(one, 1.5, c, one), DomainError);

  const long n = 100000;
  const Eigen::ArrayXXd xt = forward_closed_form(Eigen::ArrayXXd::Ones(1, n), 1.0, c, rng);
  CHECK(std::abs(xt.log().mean()) < 3.0 * 0.8 / std::sqrt(double(n)));
}

TEST_CASE("forward_step values") {
  SdeConfig c = SdeConfig::zero_log_drift();
  const Eigen::ArrayXXd x = (Eigen::ArrayXXd(1, 3) << 0.2, 1.0, 7.0).finished();
  CHECK((forward_step(x, c, Eigen::ArrayXXd::Zero(1, 3)) - x).abs().maxCoeff() < 1e-15);
  c.delta = 1e-14;
  Rng rng(2);
  CHECK((forward_step(x, c, rng) / x - 1.0).abs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(forward_step(x, c, Eigen::ArrayXXd::Zero(2, 3)), StructuralError);
  CHECK_THROWS_AS(forward_step(Eigen::ArrayXXd::Zero(1, 1), c, rng), DomainError);
}

TEST_CASE("chained forward steps telescope to the closed form") {
  SdeConfig c;  // mu = 0.32 but pick a nonzero log drift too
  c.mu = Eigen::VectorXd::Constant(1, 0.9);
  c.n_steps = 200;
  c.delta = 0.005;
  Rng rng(3);
  const Eigen::ArrayXXd x0 = (Eigen::ArrayXXd(2, 3) << 0.5, 1.0, 4.0, 2.0, 0.1, 9.0).finished();
  Eigen::ArrayXXd x = x0, zsum = Eigen::ArrayXXd::Zero(2, 3);
  for (long k = 0; k < c.n_steps; ++k) {
    const Eigen::ArrayXXd z = rng.normal_array(2, 3);
    zsum += z;
    x = forward_step(x, c, z);
  }
  const double t = c.horizon();
  const Eigen::ArrayXXd z_eff = zsum * std::sqrt(c.delta) / std::sqrt(t);
  const Eigen::ArrayXXd closed = forward_closed_form(x0, t, c, z_eff);
  CHECK(((x - closed) / closed).abs().maxCoeff() < 1e-12);
}

TEST_CASE("reverse_step values") {
  const SdeConfig c = three_halves();
  const Eigen::ArrayXXd x = (Eigen::ArrayXXd(1, 3) << 0.4, 1.0, 3.0).finished();
  const Eigen::ArrayXXd z0 = Eigen::ArrayXXd::Zero(1, 3);
  CHECK((reverse_step(x, 5, ConstantScaled(0.0), c, z0) - x).abs().maxCoeff() < 1e-15);
  const Eigen::ArrayXXd one = Eigen::ArrayXXd::Ones(1, 1);
  CHECK(reverse_step(one, 5, ConstantScaled(-1.0), c, Eigen::ArrayXXd::Zero(1, 1))(0, 0) ==
        doctest::Approx(0.9993602047563164).epsilon(1e-12));

  // alg1 swaps 3/2 for 1/2 in the drift: exponent differs by delta sigma^2.
  SdeConfig a = c;
  a.drift_variant = DriftVariant::alg1;
  const double r = reverse_step(one, 5, ConstantScaled(0.0), a, Eigen::ArrayXXd::Zero(1, 1))(0, 0);
  CHECK(std::log(r) == doctest::Approx(-0.001 * 0.64).epsilon(1e-12));
  CHECK(reverse_drift_factor(DriftVariant::derived) == 1.5);
  CHECK(reverse_drift_factor(DriftVariant::alg1) == 0.5);

  try {
    reverse_step(x, 17, NanScore(), c, z0);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.step() == 17);
  }
}

TEST_CASE("exponent clamp") {
  SdeConfig c = three_halves();
  const Eigen::ArrayXXd x = Eigen::ArrayXXd::Ones(1, 2);
  const ConstantScaled huge(1e9);
  StepDiagnostics diag;
  const Eigen::ArrayXXd y = reverse_step(x, 3, huge, c, Eigen::ArrayXXd::Zero(1, 2), 1.0, &diag);
  CHECK(y(0, 0) == doctest::Approx(std::exp(50.0)));
  CHECK(diag.clamped_entries == 2);
  CHECK(diag.clamped_steps == 1);
  c.clamp_exponent = false;
  CHECK(std::isinf(reverse_step(x, 3, huge, c, Eigen::ArrayXXd::Zero(1, 2))(0, 0)));
}

TEST_CASE("positivity of multiplicative updates") {
  const SdeConfig c = three_halves();
  Rng rng(4);
  const Eigen::ArrayXXd x = rng.normal_array(3, 200).exp() * 1e-3;
  CHECK((forward_step(x, c, rng) > 0.0).all());
  CHECK((reverse_step(x, 10, ConstantScaled(-40.0), c, rng) > 0.0).all());
  const Eigen::ArrayXXd g = rng.normal_array(3, 200) * 10.0;
  CHECK((egd_equivalent_step(x, g, 0.1, rng.normal_array(3, 200)) > 0.0).all());
}

TEST_CASE("score_change_of_variables") {
  const Eigen::ArrayXXd x = (Eigen::ArrayXXd(1, 2) << 2.0, 5.0).finished();
  const Eigen::ArrayXXd s = (Eigen::ArrayXXd(1, 2) << -0.5, -0.2).finished();
  CHECK((score_change_of_variables(x, s).abs() < 1e-15).all());
  const Eigen::ArrayXXd e = Eigen::ArrayXXd::Constant(1, 1, std::exp(1.0));
  const Eigen::ArrayXXd se = analytic_lognormal_score(e, Eigen::VectorXd::Zero(1), 1.0);
  CHECK(score_change_of_variables(e, se)(0, 0) == doctest::Approx(-1.0));
  // Oracle: finite difference of log p_Y(y) = log p_X(e^y) + y at y = 1.
  const double h = 1e-5;
  const auto log_py = [](double y) { return lognormal_log_pdf(std::exp(y), 0.0, 1.0) + y; };
  CHECK((log_py(1.0 + h) - log_py(1.0 - h)) / (2 * h) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("egd_equivalent_step") {
  const Eigen::ArrayXXd one = Eigen::ArrayXXd::Ones(1, 1);
  CHECK(egd_equivalent_step(one, one, 0.1, Eigen::ArrayXXd::Zero(1, 1))(0, 0) ==
        doctest::Approx(0.9048374180359595).epsilon(1e-12));
  Rng rng(5);
  const Eigen::ArrayXXd x = rng.normal_array(2, 5).exp();
  const Eigen::ArrayXXd g = rng.normal_array(2, 5);
  const Eigen::ArrayXXd z = rng.normal_array(2, 5);
  CHECK(((egd_equivalent_step(x, g, 1e-14, z) / x) - 1.0).abs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(egd_equivalent_step(x, g, 0.0, z), DomainError);

  // With eta = delta sigma^2 and mu = 3 sigma^2 / 2 it is reverse_step with
  // score = -grad; the noise of reverse_step is sqrt(delta) sigma z = sqrt(eta) z.
  const SdeConfig c = three_halves();
  struct Field final : ScoreField {
    Eigen::ArrayXXd g;
    Eigen::ArrayXXd operator()(const Eigen::ArrayXXd&, long) const override { return -g; }
    ScoreKind kind() const override { return ScoreKind::analytic_lognormal; }
  } field;
  field.g = g;
  const Eigen::ArrayXXd a = egd_equivalent_step(x, g, c.delta * c.sigma * c.sigma, z);
  const Eigen::ArrayXXd b = reverse_step(x, 1, field, c, z);
  CHECK(((a - b) / a).abs().maxCoeff() < 1e-13);
}

TEST_CASE("egd_equivalent_step stationary law for the log-normal potential") {
  // ell(x) = sum (log x)^2 / (2 s^2) + sum log x. In y = log x the update is
  // y <- y - eta (y / s^2 + 1) + sqrt(eta) z, whose stationary law is
  // N(-s^2, s^2 / 2) for small eta.
  const double s = 0.5, eta = 1e-3;
  const long n = 10000;
  Rng rng(6);
  Eigen::ArrayXXd x = Eigen::ArrayXXd::Ones(1, n);
  for (int i = 0; i < 5000; ++i) {
    const Eigen::ArrayXXd grad = (x.log() / (s * s) + 1.0) / x;
    x = egd_equivalent_step(x, grad, eta, rng.normal_array(1, n));
  }
  const Eigen::ArrayXd y = x.row(0).transpose().log();
  const std::vector<double> v(y.data(), y.data() + y.size());
  const double m = -s * s, sd = s / std::sqrt(2.0);
  CHECK(ks_statistic(v, [&](double u) { return normal_cdf((u - m) / sd); }) < 0.03);
  CHECK(ks_statistic(v, [&](double u) { return normal_cdf(u / s); }) > 0.1);
}

TEST_CASE("log moments after k forward steps") {
  const SdeConfig c = SdeConfig::zero_log_drift();
  SdeConfig drifted = c;
  drifted.mu = Eigen::VectorXd::Constant(1, 0.8);
  for (const SdeConfig& cfg : {c, drifted}) {
    const long n = 100000, k = 250;
    Rng rng(7);
    Eigen::ArrayXXd x = Eigen::ArrayXXd::Constant(1, n, 2.0);
    for (long i = 0; i < k; ++i) x = forward_step(x, cfg, rng);
    const Eigen::ArrayXd y = x.row(0).transpose().log();
    const double var_exp = cfg.sigma * cfg.sigma * k * cfg.delta;
    const double mean_exp = std::log(2.0) + k * cfg.delta * cfg.log_drift(1)(0);
    CHECK(std::abs(y.mean() - mean_exp) < 3.0 * std::sqrt(var_exp / n));
    CHECK(std::abs((y - y.mean()).square().mean() / var_exp - 1.0) < 0.02);
  }
}

TEST_CASE("simulate_forward records grid steps") {
  SdeConfig c = SdeConfig::zero_log_drift(0.8, 10, 0.01);
  const Eigen::ArrayXXd x0 = Eigen::ArrayXXd::Ones(2, 3);
  const Trajectory t = simulate_forward(x0, c, 9, 4);
  CHECK(t.steps == std::vector<long>{0, 4, 8, 9});
  CHECK((t.states.front().values == x0).all());
  const Trajectory u = simulate_forward(x0, c, 9, 1);
  CHECK(u.steps.size() == 10);
  CHECK((u.states.back().values == t.states.back().values).all());
  long seen = 0;
  simulate_forward(x0, c, 9, 100, [&](long k, const Eigen::ArrayXXd&) { CHECK(k == seen++); });
  CHECK(seen == 10);

  // Two grid points means exactly one forward step, matching forward_step.
  SdeConfig two = SdeConfig::zero_log_drift(0.8, 2, 0.01);
  Rng rng(9);
  const Eigen::ArrayXXd expect = forward_step(x0, two, rng);
  const Trajectory s = simulate_forward(x0, two, 9, 1);
  CHECK((s.states.back().values == expect).all());
}

TEST_CASE("reverse run with the exact score recovers the target") {
  const SdeConfig c = SdeConfig::zero_log_drift();
  const LogNormalMixtureScore score(LogNormalParams::isotropic(1, 0.0, 0.5), c);
  Rng rng(10);
  const long n = 10000;
  const auto fit = marginal_params(LogNormalParams::isotropic(1, 0.0, 0.5), (c.n_steps - 1) * c.delta, c);
  const SamplerResult r = sample_plain(score, c, fitted_initial_state(fit, n, rng), rng);
  const Eigen::ArrayXd y = r.samples.row(0).transpose().log();
  const std::vector<double> v(y.data(), y.data() + y.size());
  CHECK(ks_statistic(v, [](double u) { return normal_cdf(u / 0.5); }) < 0.03);
}
