#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "gbm/distributions.hpp"
#include "gbm/eval.hpp"
#include "gbm/io.hpp"
#include "gbm/rng.hpp"

using namespace gbm;

namespace {

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> normals(long n, double mean, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = mean + rng.normal();
  return v;
}

}  // namespace

TEST_CASE("KS against a continuous CDF") {
  for (long n : {1L, 10L, 1000L}) {
    std::vector<double> grid;
    for (long i = 1; i <= n; ++i) grid.push_back(normal_quantile((i - 0.5) / static_cast<double>(n)));
    const double d = ks_statistic(grid, normal_cdf);
    CHECK(d <= 1.0 / static_cast<double>(n));
    CHECK(d == doctest::Approx(0.5 / static_cast<double>(n)).epsilon(1e-6));
  }
  const std::vector<double> shifted = normals(20000, 1.0, 4);
  CHECK(ks_statistic(shifted, normal_cdf) == doctest::Approx(2 * normal_cdf(0.5) - 1).epsilon(0.05));
  CHECK_THROWS_AS(ks_statistic(std::vector<double>{}, normal_cdf), DomainError);
}

TEST_CASE("two-sample KS") {
  const std::vector<double> a = normals(20000, 0.0, 1), b = normals(20000, 1.0, 2);
  CHECK(std::abs(ks_statistic(a, EmpiricalCdf(b)) - 0.3829249) < 0.02);
  CHECK(ks_statistic(a, EmpiricalCdf(a)) == 0.0);
  std::vector<double> p = a;
  std::reverse(p.begin(), p.end());
  CHECK(ks_statistic(p, EmpiricalCdf(a)) == 0.0);
  // disjoint supports
  CHECK(ks_statistic(std::vector<double>{1, 2}, EmpiricalCdf(std::vector<double>{3, 4, 5})) == 1.0);
  // {0, 1} vs {0.5}: ECDFs differ by 1/2 on [0, 0.5) and [0.5, 1)
  CHECK(ks_statistic(std::vector<double>{0, 1}, EmpiricalCdf(std::vector<double>{0.5})) == 0.5);
}

TEST_CASE("1-D Wasserstein") {
  const std::vector<double> a = normals(500, 0.0, 3);
  std::vector<double> b = a;
  for (auto& x : b) x += 0.7;
  CHECK(wasserstein2_1d(a, b) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(wasserstein2_1d(a, b) == doctest::Approx(wasserstein2_1d(b, a)).epsilon(1e-14));
  // unequal sizes: {0, 1} vs {0, 0.5, 1}
  // quantile functions differ by 0.5 on (1/3, 1/2] and by 0.5 on (1/2, 2/3]
  const double w = wasserstein2_1d(std::vector<double>{0, 1}, std::vector<double>{0, 0.5, 1});
  CHECK(w == doctest::Approx(std::sqrt(0.25 / 3.0)).epsilon(1e-12));
  std::vector<double> rep;
  for (double x : a) rep.insert(rep.end(), {x, x});
  CHECK(wasserstein2_1d(a, rep) < 1e-12);
}

TEST_CASE("sliced Wasserstein") {
  Rng rng(5);
  const Eigen::ArrayXXd a = rng.normal_array(3, 400);
  const Eigen::Vector3d shift(0.3, -0.2, 0.5);
  const Eigen::ArrayXXd b = (a.matrix().colwise() + shift).array();
  const Eigen::MatrixXd dirs = random_directions(3, 32, 9);
  CHECK((dirs.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-14);
  const double expected = (dirs.transpose() * shift).cwiseAbs().mean();
  CHECK(sliced_wasserstein(a, b, 32, 9) == doctest::Approx(expected).epsilon(1e-10));
  CHECK(sliced_wasserstein(a, b, 32, 9) == doctest::Approx(sliced_wasserstein(b, a, 32, 9)).epsilon(1e-12));

  Eigen::ArrayXXd perm = a;
  for (Eigen::Index c = 0; c < a.cols(); ++c) perm.col(c) = a.col(a.cols() - 1 - c);
  CHECK(sliced_wasserstein(a, perm, 32, 9) < 1e-12);

  const Eigen::ArrayXXd x = Rng(11).normal_array(2, 5000), y = Rng(12).normal_array(2, 5000);
  CHECK(sliced_wasserstein(x, y, 64, 1) < 0.05);
  CHECK_THROWS_AS(sliced_wasserstein(x, a, 8, 1), StructuralError);
}

TEST_CASE("nearest neighbours") {
  Rng rng(8);
  const Eigen::ArrayXXd train = rng.normal_array(4, 60), gen = rng.normal_array(4, 7);
  const auto nn = nearest_neighbors(gen, train, 5);
  REQUIRE(nn.size() == 7);
  for (Eigen::Index g = 0; g < gen.cols(); ++g) {
    std::vector<std::pair<double, long>> brute;
    for (Eigen::Index t = 0; t < train.cols(); ++t)
      brute.emplace_back((train.col(t) - gen.col(g)).matrix().norm(), static_cast<long>(t));
    std::sort(brute.begin(), brute.end());
    for (int r = 0; r < 5; ++r) {
      CHECK(nn[static_cast<std::size_t>(g)][static_cast<std::size_t>(r)].index == brute[static_cast<std::size_t>(r)].second);
      CHECK(nn[static_cast<std::size_t>(g)][static_cast<std::size_t>(r)].distance ==
            doctest::Approx(brute[static_cast<std::size_t>(r)].first).epsilon(1e-12));
    }
  }
  Eigen::ArrayXXd dup(2, 4);
  dup << 1, 0, 1, 0,
         1, 0, 1, 0;
  const auto tie = nearest_neighbors(Eigen::ArrayXXd::Constant(2, 1, 0.5), dup, 4);
  CHECK(tie[0][0].index == 0);
  CHECK(tie[0][1].index == 1);
  CHECK(tie[0][2].index == 2);
  CHECK(tie[0][3].index == 3);
  const auto exact = nearest_neighbors(train.col(17), train, 1);
  CHECK(exact[0][0].index == 17);
  CHECK(exact[0][0].distance == 0.0);
  CHECK(nearest_neighbors(gen, train.leftCols(2), 5)[0].size() == 2);
}

TEST_CASE("evaluation report") {
  const LogNormalParams p = LogNormalParams::isotropic(2, 0.0, 0.5);
  const Eigen::ArrayXXd ref = lognormal_sample(p, 3000, 1).values;
  EvalOptions opt;
  opt.projections = 8;
  opt.neighbors = 2;
  opt.neighbor_queries = 5;
  const EvalReport same = evaluate(ref, ref, opt);
  CHECK(same.ks_log_marginals == std::vector<double>{0.0, 0.0});
  CHECK(same.ks_projections.size() == 8);
  for (double d : same.ks_projections) CHECK(d == 0.0);
  CHECK(*same.sliced_wasserstein < 1e-12);
  CHECK(*same.memorized_fraction == 1.0);
  CHECK(same.log_moment_errors[1].mean_error == 0.0);

  const Eigen::ArrayXXd other = lognormal_sample(p, 3000, 2).values;
  const EvalReport r = evaluate(other, ref, opt);
  for (double d : r.ks_log_marginals) CHECK(d < 1.36 * std::sqrt(2.0 / 3000));
  CHECK(*r.memorized_fraction == 0.0);
  const nlohmann::json j = r.to_json();
  CHECK(j["ks_log_marginals"].size() == 2);
  CHECK(j["nearest_neighbors"].size() == 5);
  CHECK(j["nearest_neighbors"][0]["neighbors"].size() == 2);
  CHECK(j.contains("sliced_wasserstein"));

  const auto path = std::filesystem::temp_directory_path() / "gbm_unit_eval_report.csv";
  r.write_csv(path);
  const std::string csv = read_text(path);
  CHECK(csv.rfind("metric,index,value\n", 0) == 0);
  CHECK(csv.find("ks_log_marginal,1,") != std::string::npos);
  CHECK(csv.find("memorized_fraction,0,0") != std::string::npos);
  CHECK_THROWS_AS(evaluate(other.topRows(1), ref, opt), StructuralError);
}
