#include "gbm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gbm/errors.hpp"
#include "gbm/io.hpp"
#include "gbm/rng.hpp"

namespace gbm {

EmpiricalCdf::EmpiricalCdf(std::span<const double> samples) : sorted_(samples.begin(), samples.end()) {
  if (sorted_.empty()) throw DomainError("EmpiricalCdf: empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& reference_cdf) {
  if (samples.empty()) throw DomainError("ks_statistic: empty sample");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = reference_cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

double ks_statistic(std::span<const double> samples, const EmpiricalCdf& reference) {
  if (samples.empty()) throw DomainError("ks_statistic: empty sample");
  const EmpiricalCdf own(samples);
  // Both CDFs are step functions; the supremum is attained at a jump point.
  double d = 0.0;
  for (const double x : own.sorted()) d = std::max(d, std::abs(own(x) - reference(x)));
  for (const double x : reference.sorted()) d = std::max(d, std::abs(own(x) - reference(x)));
  return d;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("wasserstein2_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto na = sa.size(), nb = sb.size();
  double acc = 0.0;
  if (na == nb) {
    for (std::size_t i = 0; i < na; ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
    return std::sqrt(acc / static_cast<double>(na));
  }
  // Integrate (F_a^{-1}(u) - F_b^{-1}(u))^2 over the merged quantile breakpoints.
  std::size_t i = 0, j = 0;
  double u = 0.0;
  while (i < na && j < nb) {
    const double ua = static_cast<double>(i + 1) / static_cast<double>(na);
    const double ub = static_cast<double>(j + 1) / static_cast<double>(nb);
    const double next = std::min(ua, ub);
    acc += (next - u) * (sa[i] - sb[j]) * (sa[i] - sb[j]);
    u = next;
    if (ua <= next) ++i;
    if (ub <= next) ++j;
  }
  return std::sqrt(acc);
}

Eigen::MatrixXd random_directions(Eigen::Index dim, long n, std::uint64_t seed) {
  if (dim < 1 || n < 1) throw DomainError("random_directions: need dim >= 1 and n >= 1");
  Rng rng(seed);
  Eigen::MatrixXd u = rng.normal_array(dim, n).matrix();
  for (long c = 0; c < n; ++c) {
    double norm = u.col(c).norm();
    while (norm == 0.0) {
      u.col(c) = rng.normal_array(dim, 1).matrix();
      norm = u.col(c).norm();
    }
    u.col(c) /= norm;
  }
  return u;
}

double sliced_wasserstein(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b, long n_projections,
                          std::uint64_t seed) {
  if (a.rows() != b.rows())
    throw StructuralError("sliced_wasserstein: dimensions differ (" + std::to_string(a.rows()) + " vs " +
                          std::to_string(b.rows()) + ")");
  const Eigen::MatrixXd dirs = random_directions(a.rows(), n_projections, seed);
  const Eigen::MatrixXd pa = dirs.transpose() * a.matrix();
  const Eigen::MatrixXd pb = dirs.transpose() * b.matrix();
  double total = 0.0;
  for (long p = 0; p < n_projections; ++p) {
    const Eigen::VectorXd ra = pa.row(p).transpose(), rb = pb.row(p).transpose();
    total += wasserstein2_1d({ra.data(), static_cast<std::size_t>(ra.size())},
                             {rb.data(), static_cast<std::size_t>(rb.size())});
  }
  return total / static_cast<double>(n_projections);
}

std::vector<std::vector<Neighbor>> nearest_neighbors(const Eigen::ArrayXXd& generated,
                                                     const Eigen::ArrayXXd& train, long j) {
  if (generated.rows() != train.rows()) throw StructuralError("nearest_neighbors: pixel dimensions differ");
  const long keep = std::min<long>(j, static_cast<long>(train.cols()));
  std::vector<std::vector<Neighbor>> out;
  out.reserve(static_cast<std::size_t>(generated.cols()));
  std::vector<Neighbor> all(static_cast<std::size_t>(train.cols()));
  for (Eigen::Index g = 0; g < generated.cols(); ++g) {
    for (Eigen::Index t = 0; t < train.cols(); ++t)
      all[static_cast<std::size_t>(t)] = {static_cast<long>(t),
                                          std::sqrt((train.col(t) - generated.col(g)).square().sum())};
    std::partial_sort(all.begin(), all.begin() + keep, all.end(), [](const Neighbor& l, const Neighbor& r) {
      return l.distance < r.distance || (l.distance == r.distance && l.index < r.index);
    });
    out.emplace_back(all.begin(), all.begin() + keep);
  }
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["ks_log_marginals"] = ks_log_marginals;
  j["ks_projections"] = ks_projections;
  auto& me = j["log_moment_errors"] = nlohmann::json::array();
  for (const auto& m : log_moment_errors) me.push_back({{"mean", m.mean_error}, {"variance", m.variance_error}});
  j["sliced_wasserstein"] = sliced_wasserstein ? nlohmann::json(*sliced_wasserstein) : nlohmann::json();
  auto& nn = j["nearest_neighbors"] = nlohmann::json::array();
  for (std::size_t g = 0; g < neighbors.size(); ++g) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& n : neighbors[g]) row.push_back({{"index", n.index}, {"distance", n.distance}});
    nn.push_back({{"generated", g}, {"neighbors", row}});
  }
  if (memorized_fraction) {
    j["memorized_fraction"] = *memorized_fraction;
    j["memorization_epsilon"] = memorization_epsilon;
  }
  return j;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out << "metric,index,value\n";
  auto row = [&](const char* m, std::size_t i, double v) { out << m << ',' << i << ',' << format_decimal(v) << '\n'; };
  for (std::size_t i = 0; i < ks_log_marginals.size(); ++i) row("ks_log_marginal", i, ks_log_marginals[i]);
  for (std::size_t i = 0; i < ks_projections.size(); ++i) row("ks_projection", i, ks_projections[i]);
  for (std::size_t i = 0; i < log_moment_errors.size(); ++i) {
    row("log_mean_error", i, log_moment_errors[i].mean_error);
    row("log_variance_error", i, log_moment_errors[i].variance_error);
  }
  if (sliced_wasserstein) row("sliced_wasserstein", 0, *sliced_wasserstein);
  for (std::size_t g = 0; g < neighbors.size(); ++g)
    if (!neighbors[g].empty()) row("nn_rank1_distance", g, neighbors[g].front().distance);
  if (memorized_fraction) row("memorized_fraction", 0, *memorized_fraction);
  if (!out) throw IoError("failed writing " + path.string());
}

EvalReport evaluate(const Eigen::ArrayXXd& samples, const Eigen::ArrayXXd& reference, const EvalOptions& options) {
  if (samples.rows() != reference.rows())
    throw StructuralError("evaluate: sample dimension " + std::to_string(samples.rows()) +
                          " differs from reference dimension " + std::to_string(reference.rows()));
  if (samples.cols() < 1 || reference.cols() < 1) throw DomainError("evaluate: empty batch");
  EvalReport r;
  const Eigen::ArrayXXd ls = samples.log(), lr = reference.log();
  for (Eigen::Index i = 0; i < ls.rows(); ++i) {
    const Eigen::VectorXd a = ls.row(i).transpose(), b = lr.row(i).transpose();
    const std::span<const double> sa{a.data(), static_cast<std::size_t>(a.size())};
    const std::span<const double> sb{b.data(), static_cast<std::size_t>(b.size())};
    r.ks_log_marginals.push_back(ks_statistic(sa, EmpiricalCdf(sb)));
    const double ma = a.mean(), mb = b.mean();
    const double va = (a.array() - ma).square().mean(), vb = (b.array() - mb).square().mean();
    r.log_moment_errors.push_back({std::abs(ma - mb), std::abs(va - vb)});
  }
  if (ls.rows() > 1) {
    const Eigen::MatrixXd dirs = random_directions(ls.rows(), options.projections, options.seed);
    const Eigen::MatrixXd pa = dirs.transpose() * ls.matrix(), pb = dirs.transpose() * lr.matrix();
    for (long p = 0; p < options.projections; ++p) {
      const Eigen::VectorXd a = pa.row(p).transpose(), b = pb.row(p).transpose();
      r.ks_projections.push_back(ks_statistic({a.data(), static_cast<std::size_t>(a.size())},
                                              EmpiricalCdf({b.data(), static_cast<std::size_t>(b.size())})));
    }
  }
  r.sliced_wasserstein = sliced_wasserstein(samples, reference, options.projections, options.seed);
  if (options.neighbors > 0) {
    const Eigen::Index q = std::min<Eigen::Index>(options.neighbor_queries, samples.cols());
    r.neighbors = nearest_neighbors(samples.leftCols(q), reference, options.neighbors);
    long close = 0;
    for (const auto& row : r.neighbors)
      if (!row.empty() && row.front().distance < options.memorization_epsilon) ++close;
    r.memorized_fraction = static_cast<double>(close) / static_cast<double>(std::max<Eigen::Index>(q, 1));
    r.memorization_epsilon = options.memorization_epsilon;
  }
  return r;
}

}  // namespace gbm
