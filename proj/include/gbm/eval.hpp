#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace gbm {

/// Right-continuous empirical CDF of a finite sample.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::span<const double> samples);
  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
};

/// sup_x |F_n(x) - F(x)| for a continuous reference CDF. Needs n >= 1;
/// throws DomainError for an empty sample.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& reference_cdf);

/// Exact sup distance between the sample's ECDF and a step-function reference.
double ks_statistic(std::span<const double> samples, const EmpiricalCdf& reference);

/// Squared-cost 1-D Wasserstein distance between two empirical laws.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

/// n unit vectors in R^d (columns), deterministic in seed.
Eigen::MatrixXd random_directions(Eigen::Index dim, long n, std::uint64_t seed);

/// Mean over random unit projections of the 1-D W2 distance between the
/// projected samples (columns of a and b).
double sliced_wasserstein(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b, long n_projections,
                          std::uint64_t seed);

struct Neighbor {
  long index = 0;
  double distance = 0.0;
};

/// For each generated column, the j nearest training columns by Euclidean
/// distance, ascending; ties broken by training index.
std::vector<std::vector<Neighbor>> nearest_neighbors(const Eigen::ArrayXXd& generated,
                                                     const Eigen::ArrayXXd& train, long j);

struct MomentError {
  double mean_error = 0.0;
  double variance_error = 0.0;
};

struct EvalReport {
  std::vector<double> ks_log_marginals;
  std::vector<double> ks_projections;
  std::vector<MomentError> log_moment_errors;
  std::optional<double> sliced_wasserstein;
  std::vector<std::vector<Neighbor>> neighbors;
  std::optional<double> memorized_fraction;
  double memorization_epsilon = 0.0;

  nlohmann::json to_json() const;
  /// One row per metric: metric,index,value.
  void write_csv(const std::filesystem::path& path) const;
};

struct EvalOptions {
  long projections = 64;
  std::uint64_t seed = 1;
  long neighbors = 0;
  long neighbor_queries = 16;
  double memorization_epsilon = 1e-6;
};

/// KS on each log-marginal (two-sample), KS on random projections of the
/// log-states, log-moment errors, sliced W2 and the optional neighbour table.
EvalReport evaluate(const Eigen::ArrayXXd& samples, const Eigen::ArrayXXd& reference,
                    const EvalOptions& options = {});

}  // namespace gbm
