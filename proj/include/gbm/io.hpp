#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gbm/distributions.hpp"
#include "gbm/sde.hpp"

namespace gbm {

/// Plain positional decimal (no exponent) with `significant` significant digits.
std::string format_decimal(double value, int significant = 9);

/// One row per sample (column of batch.values), comma-separated, header
/// "x0,x1,...".
void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch read_batch_csv(const std::filesystem::path& path);

/// Rows step,sample,coordinate,value for the first `max_samples` samples.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, long max_samples);

/// Histogram of log-values: bin_lo,bin_hi,count.
void write_log_histogram_csv(const std::filesystem::path& path, const Eigen::ArrayXXd& values, int bins);

/// 8-bit binary PGM (P5) of the first `count` images tiled in one row;
/// values are mapped [1, 2] -> [0, 255] and clamped.
void write_pgm(const std::filesystem::path& path, const Eigen::ArrayXXd& images, long height, long width,
               long count);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace gbm
