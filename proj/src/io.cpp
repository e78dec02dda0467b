#include "gbm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gbm {

std::string format_decimal(double value, int significant) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  if (value == 0.0) return "0";
  const int magnitude = static_cast<int>(std::floor(std::log10(std::abs(value))));
  int decimals = std::max(0, significant - 1 - magnitude);
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  // Rounding can carry into a new leading digit; trim trailing zeros only.
  if (s.find('.') != std::string::npos) {
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < batch.dim(); ++i) out << (i ? ",x" : "x") << i;
  out << '\n';
  for (Eigen::Index c = 0; c < batch.size(); ++c) {
    for (Eigen::Index i = 0; i < batch.dim(); ++i) out << (i ? "," : "") << format_decimal(batch.values(i, c));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

SampleBatch read_batch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line[0] == 'x') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": no samples");
  SampleBatch b;
  b.values.resize(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (std::size_t i = 0; i < rows[c].size(); ++i)
      b.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[c][i];
  return b;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj, long max_samples) {
  auto out = open_out(path);
  out << "step,sample,coordinate,value\n";
  for (const auto& state : traj.states) {
    const Eigen::Index n = std::min<Eigen::Index>(max_samples, state.size());
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index i = 0; i < state.dim(); ++i)
        out << state.time_index << ',' << c << ',' << i << ',' << format_decimal(state.values(i, c)) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_log_histogram_csv(const std::filesystem::path& path, const Eigen::ArrayXXd& values, int bins) {
  const Eigen::ArrayXXd l = values.log();
  double lo = l.minCoeff(), hi = l.maxCoeff();
  if (hi <= lo) hi = lo + 1.0;
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    auto b = static_cast<long>((l(i) - lo) / (hi - lo) * bins);
    b = std::clamp<long>(b, 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b)
    out << format_decimal(lo + (hi - lo) * b / bins) << ',' << format_decimal(lo + (hi - lo) * (b + 1) / bins)
        << ',' << counts[static_cast<std::size_t>(b)] << '\n';
}

void write_pgm(const std::filesystem::path& path, const Eigen::ArrayXXd& images, long height, long width,
               long count) {
  if (images.rows() != height * width) throw StructuralError("write_pgm: image size mismatch");
  const long n = std::min<long>(count, static_cast<long>(images.cols()));
  if (n < 1) throw DomainError("write_pgm: no images");
  auto out = open_out(path);
  out << "P5\n" << width * n << ' ' << height << "\n255\n";
  for (long r = 0; r < height; ++r)
    for (long i = 0; i < n; ++i)
      for (long c = 0; c < width; ++c) {
        const double v = std::clamp((images(r * width + c, i) - 1.0) * 255.0, 0.0, 255.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
      }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gbm
