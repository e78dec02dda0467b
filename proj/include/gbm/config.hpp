#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbm/datasets.hpp"
#include "gbm/optim.hpp"
#include "gbm/sampler.hpp"
#include "gbm/sde.hpp"

namespace gbm {

/// Flat key-value text with [sections]. Keys and sections are kept sorted so
/// that serialization is canonical. '#' and ';' start comment lines.
class IniDocument {
 public:
  static IniDocument parse(const std::string& text);
  std::string serialize() const;

  void set(const std::string& section, const std::string& key, std::string value);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  const std::map<std::string, std::map<std::string, std::string>>& sections() const { return data_; }

  bool operator==(const IniDocument&) const = default;

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
};

enum class SamplerVariant { plain, annealed };
enum class OptimizerKind { adamw, egd };
enum class DatasetSource { toy, idx };

struct RunConfig {
  std::string command = "sample";
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  SdeConfig sde = SdeConfig::zero_log_drift();
  /// When true the drift is recomputed as sigma^2/2 whenever sigma changes.
  bool mu_auto = true;

  SamplerVariant sampler = SamplerVariant::annealed;
  AnnealConfig anneal;
  long sample_count = 1000;
  std::string score = "analytic:dataset";
  long max_clamped_steps = 10;
  long image_snapshots = 8;

  DatasetSource dataset_source = DatasetSource::toy;
  ToyKind toy_kind = ToyKind::lognormal_1d;
  /// Components separated by ';', coordinates by ','.
  std::string toy_weights = "1";
  std::string toy_means = "0";
  std::string toy_sigmas = "0.5";
  long toy_n = 10000;
  std::uint64_t toy_seed = 7;
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  long crop = 0;
  long downsample = 1;
  long image_limit = 0;

  std::vector<Eigen::Index> hidden{64, 64};
  int time_frequencies = 16;

  OptimizerKind optimizer = OptimizerKind::adamw;
  AdamWOptions adam{2e-3, 0.9, 0.999, 1e-8, 0.0};
  double lr_floor = 0.05;
  double egd_eta = 1e-3;
  long iterations = 2000;
  long batch_size = 256;
  long checkpoint_every = 500;
  std::filesystem::path resume;
  double target_clip = 1e3;

  long record_every = 50;
  long record_samples = 16;
  int histogram_bins = 50;

  std::filesystem::path validate_samples;
  std::filesystem::path validate_reference;
  long projections = 64;
  long neighbors = 0;
  long neighbor_queries = 16;

  long demo_steps = 2000;
  double demo_eta = 0.05;
  long demo_inputs = 16;
  long demo_hidden = 32;
  long demo_samples = 256;
  bool demo_baseline = false;

  static RunConfig from_ini(const IniDocument& doc);
  IniDocument to_ini() const;

  /// Applies one "section.key=value" override.
  void apply_override(const std::string& assignment);

  /// Recomputes derived fields (mu = sigma^2 / 2 when sde.mu is "auto").
  void finalize();

  void validate() const;

  ToyDatasetSpec toy_spec() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

std::string to_string(DriftVariant v);
DriftVariant parse_drift_variant(const std::string& s);
std::string to_string(SamplerVariant v);
SamplerVariant parse_sampler_variant(const std::string& s);

}  // namespace gbm
