#include "gbm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

#include "gbm/io.hpp"

namespace gbm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  return out;
}

long parse_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("config: " + key + " is empty");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += fmt(xs[i]);
    else
      s += std::to_string(xs[i]);
  }
  return s;
}

std::string toy_kind_name(ToyKind k) {
  return k == ToyKind::lognormal_1d ? "lognormal-1d" : "lognormal-mixture-2d";
}

struct Binding {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define GBM_NUM(sec, name, field, parser)                                                        \
  Binding {                                                                                      \
    sec, name, [](const RunConfig& c) { return fmt(static_cast<double>(c.field)); },            \
        [](RunConfig& c, const std::string& v) {                                                 \
          c.field = static_cast<decltype(c.field)>(parser(std::string(sec) + "." + name, v));    \
        }                                                                                        \
  }
#define GBM_INT(sec, name, field)                                                                  \
  Binding {                                                                                        \
    sec, name, [](const RunConfig& c) { return std::to_string(c.field); },                        \
        [](RunConfig& c, const std::string& v) {                                                   \
          c.field = static_cast<decltype(c.field)>(parse_long(std::string(sec) + "." + name, v)); \
        }                                                                                          \
  }
#define GBM_STR(sec, name, field)                                                              \
  Binding {                                                                                    \
    sec, name, [](const RunConfig& c) { return std::string(c.field); },                       \
        [](RunConfig& c, const std::string& v) { c.field = v; }                                \
  }

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      GBM_STR("run", "command", command),
      Binding{"run", "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
              [](RunConfig& c, const std::string& v) { c.seed = parse_u64("run.seed", v); }},
      Binding{"run", "out", [](const RunConfig& c) { return c.out.string(); },
              [](RunConfig& c, const std::string& v) { c.out = v; }},

      GBM_NUM("sde", "sigma", sde.sigma, parse_double),
      GBM_NUM("sde", "delta", sde.delta, parse_double),
      GBM_INT("sde", "n_steps", sde.n_steps),
      Binding{"sde", "mu",
              [](const RunConfig& c) {
                return c.mu_auto ? std::string("auto")
                                 : join(std::vector<double>(c.sde.mu.data(), c.sde.mu.data() + c.sde.mu.size()));
              },
              [](RunConfig& c, const std::string& v) {
                if (v == "auto") {
                  c.mu_auto = true;
                } else {
                  const auto xs = parse_list("sde.mu", v);
                  c.sde.mu = Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
                  c.mu_auto = false;
                }
              }},
      Binding{"sde", "drift_variant", [](const RunConfig& c) { return to_string(c.sde.drift_variant); },
              [](RunConfig& c, const std::string& v) { c.sde.drift_variant = parse_drift_variant(v); }},
      Binding{"sde", "clamp_exponent", [](const RunConfig& c) { return std::string(c.sde.clamp_exponent ? "true" : "false"); },
              [](RunConfig& c, const std::string& v) { c.sde.clamp_exponent = parse_bool("sde.clamp_exponent", v); }},
      GBM_NUM("sde", "exponent_limit", sde.exponent_limit, parse_double),

      Binding{"sampler", "variant", [](const RunConfig& c) { return to_string(c.sampler); },
              [](RunConfig& c, const std::string& v) { c.sampler = parse_sampler_variant(v); }},
      GBM_NUM("sampler", "chi", anneal.chi, parse_double),
      GBM_INT("sampler", "inner_steps", anneal.inner_steps),
      GBM_NUM("sampler", "kappa0", anneal.kappa0, parse_double),
      GBM_NUM("sampler", "step", anneal.step, parse_double),
      GBM_INT("sampler", "n", sample_count),
      GBM_STR("sampler", "score", score),
      GBM_INT("sampler", "max_clamped_steps", max_clamped_steps),
      GBM_INT("sampler", "snapshots", image_snapshots),

      Binding{"dataset", "source",
              [](const RunConfig& c) { return std::string(c.dataset_source == DatasetSource::toy ? "toy" : "idx"); },
              [](RunConfig& c, const std::string& v) {
                if (v == "toy") c.dataset_source = DatasetSource::toy;
                else if (v == "idx") c.dataset_source = DatasetSource::idx;
                else throw ConfigError("config: dataset.source must be toy or idx, got '" + v + "'");
              }},
      Binding{"dataset", "kind", [](const RunConfig& c) { return toy_kind_name(c.toy_kind); },
              [](RunConfig& c, const std::string& v) {
                if (v == "lognormal-1d") c.toy_kind = ToyKind::lognormal_1d;
                else if (v == "lognormal-mixture-2d") c.toy_kind = ToyKind::lognormal_mixture_2d;
                else throw ConfigError("config: unknown dataset.kind '" + v + "'");
              }},
      GBM_STR("dataset", "weights", toy_weights),
      GBM_STR("dataset", "means", toy_means),
      GBM_STR("dataset", "sigmas", toy_sigmas),
      GBM_INT("dataset", "n", toy_n),
      Binding{"dataset", "seed", [](const RunConfig& c) { return std::to_string(c.toy_seed); },
              [](RunConfig& c, const std::string& v) { c.toy_seed = parse_u64("dataset.seed", v); }},
      Binding{"dataset", "images", [](const RunConfig& c) { return c.idx_images.string(); },
              [](RunConfig& c, const std::string& v) { c.idx_images = v; }},
      Binding{"dataset", "labels", [](const RunConfig& c) { return c.idx_labels.string(); },
              [](RunConfig& c, const std::string& v) { c.idx_labels = v; }},
      GBM_INT("dataset", "crop", crop),
      GBM_INT("dataset", "downsample", downsample),
      GBM_INT("dataset", "limit", image_limit),

      Binding{"network", "hidden", [](const RunConfig& c) { return join(c.hidden); },
              [](RunConfig& c, const std::string& v) {
                c.hidden.clear();
                for (const auto& item : split(v, ',')) c.hidden.push_back(parse_long("network.hidden", item));
              }},
      GBM_INT("network", "time_frequencies", time_frequencies),

      Binding{"train", "optimizer",
              [](const RunConfig& c) { return std::string(c.optimizer == OptimizerKind::adamw ? "adamw" : "egd"); },
              [](RunConfig& c, const std::string& v) {
                if (v == "adamw") c.optimizer = OptimizerKind::adamw;
                else if (v == "egd") c.optimizer = OptimizerKind::egd;
                else throw ConfigError("config: train.optimizer must be adamw or egd, got '" + v + "'");
              }},
      GBM_NUM("train", "lr", adam.lr, parse_double),
      GBM_NUM("train", "beta1", adam.beta1, parse_double),
      GBM_NUM("train", "beta2", adam.beta2, parse_double),
      GBM_NUM("train", "eps", adam.eps, parse_double),
      GBM_NUM("train", "weight_decay", adam.weight_decay, parse_double),
      GBM_NUM("train", "lr_floor", lr_floor, parse_double),
      GBM_NUM("train", "egd_eta", egd_eta, parse_double),
      GBM_INT("train", "iterations", iterations),
      GBM_INT("train", "batch_size", batch_size),
      GBM_INT("train", "checkpoint_every", checkpoint_every),
      Binding{"train", "resume", [](const RunConfig& c) { return c.resume.string(); },
              [](RunConfig& c, const std::string& v) { c.resume = v; }},
      GBM_NUM("train", "target_clip", target_clip, parse_double),

      GBM_INT("simulate", "record_every", record_every),
      GBM_INT("simulate", "record_samples", record_samples),
      GBM_INT("simulate", "histogram_bins", histogram_bins),

      Binding{"validate", "samples", [](const RunConfig& c) { return c.validate_samples.string(); },
              [](RunConfig& c, const std::string& v) { c.validate_samples = v; }},
      Binding{"validate", "reference", [](const RunConfig& c) { return c.validate_reference.string(); },
              [](RunConfig& c, const std::string& v) { c.validate_reference = v; }},
      GBM_INT("validate", "projections", projections),
      GBM_INT("validate", "neighbors", neighbors),
      GBM_INT("validate", "neighbor_queries", neighbor_queries),

      GBM_INT("egd_demo", "steps", demo_steps),
      GBM_NUM("egd_demo", "eta", demo_eta, parse_double),
      GBM_INT("egd_demo", "inputs", demo_inputs),
      GBM_INT("egd_demo", "hidden", demo_hidden),
      GBM_INT("egd_demo", "samples", demo_samples),
      Binding{"egd_demo", "baseline", [](const RunConfig& c) { return std::string(c.demo_baseline ? "true" : "false"); },
              [](RunConfig& c, const std::string& v) { c.demo_baseline = parse_bool("egd_demo.baseline", v); }},
  };
  return table;
}

#undef GBM_NUM
#undef GBM_INT
#undef GBM_STR

const Binding& find_binding(const std::string& section, const std::string& key) {
  for (const auto& b : bindings())
    if (section == b.section && key == b.key) return b;
  throw ConfigError("config: unknown key '" + section + "." + key + "'");
}

std::string semicolons_to_commas(std::string s) {
  std::replace(s.begin(), s.end(), ';', ',');
  return s;
}

}  // namespace

void RunConfig::finalize() {
  if (mu_auto) sde.mu = Eigen::VectorXd::Constant(1, 0.5 * sde.sigma * sde.sigma);
}

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::string section;
  std::stringstream ss(text);
  std::string raw;
  long lineno = 0;
  while (std::getline(ss, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": key outside a section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    std::string value = line.substr(eq + 1);
    // Inline comment: '#' or ';' preceded by whitespace.
    for (std::size_t i = 1; i < value.size(); ++i)
      if ((value[i] == '#' || value[i] == ';') && std::isspace(static_cast<unsigned char>(value[i - 1]))) {
        value.resize(i);
        break;
      }
    doc.set(section, key, trim(value));
  }
  return doc;
}

std::string IniDocument::serialize() const {
  std::string out;
  for (const auto& [section, kv] : data_) {
    if (!out.empty()) out += '\n';
    out += '[' + section + "]\n";
    for (const auto& [k, v] : kv) out += k + " = " + v + '\n';
  }
  return out;
}

void IniDocument::set(const std::string& section, const std::string& key, std::string value) {
  data_[section][key] = std::move(value);
}

std::optional<std::string> IniDocument::get(const std::string& section, const std::string& key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

RunConfig RunConfig::from_ini(const IniDocument& doc) {
  RunConfig c;
  for (const auto& [section, kv] : doc.sections())
    for (const auto& [key, value] : kv) find_binding(section, key).set(c, value);
  c.finalize();
  return c;
}

IniDocument RunConfig::to_ini() const {
  IniDocument doc;
  for (const auto& b : bindings()) doc.set(b.section, b.key, b.get(*this));
  return doc;
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  find_binding(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)))
      .set(*this, trim(assignment.substr(eq + 1)));
  finalize();
}

ToyDatasetSpec RunConfig::toy_spec() const {
  ToyDatasetSpec spec;
  spec.kind = toy_kind;
  spec.n = toy_n;
  spec.seed = toy_seed;
  const auto weights = parse_list("dataset.weights", semicolons_to_commas(toy_weights));
  const auto means = split(toy_means, ';');
  const auto sigmas = parse_list("dataset.sigmas", semicolons_to_commas(toy_sigmas));
  if (means.size() != weights.size() || sigmas.size() != weights.size())
    throw ConfigError("config: dataset.weights, dataset.means and dataset.sigmas must list the same number of components");
  spec.components.clear();
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const auto m = parse_list("dataset.means", means[j]);
    spec.components.push_back(
        {weights[j], {Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size())), sigmas[j]}});
  }
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return spec;
}

void RunConfig::validate() const {
  try {
    sde.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (sde.n_steps < 2) throw ConfigError("config: sde.n_steps must be >= 2");
  if (anneal.inner_steps < 1 || !(anneal.step > 0.0) || !(anneal.chi > 0.0) || anneal.kappa0 < 0.0)
    throw ConfigError("config: sampler needs inner_steps >= 1, step > 0, chi > 0, kappa0 >= 0");
  if (sample_count < 1) throw ConfigError("config: sampler.n must be >= 1");
  if (iterations < 0 || batch_size < 1 || checkpoint_every < 1)
    throw ConfigError("config: train needs iterations >= 0, batch_size >= 1, checkpoint_every >= 1");
  if (time_frequencies < 0) throw ConfigError("config: network.time_frequencies must be >= 0");
  for (auto w : hidden)
    if (w < 1) throw ConfigError("config: network.hidden widths must be >= 1");
  if (record_every < 1 || record_samples < 0 || histogram_bins < 1)
    throw ConfigError("config: simulate needs record_every >= 1, record_samples >= 0, histogram_bins >= 1");
  if (projections < 1 || neighbors < 0) throw ConfigError("config: validate needs projections >= 1, neighbors >= 0");
  if (downsample < 1 || crop < 0 || image_limit < 0)
    throw ConfigError("config: dataset needs downsample >= 1, crop >= 0, limit >= 0");
  if (demo_steps < 0 || !(demo_eta > 0.0) || demo_inputs < 1 || demo_hidden < 1 || demo_samples < 1)
    throw ConfigError("config: egd_demo needs steps >= 0, eta > 0 and positive sizes");
  if (dataset_source == DatasetSource::toy) (void)toy_spec();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError&) {
    throw;
  }
  return RunConfig::from_ini(IniDocument::parse(text));
}

std::string to_string(DriftVariant v) { return v == DriftVariant::derived ? "derived" : "alg1"; }

DriftVariant parse_drift_variant(const std::string& s) {
  if (s == "derived") return DriftVariant::derived;
  if (s == "alg1") return DriftVariant::alg1;
  throw ConfigError("drift variant must be derived or alg1, got '" + s + "'");
}

std::string to_string(SamplerVariant v) { return v == SamplerVariant::plain ? "plain" : "annealed"; }

SamplerVariant parse_sampler_variant(const std::string& s) {
  if (s == "plain") return SamplerVariant::plain;
  if (s == "annealed") return SamplerVariant::annealed;
  throw ConfigError("sampler must be plain or annealed, got '" + s + "'");
}

}  // namespace gbm
