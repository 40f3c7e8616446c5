#include "cals/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "cals/errors.hpp"
#include "cals/losses.hpp"
#include "cals/metrics.hpp"
#include "cals/penalty.hpp"

namespace cals {
namespace {

std::string trim(const std::string& text) {
  const char* ws = " \t\r\n";
  const std::size_t first = text.find_first_not_of(ws);
  if (first == std::string::npos) return "";
  const std::size_t last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

double parse_double_value(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double parsed = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw config_error(key + ": expected a real number, got '" + value + "'");
  }
}

std::uint64_t parse_u64_value(const std::string& key, const std::string& value) {
  try {
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    std::size_t pos = 0;
    const unsigned long long parsed = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw config_error(key + ": expected a non-negative integer, got '" + value + "'");
  }
}

std::size_t parse_size_value(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64_value(key, value));
}

bool parse_bool_value(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw config_error(key + ": expected true or false, got '" + value + "'");
}

// One config key: how to set it from text and how to print its canonical
// value. The table below is the single source of truth for key names,
// parse order, and serialization order.
struct KeyEntry {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string& value, const std::string& key)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using DoubleRef = std::function<double&(ExperimentConfig&)>;
using SizeRef = std::function<std::size_t&(ExperimentConfig&)>;
using BoolRef = std::function<bool&(ExperimentConfig&)>;
using U64Ref = std::function<std::uint64_t&(ExperimentConfig&)>;
using StringRef = std::function<std::string&(ExperimentConfig&)>;

ExperimentConfig& mut(const ExperimentConfig& config) {
  return const_cast<ExperimentConfig&>(config);
}

KeyEntry double_key(const char* name, DoubleRef ref) {
  return {name,
          [ref](ExperimentConfig& c, const std::string& v, const std::string& k) {
            ref(c) = parse_double_value(k, v);
          },
          [ref](const ExperimentConfig& c) { return format_double(ref(mut(c))); }};
}

KeyEntry size_key(const char* name, SizeRef ref) {
  return {name,
          [ref](ExperimentConfig& c, const std::string& v, const std::string& k) {
            ref(c) = parse_size_value(k, v);
          },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(mut(c))); }};
}

KeyEntry bool_key(const char* name, BoolRef ref) {
  return {name,
          [ref](ExperimentConfig& c, const std::string& v, const std::string& k) {
            ref(c) = parse_bool_value(k, v);
          },
          [ref](const ExperimentConfig& c) { return ref(mut(c)) ? "true" : "false"; }};
}

KeyEntry u64_key(const char* name, U64Ref ref) {
  return {name,
          [ref](ExperimentConfig& c, const std::string& v, const std::string& k) {
            ref(c) = parse_u64_value(k, v);
          },
          [ref](const ExperimentConfig& c) { return std::to_string(ref(mut(c))); }};
}

KeyEntry string_key(const char* name, StringRef ref) {
  return {name,
          [ref](ExperimentConfig& c, const std::string& v, const std::string&) { ref(c) = v; },
          [ref](const ExperimentConfig& c) { return ref(mut(c)); }};
}

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = [] {
    std::vector<KeyEntry> keys;

    keys.push_back({"dataset.kind",
                    [](ExperimentConfig& c, const std::string& v, const std::string& k) {
                      if (v != "balanced" && v != "longtail") {
                        throw config_error(k + ": expected balanced or longtail, got '" + v +
                                           "'");
                      }
                      c.dataset.kind = v;
                    },
                    [](const ExperimentConfig& c) { return c.dataset.kind; }});
    keys.push_back(size_key("dataset.num_classes",
                            [](ExperimentConfig& c) -> std::size_t& { return c.dataset.num_classes; }));
    keys.push_back(size_key("dataset.samples_per_class", [](ExperimentConfig& c) -> std::size_t& {
      return c.dataset.samples_per_class;
    }));
    keys.push_back(size_key("dataset.max_count",
                            [](ExperimentConfig& c) -> std::size_t& { return c.dataset.max_count; }));
    keys.push_back(double_key("dataset.imbalance_ratio", [](ExperimentConfig& c) -> double& {
      return c.dataset.imbalance_ratio;
    }));
    keys.push_back(size_key("dataset.dim",
                            [](ExperimentConfig& c) -> std::size_t& { return c.dataset.dim; }));
    keys.push_back(double_key("dataset.separation", [](ExperimentConfig& c) -> double& {
      return c.dataset.separation;
    }));
    keys.push_back(double_key("dataset.noise_sigma", [](ExperimentConfig& c) -> double& {
      return c.dataset.noise_sigma;
    }));
    keys.push_back(double_key("dataset.train_fraction", [](ExperimentConfig& c) -> double& {
      return c.dataset.train_fraction;
    }));
    keys.push_back(double_key("dataset.val_fraction", [](ExperimentConfig& c) -> double& {
      return c.dataset.val_fraction;
    }));
    keys.push_back(double_key("dataset.test_fraction", [](ExperimentConfig& c) -> double& {
      return c.dataset.test_fraction;
    }));
    keys.push_back(bool_key("dataset.stratified",
                            [](ExperimentConfig& c) -> bool& { return c.dataset.stratified; }));
    keys.push_back(bool_key("dataset.balanced_validation", [](ExperimentConfig& c) -> bool& {
      return c.dataset.balanced_validation;
    }));
    keys.push_back(size_key("dataset.val_per_class", [](ExperimentConfig& c) -> std::size_t& {
      return c.dataset.val_per_class;
    }));
    keys.push_back(size_key("dataset.test_per_class", [](ExperimentConfig& c) -> std::size_t& {
      return c.dataset.test_per_class;
    }));
    keys.push_back(u64_key("dataset.seed",
                           [](ExperimentConfig& c) -> std::uint64_t& { return c.dataset.seed; }));

    keys.push_back({"model.hidden_widths",
                    [](ExperimentConfig& c, const std::string& v, const std::string& k) {
                      std::vector<std::size_t> widths;
                      std::stringstream parts(v);
                      std::string token;
                      while (std::getline(parts, token, ',')) {
                        token = trim(token);
                        if (token.empty()) {
                          throw config_error(k + ": empty width in '" + v + "'");
                        }
                        const std::size_t width = parse_size_value(k, token);
                        if (width < 1) throw config_error(k + ": widths must be >= 1");
                        widths.push_back(width);
                      }
                      c.model.hidden_widths = widths;
                    },
                    [](const ExperimentConfig& c) {
                      std::string out;
                      for (std::size_t i = 0; i < c.model.hidden_widths.size(); ++i) {
                        if (i > 0) out += ',';
                        out += std::to_string(c.model.hidden_widths[i]);
                      }
                      return out;
                    }});

    keys.push_back({"training.loss",
                    [](ExperimentConfig& c, const std::string& v, const std::string& k) {
                      const auto kind = loss_kind_from_string(v);
                      if (!kind) {
                        throw config_error(k + ": unknown loss '" + v +
                                           "' (expected ce, ls, fl, flsd, ecp, mbls, "
                                           "cals_alm, or cals_hr)");
                      }
                      c.training.loss.kind = *kind;
                    },
                    [](const ExperimentConfig& c) { return to_string(c.training.loss.kind); }});
    keys.push_back(size_key("training.epochs",
                            [](ExperimentConfig& c) -> std::size_t& { return c.training.epochs; }));
    keys.push_back(size_key("training.batch_size", [](ExperimentConfig& c) -> std::size_t& {
      return c.training.batch_size;
    }));
    keys.push_back(double_key("training.step_size", [](ExperimentConfig& c) -> double& {
      return c.training.step_size;
    }));
    keys.push_back(double_key("training.momentum", [](ExperimentConfig& c) -> double& {
      return c.training.momentum;
    }));
    keys.push_back(double_key("training.margin", [](ExperimentConfig& c) -> double& {
      return c.training.loss.margin;
    }));
    keys.push_back({"training.penalty",
                    [](ExperimentConfig& c, const std::string& v, const std::string& k) {
                      const auto kind = penalty_kind_from_string(v);
                      if (!kind) {
                        throw config_error(k + ": unknown penalty '" + v +
                                           "' (expected phr, p2, or p3)");
                      }
                      c.training.loss.penalty = *kind;
                    },
                    [](const ExperimentConfig& c) { return to_string(c.training.loss.penalty); }});
    keys.push_back(double_key("training.smoothing_alpha", [](ExperimentConfig& c) -> double& {
      return c.training.loss.smoothing_alpha;
    }));
    keys.push_back(double_key("training.focal_gamma", [](ExperimentConfig& c) -> double& {
      return c.training.loss.focal_gamma;
    }));
    keys.push_back(double_key("training.ecp_weight", [](ExperimentConfig& c) -> double& {
      return c.training.loss.ecp_weight;
    }));
    keys.push_back(double_key("training.mbls_weight", [](ExperimentConfig& c) -> double& {
      return c.training.loss.mbls_weight;
    }));
    keys.push_back(double_key("training.initial_lambda", [](ExperimentConfig& c) -> double& {
      return c.training.initial_lambda;
    }));
    keys.push_back(double_key("training.initial_rho", [](ExperimentConfig& c) -> double& {
      return c.training.initial_rho;
    }));
    keys.push_back(double_key("training.gamma",
                              [](ExperimentConfig& c) -> double& { return c.training.gamma; }));
    keys.push_back(double_key("training.improvement_tau", [](ExperimentConfig& c) -> double& {
      return c.training.improvement_tau;
    }));
    keys.push_back(size_key("training.rho_update_period", [](ExperimentConfig& c) -> std::size_t& {
      return c.training.rho_update_period;
    }));
    keys.push_back(double_key("training.safeguard_lo", [](ExperimentConfig& c) -> double& {
      return c.training.safeguard_lo;
    }));
    keys.push_back(double_key("training.safeguard_hi", [](ExperimentConfig& c) -> double& {
      return c.training.safeguard_hi;
    }));
    keys.push_back(double_key("training.hr_mu",
                              [](ExperimentConfig& c) -> double& { return c.training.hr_mu; }));
    keys.push_back(double_key("training.hr_tau",
                              [](ExperimentConfig& c) -> double& { return c.training.hr_tau; }));
    keys.push_back(u64_key("training.seed",
                           [](ExperimentConfig& c) -> std::uint64_t& { return c.training.seed; }));

    keys.push_back(size_key("evaluation.ece_bins", [](ExperimentConfig& c) -> std::size_t& {
      return c.evaluation.ece_bins;
    }));
    keys.push_back(size_key("evaluation.reliability_bins", [](ExperimentConfig& c) -> std::size_t& {
      return c.evaluation.reliability_bins;
    }));
    keys.push_back(string_key("evaluation.temperature_grid", [](ExperimentConfig& c) -> std::string& {
      return c.evaluation.temperature_grid;
    }));

    keys.push_back(string_key("output.directory", [](ExperimentConfig& c) -> std::string& {
      return c.output.directory;
    }));
    keys.push_back(bool_key("output.write_checkpoint", [](ExperimentConfig& c) -> bool& {
      return c.output.write_checkpoint;
    }));
    keys.push_back(bool_key("output.write_dataset", [](ExperimentConfig& c) -> bool& {
      return c.output.write_dataset;
    }));
    return keys;
  }();
  return table;
}

const KeyEntry* find_key(const std::string& name) {
  for (const KeyEntry& entry : key_table()) {
    if (name == entry.name) return &entry;
  }
  return nullptr;
}

void apply_line(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const KeyEntry* entry = find_key(key);
  if (entry == nullptr) throw config_error("unknown key '" + key + "'");
  entry->set(config, value, key);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                         line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error("line " + std::to_string(line_no) + ": empty key");
    }
    try {
      apply_line(config, key, value);
    } catch (const config_error& e) {
      throw config_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_config(config);
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config_text(buffer.str());
  } catch (const config_error& e) {
    throw config_error(path + ": " + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const KeyEntry& entry : key_table()) {
    out += entry.name;
    out += " = ";
    out += entry.get(config);
    out += '\n';
  }
  return out;
}

void apply_override(ExperimentConfig& config, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos) {
    throw config_error("override '" + spec + "': expected key=value");
  }
  const std::string key = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  if (key.empty()) throw config_error("override '" + spec + "': empty key");
  apply_line(config, key, value);
}

void validate_config(const ExperimentConfig& config) {
  const DatasetSection& ds = config.dataset;
  if (ds.kind != "balanced" && ds.kind != "longtail") {
    throw config_error("dataset.kind: expected balanced or longtail, got '" + ds.kind + "'");
  }
  if (ds.num_classes < 2) throw config_error("dataset.num_classes must be >= 2");
  if (ds.dim < 1) throw config_error("dataset.dim must be >= 1");
  if (ds.samples_per_class < 1) throw config_error("dataset.samples_per_class must be >= 1");
  if (ds.max_count < 1) throw config_error("dataset.max_count must be >= 1");
  if (!(ds.imbalance_ratio >= 1.0)) throw config_error("dataset.imbalance_ratio must be >= 1");
  if (!(ds.separation > 0.0)) throw config_error("dataset.separation must be > 0");
  if (!(ds.noise_sigma >= 0.0)) throw config_error("dataset.noise_sigma must be >= 0");
  for (double f : {ds.train_fraction, ds.val_fraction, ds.test_fraction}) {
    if (!(f >= 0.0)) throw config_error("dataset split fractions must be >= 0");
  }
  const double sum = ds.train_fraction + ds.val_fraction + ds.test_fraction;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw config_error("dataset split fractions must sum to 1, got " + format_double(sum));
  }
  if (ds.val_per_class < 1) throw config_error("dataset.val_per_class must be >= 1");
  if (ds.test_per_class < 1) throw config_error("dataset.test_per_class must be >= 1");

  for (std::size_t width : config.model.hidden_widths) {
    if (width < 1) throw config_error("model.hidden_widths: widths must be >= 1");
  }

  try {
    validate_train_config(config.training);
  } catch (const std::domain_error& e) {
    throw config_error(std::string("training.") + e.what());
  }

  if (config.evaluation.ece_bins < 1) throw config_error("evaluation.ece_bins must be >= 1");
  if (config.evaluation.reliability_bins < 1) {
    throw config_error("evaluation.reliability_bins must be >= 1");
  }
  parse_temperature_grid(config.evaluation.temperature_grid);
}

std::vector<double> parse_temperature_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream in(spec);
  std::string token;
  while (std::getline(in, token, ':')) parts.push_back(trim(token));
  if (parts.size() != 3) {
    throw config_error("evaluation.temperature_grid: expected lo:hi:step, got '" + spec + "'");
  }
  const double lo = parse_double_value("evaluation.temperature_grid", parts[0]);
  const double hi = parse_double_value("evaluation.temperature_grid", parts[1]);
  const double step = parse_double_value("evaluation.temperature_grid", parts[2]);
  try {
    return make_temperature_grid(lo, hi, step);
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("evaluation.temperature_grid: ") + e.what());
  }
}

SplitDataset build_dataset(const DatasetSection& section) {
  const std::size_t k = section.num_classes;
  const std::vector<std::size_t> train_counts =
      section.kind == "balanced"
          ? std::vector<std::size_t>(k, section.samples_per_class)
          : long_tailed_counts(k, section.max_count, section.imbalance_ratio);

  if (section.balanced_validation) {
    // Separate seeds keep the three generations independent draws from the
    // same mixture.
    SplitDataset out;
    out.train = gaussian_mixture(k, train_counts, section.dim, section.separation,
                                 section.noise_sigma, section.seed);
    out.validation = gaussian_mixture(k, std::vector<std::size_t>(k, section.val_per_class),
                                      section.dim, section.separation, section.noise_sigma,
                                      section.seed + 1);
    out.test = gaussian_mixture(k, std::vector<std::size_t>(k, section.test_per_class),
                                section.dim, section.separation, section.noise_sigma,
                                section.seed + 2);
    return out;
  }

  const Dataset pool = gaussian_mixture(k, train_counts, section.dim, section.separation,
                                        section.noise_sigma, section.seed);
  return split(pool, section.train_fraction, section.val_fraction, section.test_fraction,
               section.stratified, section.seed + 1);
}

}  // namespace cals
