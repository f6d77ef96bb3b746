#include "stml/config.hpp"

#include <cstdio>

#include "stml/csv.hpp"
#include "stml/error.hpp"

namespace stml {

namespace {

std::size_t to_size(const KeyValueConfig& cfg, const std::string& key) {
  const std::string& text = cfg.get(key);
  try {
    const long long v = parse_integer(text, 0);
    if (v < 0) throw ConfigError(key + " must be non-negative");
    return static_cast<std::size_t>(v);
  } catch (const ParseError&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
}

double to_double(const KeyValueConfig& cfg, const std::string& key) {
  const std::string& text = cfg.get(key);
  try {
    return parse_double(text, 0);
  } catch (const ParseError&) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
}

bool to_bool(const KeyValueConfig& cfg, const std::string& key) {
  const std::string& text = cfg.get(key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::size_t> to_size_list(const KeyValueConfig& cfg, const std::string& key) {
  std::vector<std::size_t> out;
  const std::string& text = cfg.get(key);
  if (trim(text).empty()) return out;
  for (std::string_view part : split(text, ',')) {
    try {
      const long long v = parse_integer(part, 0);
      if (v <= 0) throw ParseError("non-positive");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const ParseError&) {
      throw ConfigError(key + ": expected a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  return out;
}

std::string join(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  const auto lines = split(text, '\n');
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", l + 1);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("empty key", l + 1);
    if (cfg.values_.count(key)) throw ParseError("duplicate key '" + key + "'", l + 1);
    cfg.values_[key] = value;
    cfg.lines_[key] = l + 1;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) {
      const auto line = lines_.count(key) ? lines_.at(key) : 0;
      throw ConfigError("unknown config key '" + key + "'" + (line ? " on line " + std::to_string(line) : ""));
    }
  }
}

const std::set<std::string>& data_keys() {
  static const std::set<std::string> keys{"data.num_classes", "data.samples_per_class", "data.d_in",
                                          "data.class_separation", "data.intra_std", "data.warp", "data.seed"};
  return keys;
}

const std::set<std::string>& run_keys() {
  static const std::set<std::string> keys{
      "model.d_in",         "model.hidden",      "model.d_f",          "model.d_g",
      "train.sigma",        "train.delta",       "train.momentum",     "train.context_k",
      "train.queries",      "train.group_size",  "train.views",        "train.noise_factor",
      "train.epochs",       "train.learning_rate", "train.batches_per_epoch", "train.seed",
      "train.ablate"};
  return keys;
}

const std::set<std::string>& output_keys() {
  static const std::set<std::string> keys{"output.checkpoint_every"};
  return keys;
}

std::set<std::string> all_config_keys() {
  std::set<std::string> keys = data_keys();
  keys.insert(run_keys().begin(), run_keys().end());
  keys.insert(output_keys().begin(), output_keys().end());
  return keys;
}

GeneratorSpec generator_spec_from(const KeyValueConfig& cfg) {
  GeneratorSpec spec;
  spec.num_classes = to_size(cfg, "data.num_classes");
  spec.samples_per_class = to_size(cfg, "data.samples_per_class");
  spec.d_in = to_size(cfg, "data.d_in");
  spec.class_separation = to_double(cfg, "data.class_separation");
  spec.intra_std = to_double(cfg, "data.intra_std");
  spec.warp = to_bool(cfg, "data.warp");
  spec.seed = to_size(cfg, "data.seed");
  spec.validate();
  return spec;
}

RunConfig run_config_from(const KeyValueConfig& cfg) {
  RunConfig c;
  c.dims.d_in = to_size(cfg, "model.d_in");
  c.dims.hidden = to_size_list(cfg, "model.hidden");
  c.dims.d_f = to_size(cfg, "model.d_f");
  c.dims.d_g = to_size(cfg, "model.d_g");
  c.sigma = to_double(cfg, "train.sigma");
  c.delta = to_double(cfg, "train.delta");
  c.momentum = to_double(cfg, "train.momentum");
  c.context_k = to_size(cfg, "train.context_k");
  c.queries = to_size(cfg, "train.queries");
  c.group_size = to_size(cfg, "train.group_size");
  c.views = to_size(cfg, "train.views");
  c.noise_factor = to_double(cfg, "train.noise_factor");
  c.epochs = to_size(cfg, "train.epochs");
  c.learning_rate = to_double(cfg, "train.learning_rate");
  c.batches_per_epoch = to_size(cfg, "train.batches_per_epoch");
  c.seed = to_size(cfg, "train.seed");
  const std::string& ablate = cfg.get("train.ablate");
  if (ablate != "none" && !ablate.empty())
    for (std::string_view name : split(ablate, ',')) c.ablate.enable(std::string(trim(name)));
  c.validate();
  return c;
}

std::string format_generator_spec(const GeneratorSpec& s) {
  std::string out;
  out += "data.num_classes=" + std::to_string(s.num_classes) + "\n";
  out += "data.samples_per_class=" + std::to_string(s.samples_per_class) + "\n";
  out += "data.d_in=" + std::to_string(s.d_in) + "\n";
  out += "data.class_separation=" + format_double(s.class_separation) + "\n";
  out += "data.intra_std=" + format_double(s.intra_std) + "\n";
  out += std::string("data.warp=") + (s.warp ? "true" : "false") + "\n";
  out += "data.seed=" + std::to_string(s.seed) + "\n";
  return out;
}

std::string format_run_config(const RunConfig& c) {
  std::string out;
  out += "model.d_in=" + std::to_string(c.dims.d_in) + "\n";
  out += "model.hidden=" + join(c.dims.hidden) + "\n";
  out += "model.d_f=" + std::to_string(c.dims.d_f) + "\n";
  out += "model.d_g=" + std::to_string(c.dims.d_g) + "\n";
  out += "train.sigma=" + format_double(c.sigma) + "\n";
  out += "train.delta=" + format_double(c.delta) + "\n";
  out += "train.momentum=" + format_double(c.momentum) + "\n";
  out += "train.context_k=" + std::to_string(c.context_k) + "\n";
  out += "train.queries=" + std::to_string(c.queries) + "\n";
  out += "train.group_size=" + std::to_string(c.group_size) + "\n";
  out += "train.views=" + std::to_string(c.views) + "\n";
  out += "train.noise_factor=" + format_double(c.noise_factor) + "\n";
  out += "train.epochs=" + std::to_string(c.epochs) + "\n";
  out += "train.learning_rate=" + format_double(c.learning_rate) + "\n";
  out += "train.batches_per_epoch=" + std::to_string(c.batches_per_epoch) + "\n";
  out += "train.seed=" + std::to_string(c.seed) + "\n";
  out += "train.ablate=" + c.ablate.to_string() + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_run_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stml
