#include "stml/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "stml/config.hpp"
#include "stml/csv.hpp"
#include "stml/error.hpp"

namespace stml {

namespace {

constexpr const char* kMagic = "stml-checkpoint v1";

std::string encode_le(const std::vector<double>& values) {
  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  return bytes;
}

std::vector<double> decode_le(const std::string& bytes) {
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

std::filesystem::path save_checkpoint(const ModelParams& params, const CheckpointInfo& info,
                                      const std::filesystem::path& stem) {
  std::filesystem::path manifest = stem;
  manifest += ".manifest";
  std::filesystem::path binary = stem;
  binary += ".bin";

  std::string text = std::string(kMagic) + "\n";
  text += std::string("role=") + to_string(params.role) + "\n";
  text += "d_in=" + std::to_string(params.dims.d_in) + "\n";
  text += "hidden=" + join_sizes(params.dims.hidden) + "\n";
  text += "d_f=" + std::to_string(params.dims.d_f) + "\n";
  text += "d_g=" + std::to_string(params.dims.d_g) + "\n";
  text += "parameter_count=" + std::to_string(params.parameter_count()) + "\n";
  text += "config_hash=" + info.config_hash + "\n";
  text += "seed=" + std::to_string(info.seed) + "\n";
  text += "epoch=" + std::to_string(info.epoch) + "\n";
  text += "parameters=" + binary.filename().string() + "\n";

  // Parameters first so a manifest never points at a missing file.
  write_file_atomic(binary, encode_le(params.flatten()));
  write_file_atomic(manifest, text);
  return manifest;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  const std::string text = read_file(manifest_path);
  const auto lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != kMagic)
    throw ParseError(manifest_path.string() + ": not a checkpoint manifest (expected '" + kMagic + "')", 1);
  std::map<std::string, std::string> fields;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(manifest_path.string() + ": expected key=value", l + 1);
    fields[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  auto field = [&](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ParseError(manifest_path.string() + ": missing field '" + key + "'");
    return it->second;
  };
  auto size_field = [&](const std::string& key) {
    return static_cast<std::size_t>(parse_integer(field(key), 0));
  };

  ModelDims dims;
  dims.d_in = size_field("d_in");
  dims.hidden.clear();
  if (!field("hidden").empty())
    for (std::string_view h : split(field("hidden"), ',')) dims.hidden.push_back(static_cast<std::size_t>(parse_integer(h, 0)));
  dims.d_f = size_field("d_f");
  dims.d_g = size_field("d_g");
  const ModelRole role = parse_role(field("role"));
  try {
    dims.validate();
  } catch (const ConfigError& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  const std::filesystem::path binary = manifest_path.parent_path() / field("parameters");
  const std::string bytes = read_file(binary);
  const std::size_t expected = size_field("parameter_count");
  if (expected != ModelParams::zeros(dims, role).parameter_count())
    throw ParseError(manifest_path.string() + ": parameter_count does not match the layer shapes");
  if (bytes.size() != expected * 8)
    throw ParseError(binary.string() + ": expected " + std::to_string(expected * 8) + " bytes, found " +
                     std::to_string(bytes.size()));

  LoadedCheckpoint out;
  out.params = ModelParams::unflatten(dims, role, decode_le(bytes));
  out.info.config_hash = field("config_hash");
  out.info.seed = static_cast<std::uint64_t>(parse_integer(field("seed"), 0));
  out.info.epoch = size_field("epoch");
  return out;
}

}  // namespace stml
