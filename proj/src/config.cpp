#include "ftsum/config.hpp"

#include "ftsum/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace ftsum {

namespace {

constexpr KeySpec kKeys[] = {
    // model
    {"embed_dim", KeyType::Int, "200"},
    {"hidden_dim", KeyType::Int, "400"},
    {"fusion", KeyType::String, "gated"},
    {"dropout", KeyType::Real, "0.5"},
    // training
    {"lr", KeyType::Real, "0.001"},
    {"batch_size", KeyType::Int, "32"},
    {"clip_mode", KeyType::String, "value"},
    {"clip_lo", KeyType::Real, "-5"},
    {"clip_hi", KeyType::Real, "5"},
    {"clip_norm", KeyType::Real, "5"},
    {"validate_every", KeyType::Int, "2000"},
    {"patience", KeyType::Int, "10"},
    {"max_epochs", KeyType::Int, "10"},
    {"max_steps", KeyType::Int, "0"},
    {"seed", KeyType::Int, "1"},
    // vocabulary
    {"min_freq", KeyType::Int, "5"},
    {"max_vocab", KeyType::Int, "0"},
    // decoding
    {"beam", KeyType::Int, "6"},
    {"max_len", KeyType::Int, "20"},
    // fact extraction
    {"reporting_filter", KeyType::Bool, "true"},
    {"labels", KeyType::String, "nsubj,nsubjpass,csubj,csubjpass,dobj,amod,nummod,compound,advmod,nmod:tmod,obl:tmod"},
    // evaluation
    {"top_k", KeyType::Int, "100"},
    {"stem", KeyType::Bool, "false"},
    {"fusion_check", KeyType::String, "both"},
    {"quiet", KeyType::Bool, "false"},
    // files
    {"conll", KeyType::Path, ""},
    {"triples", KeyType::Path, ""},
    {"train", KeyType::Path, ""},
    {"train_facts", KeyType::Path, ""},
    {"dev", KeyType::Path, ""},
    {"dev_facts", KeyType::Path, ""},
    {"source_vocab", KeyType::Path, ""},
    {"target_vocab", KeyType::Path, ""},
    {"embeddings", KeyType::Path, ""},
    {"checkpoint", KeyType::Path, ""},
    {"log", KeyType::Path, ""},
    {"input", KeyType::Path, ""},
    {"facts", KeyType::Path, ""},
    {"output", KeyType::Path, ""},
    {"gate_trace", KeyType::Path, ""},
    {"candidates", KeyType::Path, ""},
    {"references", KeyType::Path, ""},
    {"annotations", KeyType::Path, ""},
};

const KeySpec* find_spec(std::string_view key) {
  for (const auto& s : kKeys)
    if (s.key == key) return &s;
  return nullptr;
}

const KeySpec& spec_or_throw(std::string_view key) {
  const auto* s = find_spec(key);
  if (!s) throw ParseError("unknown config key '" + std::string(key) + "'");
  return *s;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<long> parse_long(std::string_view v) {
  long out = 0;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) return std::nullopt;
  return out;
}

std::optional<double> parse_real(std::string_view v) {
  double out = 0;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) return std::nullopt;
  return out;
}

std::optional<bool> parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  return std::nullopt;
}

void check_value(const KeySpec& spec, std::string_view value) {
  bool ok = true;
  switch (spec.type) {
    case KeyType::Int: ok = parse_long(value).has_value(); break;
    case KeyType::Real: ok = parse_real(value).has_value(); break;
    case KeyType::Bool: ok = parse_bool(value).has_value(); break;
    case KeyType::String:
    case KeyType::Path: break;
  }
  if (!ok)
    throw ParseError("config key '" + std::string(spec.key) + "': cannot parse '" + std::string(value) + "'");
}

}  // namespace

std::span<const KeySpec> config_keys() { return kKeys; }

Config::Config() {
  for (const auto& s : kKeys) values_.emplace(std::string(s.key), std::string(s.default_value));
}

void Config::set(std::string_view key, std::string_view value) {
  const auto& spec = spec_or_throw(key);
  value = trim(value);
  check_value(spec, value);
  values_.find(key)->second = std::string(value);
}

bool Config::has_key(std::string_view key) const { return find_spec(key) != nullptr; }

const std::string& Config::raw(std::string_view key) const {
  spec_or_throw(key);
  return values_.find(key)->second;
}

long Config::get_int(std::string_view key) const {
  if (spec_or_throw(key).type != KeyType::Int) throw Error("config key '" + std::string(key) + "' is not an integer");
  return *parse_long(raw(key));
}

double Config::get_real(std::string_view key) const {
  const auto t = spec_or_throw(key).type;
  if (t != KeyType::Real && t != KeyType::Int) throw Error("config key '" + std::string(key) + "' is not numeric");
  return *parse_real(raw(key));
}

bool Config::get_bool(std::string_view key) const {
  if (spec_or_throw(key).type != KeyType::Bool) throw Error("config key '" + std::string(key) + "' is not a flag");
  return *parse_bool(raw(key));
}

const std::string& Config::get_string(std::string_view key) const { return raw(key); }

std::optional<std::filesystem::path> Config::get_path(std::string_view key) const {
  if (spec_or_throw(key).type != KeyType::Path) throw Error("config key '" + std::string(key) + "' is not a path");
  const auto& v = raw(key);
  if (v.empty()) return std::nullopt;
  return std::filesystem::path(v);
}

std::filesystem::path Config::require_path(std::string_view key) const {
  auto p = get_path(key);
  if (!p) throw Error("missing required path '" + std::string(key) + "'");
  return *p;
}

model::ModelConfig Config::model_config() const {
  model::ModelConfig m;
  m.embed_dim = static_cast<int>(get_int("embed_dim"));
  m.hidden_dim = static_cast<int>(get_int("hidden_dim"));
  m.fusion = model::parse_fusion(get_string("fusion"));
  m.dropout = get_real("dropout");
  return m;
}

model::TrainConfig Config::train_config() const {
  model::TrainConfig t;
  t.lr = get_real("lr");
  t.batch_size = static_cast<int>(get_int("batch_size"));
  const auto& mode = get_string("clip_mode");
  if (mode == "value") t.clip_mode = model::ClipMode::Value;
  else if (mode == "norm") t.clip_mode = model::ClipMode::Norm;
  else throw ParseError("clip_mode must be 'value' or 'norm', got '" + mode + "'");
  t.clip_lo = get_real("clip_lo");
  t.clip_hi = get_real("clip_hi");
  t.clip_norm = get_real("clip_norm");
  t.validate_every = get_int("validate_every");
  t.patience = static_cast<int>(get_int("patience"));
  t.max_epochs = static_cast<int>(get_int("max_epochs"));
  t.max_steps = get_int("max_steps");
  const long seed = get_int("seed");
  if (seed < 0) throw ParseError("seed must be non-negative");
  t.seed = static_cast<std::uint64_t>(seed);
  return t;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& s : kKeys) out += std::string(s.key) + "=" + values_.find(s.key)->second + "\n";
  return out;
}

void apply_config_text(Config& cfg, std::istream& in, std::string_view origin) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(std::string(origin) + ":" + std::to_string(lineno) + ": expected key=value");
    try {
      cfg.set(trim(v.substr(0, eq)), v.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError(std::string(origin) + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

Config parse_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
  Config cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error("cannot open config file " + file->string());
    apply_config_text(cfg, in, file->string());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ParseError("override '" + o + "' is not key=value");
    cfg.set(trim(std::string_view(o).substr(0, eq)), std::string_view(o).substr(eq + 1));
  }
  return cfg;
}

}  // namespace ftsum
