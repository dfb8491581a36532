#include "unmt/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace unmt {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename M>
Field count_field(M RunConfig::*m) {
  return {[m](const RunConfig& c) { return std::to_string(c.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = static_cast<M>(parse_count(k, v)); }};
}

Field real_field(double RunConfig::*m) {
  return {[m](const RunConfig& c) { return format_double(c.*m); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_real(k, v); }};
}

Field text_field(std::string RunConfig::*m) {
  return {[m](const RunConfig& c) { return c.*m; },
          [m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; }};
}

Field bool_field(bool RunConfig::*m) {
  return {[m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"emb_dim", count_field(&RunConfig::emb_dim)},
      {"hidden_dim", count_field(&RunConfig::hidden_dim)},
      {"layers", count_field(&RunConfig::layers)},
      {"dropout", real_field(&RunConfig::dropout)},
      {"init_range", real_field(&RunConfig::init_range)},
      {"mode", text_field(&RunConfig::mode)},
      {"backtranslation", bool_field(&RunConfig::backtranslation)},
      {"batch_size", count_field(&RunConfig::batch_size)},
      {"learning_rate", real_field(&RunConfig::learning_rate)},
      {"clip_norm", real_field(&RunConfig::clip_norm)},
      {"iterations", count_field(&RunConfig::iterations)},
      {"log_every", count_field(&RunConfig::log_every)},
      {"checkpoint_every", count_field(&RunConfig::checkpoint_every)},
      {"seed", count_field(&RunConfig::seed)},
      {"vocab_cap", count_field(&RunConfig::vocab_cap)},
      {"max_length", count_field(&RunConfig::max_length)},
      {"bpe_ops", count_field(&RunConfig::bpe_ops)},
      {"beam", count_field(&RunConfig::beam)},
      {"l1_mono", text_field(&RunConfig::l1_mono)},
      {"l2_mono", text_field(&RunConfig::l2_mono)},
      {"l1_embeddings", text_field(&RunConfig::l1_embeddings)},
      {"l2_embeddings", text_field(&RunConfig::l2_embeddings)},
      {"parallel_l1", text_field(&RunConfig::parallel_l1)},
      {"parallel_l2", text_field(&RunConfig::parallel_l2)},
      {"l1_bpe", text_field(&RunConfig::l1_bpe)},
      {"l2_bpe", text_field(&RunConfig::l2_bpe)},
      {"output_dir", text_field(&RunConfig::output_dir)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::paper() { return RunConfig{}; }

RunConfig RunConfig::desk() {
  RunConfig c;
  c.emb_dim = 32;
  c.hidden_dim = 64;
  c.layers = 2;
  c.batch_size = 16;
  c.vocab_cap = 512;
  c.iterations = 1000;
  c.learning_rate = 0.003;
  c.dropout = 0.1;
  c.init_range = 0.25;
  c.log_every = 100;
  c.checkpoint_every = 500;
  c.bpe_ops = 1000;
  return c;
}

RunConfig RunConfig::preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  try {
    apply_text(s.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ModelConfig RunConfig::model_config(std::size_t vocab_l1, std::size_t vocab_l2) const {
  ModelConfig m;
  m.emb_dim = emb_dim;
  m.hidden_dim = hidden_dim;
  m.layers = layers;
  m.vocab_size = {vocab_l1, vocab_l2};
  m.dropout = dropout;
  m.init_range = init_range;
  return m;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.schedule = TrainingSchedule::for_mode(parse_train_mode(mode), backtranslation, iterations);
  o.batch_size = batch_size;
  o.adam.lr = learning_rate;
  o.clip_norm = clip_norm;
  o.seed = seed;
  o.log_every = log_every;
  o.checkpoint_every = checkpoint_every;
  return o;
}

void RunConfig::validate() const {
  if (emb_dim == 0 || hidden_dim == 0 || layers == 0) throw ConfigError("emb_dim, hidden_dim and layers must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (init_range <= 0.0) throw ConfigError("init_range must be positive");
  parse_train_mode(mode);
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
  if (vocab_cap == 0) throw ConfigError("vocab_cap must be positive");
  if (max_length == 0) throw ConfigError("max_length must be positive");
  if (l1_bpe.empty() != l2_bpe.empty()) throw ConfigError("l1_bpe and l2_bpe must be given together");
}

}  // namespace unmt
