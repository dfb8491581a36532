#include "unmt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace unmt {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'U', 'N', 'M', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename I>
  void integer(I v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void string(const std::string& s) {
    integer<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void floats(const std::vector<float>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename I>
  I integer() {
    I v{};
    bytes(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  std::string string() {
    const auto n = integer<std::uint64_t>();
    if (n > (1ULL << 32)) fail("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void floats(std::vector<float>& v) { bytes(reinterpret_cast<char*>(v.data()), v.size() * sizeof(float)); }
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& why) const { throw FormatError(source_ + ": " + why); }

 private:
  std::istream& in_;
  std::string source_;
};

std::string config_text(const ModelConfig& c, const std::map<std::string, std::string>& meta) {
  std::ostringstream s;
  s.precision(17);
  s << "emb_dim = " << c.emb_dim << "\nhidden_dim = " << c.hidden_dim << "\nlayers = " << c.layers
    << "\nvocab_l1 = " << c.vocab_size[0] << "\nvocab_l2 = " << c.vocab_size[1] << "\ndropout = " << c.dropout
    << "\ninit_range = " << c.init_range << '\n';
  for (const auto& [k, v] : meta) s << "meta." << k << " = " << v << '\n';
  return s.str();
}

void parse_config(const std::string& text, CheckpointInfo& info, const Reader& r) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) r.fail("bad config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key.rfind("meta.", 0) == 0) {
      info.meta[key.substr(5)] = value;
      continue;
    }
    seen.insert(key);
    try {
      ModelConfig& c = info.config;
      if (key == "emb_dim") c.emb_dim = std::stoul(value);
      else if (key == "hidden_dim") c.hidden_dim = std::stoul(value);
      else if (key == "layers") c.layers = std::stoul(value);
      else if (key == "vocab_l1") c.vocab_size[0] = std::stoul(value);
      else if (key == "vocab_l2") c.vocab_size[1] = std::stoul(value);
      else if (key == "dropout") c.dropout = std::stod(value);
      else if (key == "init_range") c.init_range = std::stod(value);
      else r.fail("unknown config key '" + key + "'");
    } catch (const std::logic_error&) {
      r.fail("bad value for '" + key + "'");
    }
  }
  for (const char* k : {"emb_dim", "hidden_dim", "layers", "vocab_l1", "vocab_l2", "dropout", "init_range"})
    if (!seen.count(k)) r.fail(std::string("missing config key '") + k + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TranslationModel<float>& model,
                     const CheckpointInfo& info) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.integer(kVersion);
    w.string(config_text(model.config(), info.meta));
    for (const Vocabulary& v : info.vocab) {
      w.string(v.lang());
      w.integer<std::uint64_t>(v.regular_tokens().size());
      for (const std::string& t : v.regular_tokens()) w.string(t);
    }
    w.integer<std::uint8_t>(info.bpe ? 1 : 0);
    if (info.bpe)
      for (const MergeTable& m : *info.bpe) w.string(m.serialize());
    const auto params = model.parameters();
    w.integer<std::uint64_t>(params.size());
    for (const Parameter<float>* p : params) {
      w.string(p->name);
      w.integer<std::uint32_t>(static_cast<std::uint32_t>(p->shape.size()));
      for (std::size_t d : p->shape) w.integer<std::uint64_t>(d);
      w.floats(p->value);
    }
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Reader r(in, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint (bad magic)");
  const auto version = r.integer<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  CheckpointInfo info;
  parse_config(r.string(), info, r);
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string lang = r.string();
    const auto n = r.integer<std::uint64_t>();
    std::vector<std::string> tokens;
    for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.string());
    info.vocab[l] = Vocabulary::from_tokens(tokens, lang);
    if (info.vocab[l].size() != info.config.vocab_size[l]) r.fail("vocabulary size disagrees with configuration");
  }
  const auto has_bpe = r.integer<std::uint8_t>();
  if (has_bpe > 1) r.fail("bad BPE flag");
  if (has_bpe) {
    std::array<MergeTable, 2> tables;
    for (std::size_t l = 0; l < 2; ++l) tables[l] = MergeTable::deserialize(r.string(), info.vocab[l].lang());
    info.bpe = std::move(tables);
  }

  TranslationModel<float> model(info.config, 0);
  const auto params = model.parameters();
  const auto count = r.integer<std::uint64_t>();
  if (count != params.size())
    r.fail("expected " + std::to_string(params.size()) + " parameters, found " + std::to_string(count));
  for (Parameter<float>* p : params) {
    const std::string name = r.string();
    if (name != p->name) r.fail("expected parameter '" + p->name + "', found '" + name + "'");
    const auto rank = r.integer<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.integer<std::uint64_t>();
    if (shape != p->shape)
      r.fail("parameter '" + name + "' has shape " + shape_string(shape) + ", expected " + shape_string(p->shape));
    r.floats(p->value);
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after the last parameter");
  return {std::move(info), std::move(model)};
}

}  // namespace unmt
