#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "unmt/checkpoint.hpp"
#include "unmt/config.hpp"
#include "unmt/decoding.hpp"
#include "unmt/errors.hpp"

using namespace unmt;
using unmt::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

CheckpointInfo small_info() {
  CheckpointInfo info;
  const std::vector<std::string> w1{"a", "b", "c"}, w2{"x", "y"};
  info.vocab = {Vocabulary::from_tokens(w1, "l1"), Vocabulary::from_tokens(w2, "l2")};
  info.config.emb_dim = 4;
  info.config.hidden_dim = 6;
  info.config.layers = 2;
  info.config.vocab_size = {info.vocab[0].size(), info.vocab[1].size()};
  info.meta["seed"] = "9";
  return info;
}

TranslationModel<float> model_for(const CheckpointInfo& info) {
  TranslationModel<float> m(info.config, 4);
  for (Lang l : {Lang::L1, Lang::L2}) {
    Matrix<float> e(info.config.vocab_size[lang_index(l)], info.config.emb_dim);
    for (std::size_t i = 0; i < e.data.size(); ++i) e.data[i] = 0.1f * static_cast<float>(i % 7) - 0.3f;
    m.set_fixed_embeddings(l, e);
  }
  return m;
}

}  // namespace

TEST_CASE("presets carry the published and the desk hyperparameters") {
  const RunConfig p = RunConfig::paper();
  CHECK(p.emb_dim == 300);
  CHECK(p.hidden_dim == 600);
  CHECK(p.layers == 2);
  CHECK(p.batch_size == 50);
  CHECK(p.learning_rate == 0.0002);
  CHECK(p.dropout == 0.3);
  CHECK(p.beam == 12);
  CHECK(p.vocab_cap == 50000);
  CHECK(p.max_length == 50);
  CHECK(p.iterations == 300000);
  const RunConfig d = RunConfig::desk();
  CHECK(d.hidden_dim == 64);
  CHECK(d.iterations == 1000);
  CHECK(RunConfig::preset("desk") == d);
  CHECK_THROWS_AS(RunConfig::preset("laptop"), ConfigError);
}

TEST_CASE("text form round-trips every key") {
  RunConfig c = RunConfig::desk();
  c.learning_rate = 0.1 + 0.2;
  c.l1_mono = "data/l1 mono.txt";
  c.backtranslation = false;
  c.seed = 18446744073709551615ULL;
  RunConfig back = RunConfig::paper();
  back.apply_text(c.to_text());
  CHECK(back == c);
  for (const std::string& k : RunConfig::keys()) CHECK(back.get(k) == c.get(k));
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("config text accepts comments and reports bad lines") {
  RunConfig c;
  c.apply_text("# model\n\nhidden_dim = 12   \n  batch_size=3\n");
  CHECK(c.hidden_dim == 12);
  CHECK(c.batch_size == 3);
  CHECK_THROWS_WITH_AS(c.apply_text("hidden_dim = 4\nno_such_key = 1\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(c.apply_text("hidden_dim 4\n"), ConfigError);
  CHECK_THROWS_AS(c.set("hidden_dim", "many"), ConfigError);
  CHECK_THROWS_AS(c.set("dropout", "0.5x"), ConfigError);
  CHECK_THROWS_AS(c.set("backtranslation", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.get("nope"), ConfigError);
  CHECK_THROWS_AS(c.apply_file("/nonexistent/unmt.conf"), ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
  auto bad = [](const char* key, const char* value) {
    RunConfig c = RunConfig::desk();
    c.set(key, value);
    return c;
  };
  CHECK_NOTHROW(RunConfig::desk().validate());
  CHECK_THROWS_AS(bad("dropout", "1").validate(), ConfigError);
  CHECK_THROWS_AS(bad("hidden_dim", "0").validate(), ConfigError);
  CHECK_THROWS_AS(bad("learning_rate", "-1").validate(), ConfigError);
  CHECK_THROWS_AS(bad("mode", "weak").validate(), ConfigError);
  CHECK_THROWS_AS(bad("batch_size", "0").validate(), ConfigError);
}

TEST_CASE("config maps onto model and trainer settings") {
  RunConfig c = RunConfig::desk();
  c.mode = "semi";
  const ModelConfig m = c.model_config(10, 20);
  CHECK(m.hidden_dim == 64);
  CHECK(m.vocab_size == std::array<std::size_t, 2>{10, 20});
  CHECK(m.init_range == 0.25);
  const TrainOptions o = c.train_options();
  CHECK(o.schedule.rotation.size() == 6);
  CHECK(o.adam.lr == 0.003);
  CHECK(o.batch_size == 16);
}

TEST_CASE("checkpoints restore the model exactly") {
  TempDir dir("ckpt");
  CheckpointInfo info = small_info();
  info.bpe = std::array<MergeTable, 2>{MergeTable(std::vector<SymbolPair>{{"a", "b"}}, "l1"), MergeTable({}, "l2")};
  const auto m = model_for(info);
  save_checkpoint(dir / "m.bin", m, info);
  const LoadedCheckpoint loaded = load_checkpoint(dir / "m.bin");
  CHECK(loaded.info.config.hidden_dim == 6);
  CHECK(loaded.info.vocab[0].size() == info.vocab[0].size());
  CHECK(loaded.info.vocab[1].token(4) == "x");
  CHECK(loaded.info.meta.at("seed") == "9");
  REQUIRE(loaded.info.bpe.has_value());
  CHECK((*loaded.info.bpe)[0].size() == 1);
  const auto a = m.parameters(), b = loaded.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
    CHECK(a[i]->trainable == b[i]->trainable);
  }
  const Ids src{4, 5, 6};
  CHECK(greedy_decode(m, src, Lang::L1, Lang::L2, 8) == greedy_decode(loaded.model, src, Lang::L1, Lang::L2, 8));
  save_checkpoint(dir / "again.bin", loaded.model, loaded.info);
  CHECK(slurp(dir / "m.bin") == slurp(dir / "again.bin"));
}

TEST_CASE("damaged checkpoints are rejected") {
  TempDir dir("ckpt");
  const CheckpointInfo info = small_info();
  save_checkpoint(dir / "m.bin", model_for(info), info);
  const std::string good = slurp(dir / "m.bin");

  std::string s = good;
  s[0] = 'X';
  write(dir / "magic.bin", s);
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.bin"), FormatError);

  s = good;
  s[8] = 7;
  write(dir / "version.bin", s);
  CHECK_THROWS_AS(load_checkpoint(dir / "version.bin"), FormatError);

  write(dir / "short.bin", good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), FormatError);

  write(dir / "long.bin", good + "!");
  CHECK_THROWS_AS(load_checkpoint(dir / "long.bin"), FormatError);

  // Same tensors under a different configuration: shapes disagree.
  s = good;
  const auto at = s.find("hidden_dim = 6");
  REQUIRE(at != std::string::npos);
  s[at + 13] = '5';
  write(dir / "shape.bin", s);
  CHECK_THROWS_AS(load_checkpoint(dir / "shape.bin"), FormatError);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), IoError);
}
