// Command-line entry point: toy data generation, training, translation,
// scoring, the word-by-word baseline and BPE utilities.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or format
// error, 3 numeric failure.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>

#include "unmt/evaluation.hpp"
#include "unmt/pipeline.hpp"
#include "unmt/synthetic.hpp"

using namespace unmt;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

std::vector<Sentence> read_lines(const std::string& path) { return read_corpus(path); }

void write_lines(const std::string& path, const std::vector<Sentence>& lines) { write_corpus(path, lines); }

struct GenToy {
  LangPairSpec spec;
  std::size_t train = 10000;
  std::size_t test = 500;
  std::size_t parallel = 0;
  std::string out = "toy";
};

int gen_toy(const GenToy& g) {
  const SyntheticPair pair(g.spec);
  const SyntheticCorpora corpora = pair.generate(g.train, g.test, g.parallel);
  for (const auto& p : write_toy_pair(g.out, pair, corpora)) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

struct Train {
  std::string preset = "paper";
  std::string config;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> parallel;
};

int train(const Train& t) {
  RunConfig c = RunConfig::preset(t.preset);
  if (!t.config.empty()) c.apply_file(t.config);
  for (const auto& [k, v] : t.overrides) c.set(k, v);
  if (!t.parallel.empty()) {
    c.parallel_l1 = t.parallel[0];
    c.parallel_l2 = t.parallel[1];
  }
  check_inputs(c);

  const TrainingData data = load_training_data(c);
  for (int l = 0; l < 2; ++l) {
    std::cerr << lang_tag(static_cast<Lang>(l)) << ": vocabulary " << data.vocab[l].size() << ", "
              << data.corpora.mono[l].size() << " monolingual sentences";
    if (data.filtered_mono[l]) std::cerr << " (" << data.filtered_mono[l] << " over max_length dropped)";
    if (!data.missing_embeddings[l].empty())
      std::cerr << ", " << data.missing_embeddings[l].size() << " words without embeddings";
    std::cerr << '\n';
  }
  if (!data.corpora.parallel[0].empty()) std::cerr << "parallel pairs: " << data.corpora.parallel[0].size() << '\n';

  std::filesystem::create_directories(c.output_dir);
  {
    std::ofstream cfg(std::filesystem::path(c.output_dir) / "config.txt");
    cfg << c.to_text();
  }
  std::ofstream metrics(std::filesystem::path(c.output_dir) / "metrics.log", std::ios::app);
  if (!metrics) throw IoError("cannot write metrics log in " + c.output_dir);
  const TrainRun run = run_training(c, data, &metrics, true);
  std::cerr << "updates: " << run.result.updates << ", empty backtranslations replaced by <unk>: "
            << run.result.empty_backtranslations << '\n'
            << "final model: " << (std::filesystem::path(c.output_dir) / "model.bin").string() << '\n';
  return kOk;
}

struct Translate {
  std::string checkpoint;
  std::string input;
  std::string output;
  std::string direction = "l1-l2";
  std::size_t beam = 12;
  std::size_t max_len = 0;
};

int translate(const Translate& t) {
  const auto [src, tgt] = parse_direction(t.direction);
  const LoadedCheckpoint ck = load_checkpoint(t.checkpoint);
  const std::vector<Sentence> input = read_lines(t.input);
  write_lines(t.output, translate_sentences(ck.model, ck.info, input, src, tgt, t.beam, t.max_len));
  return kOk;
}

struct Eval {
  std::string hyp;
  std::string ref;
  std::string checkpoint;
  std::string source;
  std::string direction = "l1-l2";
};

int eval(const Eval& e) {
  const std::vector<Sentence> refs = read_lines(e.ref);
  if (!e.hyp.empty()) std::cout << format_report(bleu(read_lines(e.hyp), refs)) << '\n';
  if (!e.checkpoint.empty()) {
    if (e.source.empty()) throw ConfigError("--checkpoint needs --source for perplexity");
    const auto [src, tgt] = parse_direction(e.direction);
    const LoadedCheckpoint ck = load_checkpoint(e.checkpoint);
    std::vector<Ids> s, r;
    const std::vector<Sentence> sources = read_lines(e.source);
    if (sources.size() != refs.size()) throw ConfigError("--source and --ref have different line counts");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      s.push_back(ck.info.vocab[lang_index(src)].encode(preprocess(sources[i], ck.info.bpe, src)));
      r.push_back(ck.info.vocab[lang_index(tgt)].encode(preprocess(refs[i], ck.info.bpe, tgt)));
    }
    std::printf("perplexity = %.4f\n", perplexity(ck.model, s, src, r, tgt));
  }
  return kOk;
}

struct Baseline {
  std::string l1_emb;
  std::string l2_emb;
  std::string input;
  std::string output;
  std::string direction = "l1-l2";
};

int baseline(const Baseline& b) {
  const auto [src, tgt] = parse_direction(b.direction);
  const CrossLingualSpace space = load_embedding_space(b.l1_emb, b.l2_emb);
  std::vector<Sentence> out;
  for (const Sentence& s : read_lines(b.input)) out.push_back(word_by_word_translate(s, space, src, tgt));
  write_lines(b.output, out);
  return kOk;
}

struct Bpe {
  std::string input;
  std::string output;
  std::string codes;
  std::size_t ops = 50000;
  bool undo = false;
};

int learn(const Bpe& b) {
  const MergeTable table = learn_bpe(word_frequencies(read_lines(b.input)), b.ops);
  table.save(b.output);
  std::cerr << table.size() << " merges learned\n";
  return kOk;
}

int apply(const Bpe& b) {
  std::vector<Sentence> out;
  if (b.undo) {
    for (const Sentence& s : read_lines(b.input)) out.push_back(undo_bpe(s));
  } else {
    if (b.codes.empty()) throw ConfigError("--codes is required unless --undo is given");
    const MergeTable table = MergeTable::load(b.codes);
    for (const Sentence& s : read_lines(b.input)) out.push_back(apply_bpe(s, table));
  }
  write_lines(b.output, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised neural machine translation from monolingual corpora"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "unmt 1.0");

  GenToy g;
  auto* gen = app.add_subcommand("gen-toy", "Generate a synthetic language pair with gold embeddings");
  gen->add_option("--vocab", g.spec.vocab, "Word types per language")->capture_default_str()->check(CLI::Range(2, 1000000));
  gen->add_option("--train", g.train, "Monolingual sentences per language")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--test", g.test, "Parallel test pairs")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--parallel", g.parallel, "Parallel training pairs")->capture_default_str();
  gen->add_option("--seed", g.spec.seed, "Random seed")->capture_default_str();
  gen->add_option("--zipf", g.spec.zipf, "Zipf exponent of token frequencies")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--min-len", g.spec.min_len, "Shortest sentence")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--max-len", g.spec.max_len, "Longest sentence")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--classes", g.spec.word_classes, "Positional word classes (1 = i.i.d. tokens)")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--dim", g.spec.emb_dim, "Embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--perturbation", g.spec.perturbation, "Std-dev of noise on L2 vectors")->capture_default_str()->check(CLI::NonNegativeNumber);
  gen->add_flag("!--no-reorder", g.spec.reorder, "Keep L1 word order on the L2 side");
  gen->add_flag("!--identity-lexicon", g.spec.permute_lexicon, "Map word i to word i");
  gen->add_option("--out", g.out, "Output directory")->capture_default_str();

  Train t;
  const RunConfig defaults = RunConfig::paper();
  auto* tr = app.add_subcommand("train", "Train a model; flags override the config file, which overrides the preset");
  tr->add_option("--preset", t.preset, "paper or desk")->capture_default_str()->check(CLI::IsMember({"paper", "desk"}));
  tr->add_option("--config", t.config, "key = value configuration file");
  tr->add_option("--parallel", t.parallel, "Parallel L1 and L2 files (semi and supervised modes)")->expected(2);
  std::map<std::string, std::string> raw;
  for (const std::string& key : RunConfig::keys()) {
    raw[key];
    tr->add_option(flag_name(key), raw[key], "Config key " + key)->default_str(defaults.get(key));
  }

  Translate tl;
  auto* trans = app.add_subcommand("translate", "Translate a file line by line");
  trans->add_option("--checkpoint", tl.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  trans->add_option("--input", tl.input, "Input file")->required()->check(CLI::ExistingFile);
  trans->add_option("--output", tl.output, "Output file")->required();
  trans->add_option("--direction", tl.direction, "l1-l2 or l2-l1")->capture_default_str();
  trans->add_option("--beam", tl.beam, "Beam width; 0 decodes greedily")->capture_default_str();
  trans->add_option("--max-len", tl.max_len, "Output length cap; 0 means 2 x source + 10")->capture_default_str();

  Eval e;
  auto* ev = app.add_subcommand("eval", "Corpus BLEU, and perplexity when a checkpoint is given");
  ev->add_option("--hyp", e.hyp, "Hypothesis file")->check(CLI::ExistingFile);
  ev->add_option("--ref", e.ref, "Reference file")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", e.checkpoint, "Model for perplexity")->check(CLI::ExistingFile);
  ev->add_option("--source", e.source, "Source side for perplexity")->check(CLI::ExistingFile);
  ev->add_option("--direction", e.direction, "l1-l2 or l2-l1")->capture_default_str();

  Baseline b;
  auto* base = app.add_subcommand("baseline", "Word-by-word nearest-neighbour translation");
  base->add_option("--l1-emb", b.l1_emb, "L1 embeddings")->required()->check(CLI::ExistingFile);
  base->add_option("--l2-emb", b.l2_emb, "L2 embeddings")->required()->check(CLI::ExistingFile);
  base->add_option("--input", b.input, "Input file")->required()->check(CLI::ExistingFile);
  base->add_option("--output", b.output, "Output file")->required();
  base->add_option("--direction", b.direction, "l1-l2 or l2-l1")->capture_default_str();

  Bpe lb;
  auto* learn_cmd = app.add_subcommand("learn-bpe", "Learn BPE merges from a corpus");
  learn_cmd->add_option("--input", lb.input, "Corpus")->required()->check(CLI::ExistingFile);
  learn_cmd->add_option("--output", lb.output, "Merge table")->required();
  learn_cmd->add_option("--ops", lb.ops, "Number of merges")->capture_default_str();

  Bpe ab;
  auto* apply_cmd = app.add_subcommand("apply-bpe", "Segment a corpus with BPE merges, or undo a segmentation");
  apply_cmd->add_option("--codes", ab.codes, "Merge table")->check(CLI::ExistingFile);
  apply_cmd->add_option("--input", ab.input, "Corpus")->required()->check(CLI::ExistingFile);
  apply_cmd->add_option("--output", ab.output, "Output corpus")->required();
  apply_cmd->add_flag("--undo", ab.undo, "Join '@@' continuations instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kUsage;
  }

  try {
    if (*gen) return gen_toy(g);
    if (*tr) {
      for (const auto& [k, v] : raw)
        if (tr->count(flag_name(k))) t.overrides[k] = v;
      return train(t);
    }
    if (*trans) return translate(tl);
    if (*ev) return eval(e);
    if (*base) return baseline(b);
    if (*learn_cmd) return learn(lb);
    if (*apply_cmd) return apply(ab);
  } catch (const ConfigError& ex) {
    std::cerr << "configuration error: " << ex.what() << '\n';
    return kUsage;
  } catch (const NumericError& ex) {
    std::cerr << "numeric failure: " << ex.what() << '\n';
    return kNumeric;
  } catch (const ContractError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kData;
  }
  return kUsage;
}
