#include "unmt/pipeline.hpp"

#include <fstream>

#include "unmt/decoding.hpp"

namespace unmt {

namespace {

void require_file(const std::string& path, const std::string& key) {
  if (path.empty()) throw ConfigError(key + " is required");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw ConfigError(key + ": cannot read '" + path + "'");
}

std::vector<Sentence> load(const std::string& path, const std::optional<std::array<MergeTable, 2>>& bpe, Lang l) {
  std::vector<Sentence> out;
  for (const Sentence& s : read_corpus(path)) out.push_back(preprocess(s, bpe, l));
  return out;
}

std::vector<Ids> encode_all(const Vocabulary& v, const std::vector<Sentence>& corpus) {
  std::vector<Ids> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus) out.push_back(v.encode(s));
  return out;
}

}  // namespace

void check_inputs(const RunConfig& c) {
  c.validate();
  const TrainMode mode = parse_train_mode(c.mode);
  if (mode != TrainMode::Supervised) {
    require_file(c.l1_mono, "l1_mono");
    require_file(c.l2_mono, "l2_mono");
  }
  if (mode != TrainMode::Unsupervised) {
    require_file(c.parallel_l1, "parallel_l1");
    require_file(c.parallel_l2, "parallel_l2");
  }
  require_file(c.l1_embeddings, "l1_embeddings");
  require_file(c.l2_embeddings, "l2_embeddings");
  if (!c.l1_bpe.empty()) {
    require_file(c.l1_bpe, "l1_bpe");
    require_file(c.l2_bpe, "l2_bpe");
  }
}

Sentence preprocess(const Sentence& s, const std::optional<std::array<MergeTable, 2>>& bpe, Lang l) {
  return bpe ? apply_bpe(s, (*bpe)[lang_index(l)]) : s;
}

TrainingData load_training_data(const RunConfig& c) {
  check_inputs(c);
  const TrainMode mode = parse_train_mode(c.mode);
  TrainingData d;
  if (!c.l1_bpe.empty()) d.bpe = std::array<MergeTable, 2>{MergeTable::load(c.l1_bpe, "l1"), MergeTable::load(c.l2_bpe, "l2")};

  std::array<std::vector<Sentence>, 2> mono, parallel;
  if (mode != TrainMode::Supervised) {
    const std::array<std::string, 2> paths{c.l1_mono, c.l2_mono};
    for (int l = 0; l < 2; ++l) {
      std::vector<Sentence> raw = load(paths[l], d.bpe, static_cast<Lang>(l));
      mono[l] = length_filter(raw, c.max_length);
      d.filtered_mono[l] = raw.size() - mono[l].size();
      if (mono[l].empty()) throw EmptyInputError(paths[l] + ": no sentences left after length filtering");
    }
  }
  if (mode != TrainMode::Unsupervised) {
    std::vector<Sentence> p1 = load(c.parallel_l1, d.bpe, Lang::L1);
    std::vector<Sentence> p2 = load(c.parallel_l2, d.bpe, Lang::L2);
    if (p1.size() != p2.size()) throw ConfigError("parallel corpus sides have different line counts");
    for (std::size_t i = 0; i < p1.size(); ++i) {
      if (p1[i].empty() || p2[i].empty() || p1[i].size() > c.max_length || p2[i].size() > c.max_length) {
        ++d.filtered_parallel;
        continue;
      }
      parallel[0].push_back(std::move(p1[i]));
      parallel[1].push_back(std::move(p2[i]));
    }
    if (parallel[0].empty()) throw EmptyInputError("parallel corpus: no pairs left after length filtering");
  }

  const std::array<std::string, 2> emb{c.l1_embeddings, c.l2_embeddings};
  for (int l = 0; l < 2; ++l) {
    std::vector<Sentence> all = mono[l];
    all.insert(all.end(), parallel[l].begin(), parallel[l].end());
    d.vocab[l] = Vocabulary::build(all, c.vocab_cap, lang_tag(static_cast<Lang>(l)));
    d.corpora.mono[l] = encode_all(d.vocab[l], mono[l]);
    d.corpora.parallel[l] = encode_all(d.vocab[l], parallel[l]);
    LoadedEmbeddings e = load_embeddings(emb[l], d.vocab[l], c.emb_dim);
    d.embeddings[l] = std::move(e.matrix);
    d.missing_embeddings[l] = std::move(e.missing);
  }
  return d;
}

TrainRun run_training(const RunConfig& c, const TrainingData& d, std::ostream* metrics, bool write_checkpoints) {
  TrainRun run{TranslationModel<float>(c.model_config(d.vocab[0].size(), d.vocab[1].size()), c.seed), {}, {}};
  run.model.set_fixed_embeddings(Lang::L1, d.embeddings[0]);
  run.model.set_fixed_embeddings(Lang::L2, d.embeddings[1]);
  run.info.config = run.model.config();
  run.info.vocab = d.vocab;
  run.info.bpe = d.bpe;
  run.info.meta["mode"] = c.mode;
  run.info.meta["seed"] = std::to_string(c.seed);

  if (write_checkpoints) {
    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec) throw IoError("cannot create " + c.output_dir + ": " + ec.message());
  }
  Trainer trainer(run.model, c.train_options());
  TrainCallbacks cb;
  if (metrics)
    cb.on_metric = [metrics](const MetricRecord& r) { *metrics << format_metric(r) << '\n' << std::flush; };
  if (write_checkpoints)
    cb.on_checkpoint = [&](std::size_t it) {
      CheckpointInfo info = run.info;
      info.meta["iteration"] = std::to_string(it);
      save_checkpoint(std::filesystem::path(c.output_dir) / ("checkpoint-" + std::to_string(it) + ".bin"), run.model,
                      info);
    };
  run.result = trainer.train(d.corpora, cb);
  run.info.meta["iteration"] = std::to_string(c.iterations);
  if (write_checkpoints) save_checkpoint(std::filesystem::path(c.output_dir) / "model.bin", run.model, run.info);
  return run;
}

std::pair<Lang, Lang> parse_direction(const std::string& direction) {
  if (direction == "l1-l2") return {Lang::L1, Lang::L2};
  if (direction == "l2-l1") return {Lang::L2, Lang::L1};
  throw ConfigError("direction must be l1-l2 or l2-l1, got '" + direction + "'");
}

std::vector<Sentence> translate_sentences(const TranslationModel<float>& model, const CheckpointInfo& info,
                                          const std::vector<Sentence>& input, Lang src, Lang tgt, std::size_t beam,
                                          std::size_t max_len) {
  const Vocabulary& sv = info.vocab[lang_index(src)];
  const Vocabulary& tv = info.vocab[lang_index(tgt)];
  std::vector<Sentence> out;
  out.reserve(input.size());
  for (const Sentence& line : input) {
    const Ids ids = sv.encode(preprocess(line, info.bpe, src));
    const std::size_t cap = max_len ? max_len : default_max_len(ids.size());
    const Ids result = beam == 0 ? greedy_decode(model, ids, src, tgt, cap) : beam_search(model, ids, src, tgt, beam, cap);
    Sentence words = tv.decode(result);
    if (info.bpe) {
      // A dangling continuation marker at a length cut would not round-trip.
      if (!words.empty() && words.back().size() >= 2 && words.back().ends_with(kContinuation))
        words.back().resize(words.back().size() - 2);
      words = undo_bpe(words);
    }
    out.push_back(std::move(words));
  }
  return out;
}

}  // namespace unmt
