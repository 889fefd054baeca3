#include "ctxtag/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctxtag/align.hpp"
#include "ctxtag/csv.hpp"
#include "ctxtag/embeddings.hpp"
#include "ctxtag/error.hpp"

namespace ctxtag {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCorpusFile = "corpus.jsonl";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kClassesFile = "classes.txt";
constexpr const char* kCheckpointFile = "checkpoint.ckpt";

struct CorpusSource {
  std::vector<RawDocument> raw;
  std::optional<Vocab> vocab;
  std::vector<std::string> classes;
};

CorpusSource read_source(const RunConfig& cfg) {
  CorpusSource src;
  if (cfg.corpus.empty()) {
    src.raw = synth_corpus(cfg.synth);
    src.classes = synth_class_names(cfg.synth.num_classes);
    return src;
  }
  const fs::path path(cfg.corpus);
  if (fs::is_directory(path)) {
    src.raw = read_corpus(path / kCorpusFile);
    if (fs::exists(path / kVocabFile)) src.vocab = Vocab::load(path / kVocabFile);
    if (fs::exists(path / kClassesFile)) src.classes = read_classes(path / kClassesFile);
  } else {
    if (!fs::exists(path)) throw DataError("corpus " + path.string() + " does not exist");
    src.raw = read_corpus(path);
  }
  if (src.classes.empty()) src.classes = infer_classes(src.raw);
  return src;
}

EncodeOptions encode_options(const RunConfig& cfg) { return {cfg.model.max_words, cfg.model.max_sentences}; }

Dataset finish_dataset(const RunConfig& cfg, CorpusSource src, Vocab vocab, std::vector<std::string> classes) {
  Dataset d;
  d.docs = encode_corpus(src.raw, vocab, classes, encode_options(cfg));
  d.raw = std::move(src.raw);
  d.vocab = std::move(vocab);
  d.classes = std::move(classes);
  d.split = split_corpus(d.docs.size(), cfg.split_ratio, cfg.val_fraction, cfg.seed);
  return d;
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv_row(out, {"epoch", "train_loss", "val_loss"});
  for (const auto& r : history) {
    write_csv_row(out, {std::to_string(r.epoch), format_double(r.train_loss), format_double(r.val_loss)});
  }
}

void print_report(std::ostream& out, const std::string& label, const MetricsReport& r) {
  out << label << ": loss " << format_double(r.loss) << ", top1 " << format_double(r.top1) << ", top3 "
      << format_double(r.top3) << ", precision " << format_double(r.precision) << ", recall "
      << format_double(r.recall) << ", fnr " << format_double(r.false_negative_rate) << '\n';
}

struct RunOutcome {
  TrainResult result;
  MetricsReport test;
  std::size_t parameters = 0;
};

// Trains one variant into `dir`: config.json, checkpoint.ckpt (rewritten at
// every new best), history.csv and test-split metrics.
RunOutcome train_into(const RunConfig& cfg, const Dataset& data, const Tensor& pretrained, const fs::path& dir,
                      std::ostream& out) {
  fs::create_directories(dir);
  save_run_config(dir / "config.json", cfg);
  ModelConfig mc = cfg.model;
  mc.num_classes = data.classes.size();
  MultiTaskModel model = MultiTaskModel::create(mc, cfg.variant, pretrained, cfg.seed);
  const fs::path ckpt_path = dir / kCheckpointFile;

  RunOutcome outcome;
  outcome.parameters = model.parameter_count();
  out << variant_name(cfg.variant) << ": " << outcome.parameters << " parameters, " << data.split.train.size()
      << " train / " << data.split.val.size() << " val / " << data.split.test.size() << " test documents\n";
  outcome.result = train(model, data.docs, data.split, cfg.train,
                         [&](const EpochRecord& r, bool improved, const MultiTaskModel& m) {
                           out << "epoch " << r.epoch << " train " << format_double(r.train_loss) << " val "
                               << format_double(r.val_loss) << (improved ? " *" : "") << '\n';
                           if (improved) {
                             const double best = std::isnan(r.val_loss) ? r.train_loss : r.val_loss;
                             save_checkpoint(ckpt_path, make_checkpoint(cfg, data.vocab, data.classes, m, best, r.epoch));
                           }
                           return true;
                         });
  if (outcome.result.history.empty()) {
    save_checkpoint(ckpt_path, make_checkpoint(cfg, data.vocab, data.classes, model, outcome.result.best_val_loss, 0));
  }
  write_history(dir / "history.csv", outcome.result.history);
  if (!data.split.test.empty()) {
    outcome.test = evaluate_model(model, data.docs, data.split.test, outcome.result.loss);
    write_metrics(dir / "metrics", outcome.test, data.classes);
    print_report(out, "test", outcome.test);
  }
  return outcome;
}

std::size_t thread_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CTXTAG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw UsageError("CTXTAG_THREADS must be a positive integer");
    n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

bool is_policy_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      return j.is_object() && j.contains("text");
    } catch (const json::parse_error& e) {
      throw DataError(path.string() + ":1: " + e.what());
    }
  }
  return false;
}

std::vector<AlignedDocument> align_corpus(const std::vector<RawPolicy>& policies) {
  std::vector<AlignedDocument> aligned(policies.size());
  const std::size_t workers = thread_count(policies.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < policies.size(); i = next++) {
      try {
        aligned[i] = align_phrases(policies[i].doc_id, policies[i].text, policies[i].phrases);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::sort(aligned.begin(), aligned.end(),
            [](const AlignedDocument& a, const AlignedDocument& b) { return a.document.doc_id < b.document.doc_id; });
  return aligned;
}

// Input documents for `predict`: corpus or policy lines, labels ignored.
std::vector<RawDocument> read_documents(const fs::path& path) {
  std::vector<RawDocument> docs;
  if (is_policy_file(path)) {
    for (const RawPolicy& p : read_policies(path)) {
      RawDocument d{p.doc_id, {}};
      for (auto& s : split_sentences(p.text)) d.sentences.push_back({std::move(s), {}});
      docs.push_back(std::move(d));
    }
  } else {
    docs = read_corpus(path);
    for (auto& d : docs) {
      for (auto& s : d.sentences) s.labels.clear();
    }
  }
  return docs;
}

// ---- commands ----

int cmd_prepare(const fs::path& input, const fs::path& out_dir, std::ostream& out) {
  std::vector<RawDocument> docs;
  std::optional<MatchReport> report;
  if (is_policy_file(input)) {
    const auto aligned = align_corpus(read_policies(input));
    report.emplace();
    for (const auto& a : aligned) {
      report->documents.push_back(a.alignment);
      if (!a.alignment.flagged()) docs.push_back(a.document);
    }
  } else {
    docs = read_corpus(input);
    std::sort(docs.begin(), docs.end(), [](const RawDocument& a, const RawDocument& b) { return a.doc_id < b.doc_id; });
  }
  if (docs.empty()) throw DataError("no usable documents in " + input.string());
  const auto classes = infer_classes(docs);
  const Vocab vocab = corpus_vocab(docs);
  encode_corpus(docs, vocab, classes);  // validates every document

  fs::create_directories(out_dir);
  write_corpus(out_dir / kCorpusFile, docs);
  vocab.save(out_dir / kVocabFile);
  write_classes(out_dir / kClassesFile, classes);
  if (report) {
    report->write_csv(out_dir / "match_report.csv");
    report->write_summary_csv(out_dir / "match_summary.csv");
    out << "matched " << report->matched_phrases() << "/" << report->total_phrases() << " phrases\n";
    for (const auto& id : report->excluded()) out << "flagged (excluded): " << id << '\n';
  }
  out << "prepared " << docs.size() << " documents, " << classes.size() << " classes, vocabulary " << vocab.size()
      << " (hash " << vocab.hash() << ") in " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_synth(const SynthConfig& sc, const fs::path& out_dir, std::ostream& out) {
  const auto docs = synth_corpus(sc);
  fs::create_directories(out_dir);
  write_corpus(out_dir / kCorpusFile, docs);
  write_classes(out_dir / kClassesFile, synth_class_names(sc.num_classes));
  out << "wrote " << docs.size() << " synthetic documents to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_dataset(cfg);
  const Tensor pretrained = load_pretrained(cfg, data.vocab);
  const auto outcome = train_into(cfg, data, pretrained, cfg.out, out);
  out << "best epoch " << outcome.result.best_epoch << ", loss " << format_double(outcome.result.best_val_loss)
      << "; checkpoint " << (fs::path(cfg.out) / kCheckpointFile).string() << '\n';
  return kExitOk;
}

int cmd_ablate(const RunConfig& base, std::ostream& out) {
  const Dataset data = load_dataset(base);
  const Tensor pretrained = load_pretrained(base, data.vocab);
  const fs::path root(base.out);
  fs::create_directories(root);
  {
    std::ofstream split(root / "split.csv", std::ios::binary);
    write_csv_row(split, {"doc_id", "split"});
    for (const char* name : {"train", "val", "test"}) {
      for (std::size_t i : split_refs(data.split, name)) write_csv_row(split, {data.docs[i].doc_id, name});
    }
  }
  std::ofstream cmp(root / "comparison.csv", std::ios::binary);
  if (!cmp) throw DataError("cannot write " + (root / "comparison.csv").string());
  write_csv_row(cmp, {"variant", "top1", "top3", "precision", "recall", "false_negative_rate", "test_loss",
                      "best_epoch", "best_val_loss", "parameters"});
  for (Variant v : {Variant::multitask, Variant::baseline_classifier, Variant::baseline_summarizer}) {
    RunConfig cfg = base;
    cfg.variant = v;
    cfg.out = (root / variant_name(v)).string();
    const auto o = train_into(cfg, data, pretrained, cfg.out, out);
    write_csv_row(cmp, {variant_name(v), format_double(o.test.top1), format_double(o.test.top3),
                        format_double(o.test.precision), format_double(o.test.recall),
                        format_double(o.test.false_negative_rate), format_double(o.test.loss),
                        std::to_string(o.result.best_epoch), format_double(o.result.best_val_loss),
                        std::to_string(o.parameters)});
  }
  out << "comparison written to " << (root / "comparison.csv").string() << '\n';
  return kExitOk;
}

struct Loaded {
  Checkpoint ckpt;
  Dataset data;
};

Loaded load_for_eval(const fs::path& ckpt_path, const std::string& corpus_override) {
  Loaded l{load_checkpoint(ckpt_path), {}};
  RunConfig cfg = l.ckpt.config;
  if (!corpus_override.empty()) cfg.corpus = corpus_override;
  l.data = load_dataset(cfg, l.ckpt.vocab, l.ckpt.classes);
  return l;
}

int cmd_evaluate(const fs::path& ckpt_path, const std::string& split_name, const std::string& corpus,
                 const std::string& out_dir, std::ostream& out) {
  Loaded l = load_for_eval(ckpt_path, corpus);
  const MultiTaskModel model = model_from_checkpoint(l.ckpt);
  const auto refs = split_refs(l.data.split, split_name);
  if (refs.empty()) throw DataError("the " + split_name + " split is empty");
  TrainConfig tc = l.ckpt.config.train;
  const LossConfig loss = derive_loss_config(l.data.docs, l.data.split.train, l.data.classes.size(), tc);
  const MetricsReport report = evaluate_model(model, l.data.docs, refs, loss);
  const fs::path dir = out_dir.empty() ? ckpt_path.parent_path() / ("eval_" + split_name) : fs::path(out_dir);
  write_metrics(dir, report, l.data.classes);
  print_report(out, split_name, report);
  out << "metrics written to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_predict(const fs::path& ckpt_path, const fs::path& input, const std::string& out_path, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const MultiTaskModel model = model_from_checkpoint(ckpt);
  const EncodeOptions opts = encode_options(ckpt.config);
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary);
    if (!file) throw DataError("cannot write " + out_path);
  }
  std::ostream& sink = out_path.empty() ? out : file;
  NoGradGuard no_grad;
  for (const RawDocument& raw : read_documents(input)) {
    const DocumentRecord doc = encode_document(raw, ckpt.vocab, ckpt.classes, opts);
    std::optional<SummarizerOutput> summary;
    if (model.has_summarizer()) summary = summarizer_forward(model.summarizer(), doc);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      json line = {{"doc_id", doc.doc_id}, {"sentence_index", i}};
      line["relevance"] = summary ? json(summary->y_d.at(i)) : json(nullptr);
      json labels = json::array();
      const bool relevant = !summary || summary->y_d.at(i) >= kDecisionThreshold;
      if (relevant && model.has_classifier()) {
        const Tensor y_s = model.variant() == Variant::multitask
                               ? classifier_forward(model.classifier(), doc.sentences[i], gather_rows(summary->h_e, i))
                               : baseline_classifier_forward(model, doc.sentences[i]);
        const std::vector<double> probs(y_s.data().begin(), y_s.data().end());
        for (std::size_t c : rank_classes(probs)) {
          if (probs[c] < kDecisionThreshold) break;
          labels.push_back({{"class", ckpt.classes[c]}, {"prob", probs[c]}});
        }
      }
      line["labels"] = std::move(labels);
      sink << line.dump() << '\n';
    }
  }
  return kExitOk;
}

void add_synth_options(CLI::App& cmd, SynthConfig& sc) {
  cmd.add_option("--docs", sc.n_docs, "Number of documents");
  cmd.add_option("--sentences", sc.sents_per_doc, "Sentences per document");
  cmd.add_option("--classes", sc.num_classes, "Number of classes");
  cmd.add_option("--relevance-rate", sc.relevance_rate, "Chance that a sentence is relevant");
  cmd.add_option("--context-strength", sc.context_strength, "Chance that a label is set by the document topic");
  cmd.add_option("--surface-noise", sc.surface_noise, "Chance of misleading class words");
  cmd.add_option("--second-label-rate", sc.second_label_rate, "Chance of a second label");
  cmd.add_option("--label-distribution", sc.label_distribution, "Relative class frequencies");
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  CorpusSource src = read_source(cfg);
  Vocab vocab = src.vocab ? *src.vocab : corpus_vocab(src.raw);
  auto classes = src.classes;
  return finish_dataset(cfg, std::move(src), std::move(vocab), std::move(classes));
}

Dataset load_dataset(const RunConfig& cfg, const Vocab& vocab, const std::vector<std::string>& classes) {
  CorpusSource src = read_source(cfg);
  const std::string corpus_hash = src.vocab ? src.vocab->hash() : corpus_vocab(src.raw).hash();
  if (corpus_hash != vocab.hash()) {
    throw DataError("vocabulary hash mismatch: checkpoint " + vocab.hash() + ", corpus " + corpus_hash);
  }
  return finish_dataset(cfg, std::move(src), vocab, classes);
}

Tensor load_pretrained(const RunConfig& cfg, const Vocab& vocab) {
  if (cfg.embeddings.empty()) return pretrained_matrix(random_embeddings(vocab, cfg.embedding_dim, cfg.seed), vocab);
  return pretrained_matrix(load_embeddings(cfg.embeddings, vocab), vocab);
}

std::vector<std::size_t> split_refs(const CorpusSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw UsageError("unknown split '" + name + "' (expected train, val or test)");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware sentence tagging: multi-task summarizer and classifier"};
  app.require_subcommand(1);

  std::string config_path, corpus, embeddings, out_path, checkpoint, split = "test";
  std::uint64_t seed = 0;
  bool synth_flag = false;
  SynthConfig sc;

  auto* prepare = app.add_subcommand("prepare", "Align phrases or validate a corpus; write a prepared corpus directory");
  prepare->add_option("--corpus", corpus, "Corpus or policy JSONL file")->required();
  prepare->add_option("--out", out_path, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus directory");
  synth->add_option("--out", out_path, "Output directory")->required();
  auto* synth_seed = synth->add_option("--seed", seed, "Generator seed");
  add_synth_options(*synth, sc);

  auto run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run config JSON");
    cmd->add_option("--seed", seed, "Seed for initialization, split and shuffling");
    cmd->add_option("--corpus", corpus, "Prepared corpus directory or JSONL file");
    cmd->add_option("--embeddings", embeddings, "Pretrained embedding text file");
    cmd->add_option("--out", out_path, "Output directory");
    cmd->add_flag("--synth", synth_flag, "Use the synthetic corpus from the config");
  };
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  run_options(train_cmd);
  auto* ablate = app.add_subcommand("ablate", "Train the joint model and both baselines on one split");
  run_options(ablate);

  auto* evaluate = app.add_subcommand("evaluate", "Metrics for a checkpoint on one split");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  evaluate->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  evaluate->add_option("--corpus", corpus, "Corpus override");
  evaluate->add_option("--out", out_path, "Metrics directory");

  auto* predict = app.add_subcommand("predict", "Relevance and labels per sentence as JSON lines");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  predict->add_option("--corpus", corpus, "Documents to tag (corpus or policy JSONL)")->required();
  predict->add_option("--out", out_path, "Output file (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(corpus, out_path, out);
    if (synth->parsed()) {
      if (synth_seed->count() > 0) sc.seed = seed;
      return cmd_synth(sc, out_path, out);
    }
    if (train_cmd->parsed() || ablate->parsed()) {
      CLI::App* cmd = train_cmd->parsed() ? train_cmd : ablate;
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
      if (cmd->count("--seed") > 0) cfg.seed = cfg.train.seed = seed;
      if (!corpus.empty()) cfg.corpus = corpus;
      if (synth_flag) cfg.corpus.clear();
      if (!embeddings.empty()) cfg.embeddings = embeddings;
      if (!out_path.empty()) cfg.out = out_path;
      cfg.validate();
      return train_cmd->parsed() ? cmd_train(cfg, out) : cmd_ablate(cfg, out);
    }
    if (evaluate->parsed()) return cmd_evaluate(checkpoint, split, corpus, out_path, out);
    if (predict->parsed()) return cmd_predict(checkpoint, corpus, out_path, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ctxtag
