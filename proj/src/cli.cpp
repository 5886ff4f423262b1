#include "infill/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "infill/checkpoint.hpp"
#include "infill/config.hpp"
#include "infill/error.hpp"
#include "infill/evaluation.hpp"
#include "infill/masking.hpp"
#include "infill/parallel.hpp"
#include "infill/synth.hpp"
#include "infill/training.hpp"
#include "infill/vocab.hpp"

namespace infill {
namespace {

namespace fs = std::filesystem;

// Command-line options that override one configuration key each.
class Bindings {
 public:
  void option(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    auto value = std::make_shared<std::string>();
    items_.push_back({app->add_option(name, *value, help + " [" + key + "]"), key, value, nullptr});
  }

  void flag(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    items_.push_back({app->add_flag(name, *value, help + " [" + key + "]"), key, nullptr, value});
  }

  void apply(RunConfig& cfg) const {
    for (const auto& it : items_) {
      if (it.opt->count() == 0) continue;
      cfg.set(it.key, it.text ? *it.text : (*it.on ? "true" : "false"));
    }
  }

 private:
  struct Item {
    CLI::Option* opt;
    std::string key;
    std::shared_ptr<std::string> text;
    std::shared_ptr<bool> on;
  };
  std::vector<Item> items_;
};

const std::string& require_path(const RunConfig& cfg, const std::string& key, const char* flag) {
  const auto& p = cfg.str(key);
  if (p.empty()) throw ConfigError(std::string("missing input: pass ") + flag + " or set " + key);
  return p;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string join_logprobs(const std::vector<double>& lp) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < lp.size(); ++i) os << (i ? " " : "") << lp[i];
  return os.str();
}

std::vector<InfillExample> encode_all(std::span<const TextExample> text, const Vocab& vocab) {
  std::vector<InfillExample> out;
  out.reserve(text.size());
  for (const auto& ex : text) out.push_back(encode(ex, vocab));
  return out;
}

int cmd_gen_synth(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto lines = gen_synth(cfg.str("synth.preset"), cfg.count("synth.n"), cfg.seed());
  write_lines(out_dir / "corpus.txt", lines);
  out << "wrote " << lines.size() << " sentences to " << (out_dir / "corpus.txt").string() << "\n";
  return exit_code::ok;
}

int cmd_build_vocab(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const auto lines = read_lines(require_path(cfg, "data.corpus", "--corpus"));
  std::vector<std::vector<std::string>> sentences;
  for (const auto& l : lines) sentences.push_back(tokenize(l, cfg.flag("data.lowercase")));
  const Vocab vocab = build_vocab(sentences, cfg.count("data.vocab_max_size"), cfg.count("data.min_freq"));
  vocab.save(out_dir / "vocab.txt");
  out << "vocabulary of " << vocab.size() << " types (hash " << hash_hex(vocab.content_hash()) << ") written to "
      << (out_dir / "vocab.txt").string() << "\n";
  return exit_code::ok;
}

int cmd_mask(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  IngestStats ingest;
  const auto sentences = ingest_corpus(require_path(cfg, "data.corpus", "--corpus"), cfg.count("data.min_len"),
                                       cfg.count("data.max_len"), cfg.flag("data.lowercase"), &ingest);
  const MaskSpec spec = cfg.mask_spec();
  std::optional<std::vector<std::vector<std::size_t>>> annotations;
  if (!cfg.str("mask.annotations").empty()) annotations = read_annotations(cfg.str("mask.annotations"));
  auto res = mask_corpus(sentences, spec, annotations ? &*annotations : nullptr);
  if (res.stats.skipped) err << "warning: skipped " << res.stats.skipped << " sentences the strategy could not mask\n";

  const std::size_t n = res.examples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(cfg.seed(), 0x5b1d));
  for (std::size_t i = 0; i + 1 < n; ++i) std::swap(order[i], order[i + uniform_below(rng, n - i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(cfg.real("data.test_fraction") * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(cfg.real("data.valid_fraction") * static_cast<double>(n)));
  std::vector<int> part(n, 0);
  for (std::size_t i = 0; i < n; ++i) part[order[i]] = i < n_test ? 2 : (i < n_test + n_valid ? 1 : 0);
  std::vector<TextExample> splits[3];
  for (std::size_t i = 0; i < n; ++i) splits[part[i]].push_back(res.examples[i]);

  write_pairs(out_dir / "train.tsv", splits[0]);
  write_pairs(out_dir / "valid.tsv", splits[1]);
  write_pairs(out_dir / "test.tsv", splits[2]);
  std::ofstream stats(out_dir / "stats.json");
  if (!stats) throw IoError("cannot write " + (out_dir / "stats.json").string());
  stats << res.stats.to_json();
  out << "masked " << n << " of " << res.stats.sentences << " sentences (" << ingest.dropped
      << " lines dropped by length); mask rate " << res.stats.mask_rate() << "; split " << splits[0].size() << "/"
      << splits[1].size() << "/" << splits[2].size() << " train/valid/test\n";
  return exit_code::ok;
}

template <class T>
int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const Vocab vocab = Vocab::load(require_path(cfg, "data.vocab", "--vocab"));
  const auto train_text = read_pairs(require_path(cfg, "data.train", "--train"));
  std::vector<TextExample> valid_text;
  if (!cfg.str("data.valid").empty()) valid_text = read_pairs(cfg.str("data.valid"));
  const auto train_set = encode_all(train_text, vocab);
  const auto valid_set = encode_all(valid_text, vocab);

  ModelSpec spec = cfg.model_spec(vocab.size());
  std::unique_ptr<InfillModel<T>> model;
  std::size_t start_step = 0;
  if (const auto& resume = cfg.str("run.resume"); !resume.empty()) {
    const Checkpoint ck = load_checkpoint(resume);
    model = restore_model<T>(ck, vocab.content_hash(), spec.kind);
    spec = model->spec();
    start_step = ck.step();
  } else {
    model = make_model<T>(spec, cfg.seed());
  }
  TrainOptions opts = cfg.train_options(spec);
  opts.start_step = start_step;
  opts.on_log = [&](const MetricRow& r) {
    if (r.val_ppl) out << "step " << r.step << " loss " << r.loss << " lr " << r.lr << " val_ppl " << *r.val_ppl << "\n";
  };
  const auto res = train(*model, train_set, valid_set, opts);

  auto manifest = make_manifest(spec, vocab.content_hash(), res.steps);
  manifest["train.best_step"] = std::to_string(res.best_step);
  save_checkpoint(out_dir / "model.ckpt", manifest, model->params());
  std::ofstream csv(out_dir / "metrics.csv");
  if (!csv) throw IoError("cannot write " + (out_dir / "metrics.csv").string());
  csv << metrics_csv(res.log);
  out << "trained " << res.steps - start_step << " steps; kept step " << res.best_step;
  if (res.best_val_ppl) out << " (valid ppl " << *res.best_val_ppl << ")";
  out << "; checkpoint " << (out_dir / "model.ckpt").string() << "\n";
  return exit_code::ok;
}

template <class T>
int cmd_infill(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const Vocab vocab = Vocab::load(require_path(cfg, "data.vocab", "--vocab"));
  const auto model = restore_model<T>(load_checkpoint(require_path(cfg, "run.checkpoint", "--checkpoint")),
                                      vocab.content_hash());
  const DecodeOptions opts = cfg.decode_options();
  const auto lines = read_lines(require_path(cfg, "data.templates", "--templates"));
  std::vector<std::string> filled, logprobs;
  std::size_t truncated = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (tokenize(lines[i]).empty()) continue;
    const Template t = parse_template(lines[i], vocab);
    const auto res = fill_template(*model, t, opts, i);
    filled.push_back(join_tokens(vocab.decode(res.filled.reconstruct())));
    std::string lp;
    for (const auto& b : res.blanks) {
      lp += (lp.empty() ? "" : " | ") + join_logprobs(b.logprobs);
      truncated += b.truncated ? 1 : 0;
    }
    logprobs.push_back(lp);
  }
  write_lines(out_dir / "filled.txt", filled);
  if (cfg.flag("run.logprobs")) write_lines(out_dir / "logprobs.txt", logprobs);
  out << "filled " << filled.size() << " templates";
  if (truncated) out << " (" << truncated << " blanks hit decode.max_blank_len)";
  out << "; output " << (out_dir / "filled.txt").string() << "\n";
  return exit_code::ok;
}

template <class T>
int cmd_evaluate(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const Vocab vocab = Vocab::load(require_path(cfg, "data.vocab", "--vocab"));
  const auto model = restore_model<T>(load_checkpoint(require_path(cfg, "run.checkpoint", "--checkpoint")),
                                      vocab.content_hash());
  const auto test = read_pairs(require_path(cfg, "data.test", "--test"));
  EvalArtifacts art;
  const auto rep = evaluate(*model, vocab, test, cfg.decode_options(), &art, worker_threads());

  std::string kv = rep.to_kv();
  if (!cfg.str("data.train").empty()) {
    const auto train_set = encode_all(read_pairs(cfg.str("data.train")), vocab);
    const auto test_set = encode_all(test, vocab);
    std::ostringstream os;
    os.precision(17);
    os << "unigram_ppl=" << unigram_perplexity(train_set, test_set, vocab.size()) << "\n";
    kv += os.str();
  }
  std::ofstream report(out_dir / "report.txt");
  if (!report) throw IoError("cannot write " + (out_dir / "report.txt").string());
  report << kv;
  std::vector<std::string> fills, lps;
  for (const auto& c : art.candidates) fills.push_back(join_tokens(c));
  for (const auto& l : art.logprobs) lps.push_back(join_logprobs(l));
  write_lines(out_dir / "fills.txt", fills);
  write_lines(out_dir / "logprobs.txt", lps);
  out << rep.to_table();
  return exit_code::ok;
}

template <class F32, class F64>
int by_precision(const RunConfig& cfg, F32 f32, F64 f64) {
  return cfg.precision() == Precision::f64 ? f64() : f32();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text infilling toolkit: corpus masking, training, blank filling and evaluation.", "infill"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> assignments;
  Bindings bind;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Configuration file of `key = value` lines");
    sub->add_option("--set", assignments, "Override one key: --set train.batch_size=32");
    bind.option(sub, "--seed", "run.seed", "Random seed");
    bind.option(sub, "--out", "run.out", "Output directory");
  };

  auto* synth = app.add_subcommand("gen-synth", "Write a synthetic corpus");
  common(synth);
  bind.option(synth, "--preset", "synth.preset", "Grammar preset (nba or order)");
  bind.option(synth, "--n", "synth.n", "Number of sentences");

  auto* vocab = app.add_subcommand("build-vocab", "Build a vocabulary from a corpus");
  common(vocab);
  bind.option(vocab, "--corpus", "data.corpus", "Corpus, one sentence per line");
  bind.option(vocab, "--max-size", "data.vocab_max_size", "Maximum vocabulary size including reserved tokens");
  bind.option(vocab, "--min-freq", "data.min_freq", "Minimum token frequency");
  bind.flag(vocab, "--lowercase", "data.lowercase", "Lowercase tokens");

  auto* mask = app.add_subcommand("mask", "Turn a corpus into template/original pairs");
  common(mask);
  bind.option(mask, "--corpus", "data.corpus", "Corpus, one sentence per line");
  bind.option(mask, "--strategy", "mask.strategy", "random, anchor or closed_class");
  bind.option(mask, "--rate", "mask.rate", "Target mask rate (random)");
  bind.option(mask, "--blanks", "mask.blanks", "Blanks per template");
  bind.option(mask, "--annotations", "mask.annotations", "Anchor index file (anchor)");
  bind.option(mask, "--words", "mask.words", "Comma-separated closed-class words");
  bind.option(mask, "--min-len", "data.min_len", "Minimum clause length");
  bind.option(mask, "--max-len", "data.max_len", "Maximum clause length");
  bind.option(mask, "--valid-fraction", "data.valid_fraction", "Share of examples held out for validation");
  bind.option(mask, "--test-fraction", "data.test_fraction", "Share of examples held out for testing");
  bind.flag(mask, "--lowercase", "data.lowercase", "Lowercase tokens");

  auto* trn = app.add_subcommand("train", "Train an infilling model");
  common(trn);
  bind.option(trn, "--train", "data.train", "Training pairs");
  bind.option(trn, "--valid", "data.valid", "Validation pairs");
  bind.option(trn, "--vocab", "data.vocab", "Vocabulary file");
  bind.option(trn, "--kind", "model.kind", "self_attn or seq2seq");
  bind.option(trn, "--epochs", "train.epochs", "Training epochs");
  bind.option(trn, "--batch-size", "train.batch_size", "Examples per update");
  bind.option(trn, "--max-steps", "train.max_steps", "Stop after this many updates");
  bind.option(trn, "--val-every", "train.val_every", "Validation interval in updates");
  bind.option(trn, "--warmup", "train.warmup_steps", "Warm-up updates");
  bind.option(trn, "--lr-constant", "train.lr_constant", "Learning-rate constant");
  bind.option(trn, "--precision", "train.precision", "f32 or f64");
  bind.option(trn, "--resume", "run.resume", "Checkpoint to continue from");

  auto* inf = app.add_subcommand("infill", "Fill blanks in template lines");
  common(inf);
  bind.option(inf, "--checkpoint", "run.checkpoint", "Model checkpoint");
  bind.option(inf, "--vocab", "data.vocab", "Vocabulary file");
  bind.option(inf, "--templates", "data.templates", "Template lines with __m__ blanks");
  bind.option(inf, "--mode", "decode.mode", "greedy or sample");
  bind.option(inf, "--temperature", "decode.temperature", "Sampling temperature");
  bind.option(inf, "--max-blank-len", "decode.max_blank_len", "Token cap per blank");
  bind.option(inf, "--precision", "train.precision", "f32 or f64");
  bind.flag(inf, "--logprobs", "run.logprobs", "Also write per-token log-probabilities");

  auto* ev = app.add_subcommand("evaluate", "Score a model on held-out pairs");
  common(ev);
  bind.option(ev, "--checkpoint", "run.checkpoint", "Model checkpoint");
  bind.option(ev, "--vocab", "data.vocab", "Vocabulary file");
  bind.option(ev, "--test", "data.test", "Test pairs");
  bind.option(ev, "--train", "data.train", "Training pairs for the unigram baseline");
  bind.option(ev, "--mode", "decode.mode", "greedy or sample");
  bind.option(ev, "--temperature", "decode.temperature", "Sampling temperature");
  bind.option(ev, "--max-blank-len", "decode.max_blank_len", "Token cap per blank");
  bind.option(ev, "--precision", "train.precision", "f32 or f64");

  std::vector<std::string> argv_store{"infill"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return exit_code::usage;
  }
  if (app.get_subcommands().empty()) {
    err << app.help();
    return exit_code::usage;
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    bind.apply(cfg);
    for (const auto& a : assignments) cfg.set_assignment(a);
    cfg.validate();

    const fs::path out_dir = cfg.str("run.out");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    cfg.write(out_dir / "config.txt");

    if (name == "gen-synth") return cmd_gen_synth(cfg, out_dir, out);
    if (name == "build-vocab") return cmd_build_vocab(cfg, out_dir, out);
    if (name == "mask") return cmd_mask(cfg, out_dir, out, err);
    if (name == "train") {
      return by_precision(cfg, [&] { return cmd_train<float>(cfg, out_dir, out); },
                          [&] { return cmd_train<double>(cfg, out_dir, out); });
    }
    if (name == "infill") {
      return by_precision(cfg, [&] { return cmd_infill<float>(cfg, out_dir, out); },
                          [&] { return cmd_infill<double>(cfg, out_dir, out); });
    }
    return by_precision(cfg, [&] { return cmd_evaluate<float>(cfg, out_dir, out); },
                        [&] { return cmd_evaluate<double>(cfg, out_dir, out); });
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::runtime;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::runtime;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::runtime;
  }
}

}  // namespace infill
