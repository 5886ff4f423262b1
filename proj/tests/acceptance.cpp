// Acceptance runner: one PASS/FAIL line per criterion. Exits non-zero when a
// blocking criterion fails; criterion 10 is reported but never blocks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "infill/cli.hpp"
#include "infill/evaluation.hpp"
#include "infill/masking.hpp"
#include "infill/parallel.hpp"
#include "infill/position.hpp"
#include "infill/synth.hpp"
#include "infill/training.hpp"
#include "support.hpp"

using namespace infill;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Collects failed checks; the first few failure messages are kept.
struct Checker {
  bool ok = true;
  std::vector<std::string> failures;
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (failures.size() < 3) failures.push_back(what);
  }
  Outcome outcome(std::string detail) const {
    for (const auto& f : failures) detail += "; failed: " + f;
    return {ok, detail};
  }
};

const ModelKind kKinds[] = {ModelKind::self_attn, ModelKind::seq2seq};

Tensor<double> logits_of(const InfillModel<double>& m, const Template& t, SegId seg, const std::vector<TokenId>& in) {
  Tape<double> tape;
  ParamBinding<double> binding(tape, m.params(), false);
  ForwardContext<double> ctx{tape, binding, false, nullptr};
  return m.blank_logits(ctx, t, seg, in).value();
}

void zero_output(InfillModel<double>& m) {
  m.params().tensor(*m.params().find("output.w")).fill(0.0);
  m.params().tensor(*m.params().find("output.b")).fill(0.0);
}

std::vector<Sentence> synth_sentences(std::string_view preset, std::size_t n, std::uint64_t seed) {
  std::vector<Sentence> out;
  for (const auto& l : gen_synth(preset, n, seed)) out.push_back(tokenize(l));
  return out;
}

bool has_adjacent_blanks(const TextTemplate& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t.segments()[i].kind == SegmentKind::blank && t.segments()[i - 1].kind == SegmentKind::blank) return true;
  }
  return false;
}

std::vector<InfillExample> encode_all(std::span<const TextExample> text, const Vocab& vocab) {
  std::vector<InfillExample> out;
  for (const auto& ex : text) out.push_back(encode(ex, vocab));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// 1. Finite-difference gradients of every op and both full models.
Outcome gradient_suite() {
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  double op_worst = 0.0;
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    test::op_gradient_trial(rng, [&](const char* name, double err) {
      op_worst = std::max(op_worst, err);
      c.expect(err < 1e-6, std::string(name) + " error " + fmt("%.3g", err));
    });
  }
  double model_worst = 0.0;
  std::size_t model_checks = 0;
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 6);
    for (int trial = 0; trial < 20; ++trial) {
      const auto ex = test::random_example(rng, 11, 1 + trial % 3);
      for (double e : test::model_grad_errors(*m, ex, rng)) {
        model_worst = std::max(model_worst, e);
        ++model_checks;
        c.expect(e < 1e-5, std::string(model_kind_name(kind)) + " parameter error " + fmt("%.3g", e));
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 120.0, "runtime " + fmt("%.1f s", secs));
  return c.outcome("max op error " + fmt("%.2e", op_worst) + ", max model error " + fmt("%.2e", model_worst) +
                   " over " + std::to_string(model_checks) + " parameter checks, " + fmt("%.1f s", secs));
}

// 2. Closed form, injectivity and norm of the positional encoding.
Outcome positional_encoding_suite() {
  Checker c;
  Rng rng(17);
  double worst = 0.0, norm_worst = 0.0;
  for (int probe = 0; probe < 1000; ++probe) {
    const std::size_t d = 2 * (1 + rng() % 32);
    const int base = 1 + static_cast<int>(rng() % 64);
    const int seg = static_cast<int>(rng() % 65);
    const int off = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(base));
    const auto pos = position_index(seg, off, base);
    const auto pe = positional_encoding(pos, d);
    double sq = 0.0;
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle = double(pos) / std::pow(10000.0, double(2 * i) / double(d));
      worst = std::max({worst, std::abs(pe[2 * i] - std::sin(angle)), std::abs(pe[2 * i + 1] - std::cos(angle))});
      sq += pe[2 * i] * pe[2 * i] + pe[2 * i + 1] * pe[2 * i + 1];
    }
    norm_worst = std::max(norm_worst, std::abs(sq - double(d) / 2));
  }
  c.expect(worst < 1e-6, "closed form error " + fmt("%.3g", worst));
  c.expect(norm_worst < 1e-6, "norm error " + fmt("%.3g", norm_worst));
  std::size_t pairs = 0;
  for (int base : {1, 16, 24, 64}) {
    std::set<std::int64_t> seen;
    for (int seg = 0; seg <= 64; ++seg) {
      for (int off = 1; off <= base; ++off, ++pairs) {
        c.expect(seen.insert(position_index(seg, off, base)).second, "collision at base " + std::to_string(base));
      }
    }
  }
  return c.outcome("1000 probes, max error " + fmt("%.2e", worst) + ", max norm error " + fmt("%.2e", norm_worst) +
                   ", " + std::to_string(pairs) + " distinct positions");
}

// 3. Logits for rows before a perturbed teacher token do not change.
Outcome causality_suite() {
  Checker c;
  Rng rng(21);
  std::size_t cases = 0;
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 2);
    for (int trial = 0; trial < 100; ++trial, ++cases) {
      const auto ex = test::random_example(rng, 11, 1 + trial % 3, 4);
      const auto blanks = ex.templ.blank_ids();
      const SegId seg = blanks[rng() % blanks.size()];
      auto in = decoder_input_for(ex.golden.at(seg));
      in.push_back(static_cast<TokenId>(special::count + rng() % 4));
      const auto base = logits_of(*m, ex.templ, seg, in);
      const std::size_t j = 1 + rng() % (in.size() - 1);
      auto changed = in;
      changed[j] = static_cast<TokenId>(changed[j] == 10 ? 9 : 10);
      const auto pert = logits_of(*m, ex.templ, seg, changed);
      bool same = true, moved = false;
      for (std::size_t col = 0; col < base.cols(); ++col) {
        for (std::size_t r = 0; r < j; ++r) same &= base(r, col) == pert(r, col);
        moved |= base(j, col) != pert(j, col);
      }
      c.expect(same, std::string(model_kind_name(kind)) + " row before " + std::to_string(j) + " changed");
      c.expect(moved, std::string(model_kind_name(kind)) + " perturbed row unchanged");
    }
  }
  return c.outcome(std::to_string(cases) + " perturbations, earlier rows bit-identical");
}

// 4. Loss decomposition over blanks and the uniform-logit value.
Outcome loss_accounting_suite() {
  Checker c;
  Rng rng(22);
  double uniform_worst = 0.0;
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto ex = test::random_example(rng, 11, 1 + trial % 4);
      const double total = test::example_loss(*m, ex);
      double sum = 0.0;
      bool first = true;
      Template t = ex.templ;
      for (const auto& [seg, fill] : ex.golden) {
        Tape<double> tape;
        ParamBinding<double> binding(tape, m->params(), false);
        ForwardContext<double> ctx{tape, binding, false, nullptr};
        const double l = blank_loss(*m, ctx, t, seg, fill).value().item();
        sum = first ? l : sum + l;
        first = false;
        t = t.update(seg, fill);
      }
      c.expect(total == sum, std::string(model_kind_name(kind)) + " loss " + fmt("%.17g", total) + " vs sum " +
                                 fmt("%.17g", sum));
    }
    auto u = make_model<double>(test::tiny_spec(kind, 13), 4);
    zero_output(*u);
    for (int trial = 0; trial < 50; ++trial) {
      const auto ex = test::random_example(rng, 13, 1 + trial % 4);
      std::size_t scored = 0;
      for (const auto& [seg, fill] : ex.golden) scored += fill.size() + 1;
      const double err = std::abs(test::example_loss(*u, ex) - double(scored) * std::log(13.0));
      uniform_worst = std::max(uniform_worst, err);
      c.expect(err < 1e-9, "uniform loss error " + fmt("%.3g", err));
    }
  }
  return c.outcome("200 examples, blank sums bit-exact, uniform loss error " + fmt("%.2e", uniform_worst));
}

// 5. Round trip over examples produced by every masking strategy.
Outcome round_trip_suite() {
  Checker c;
  std::vector<MaskSpec> specs(5);
  specs[0].mask_rate = 0.3, specs[0].num_blanks = 1;
  specs[1].mask_rate = 0.5, specs[1].num_blanks = 2;
  specs[2].mask_rate = 0.4, specs[2].num_blanks = 3;
  specs[3].strategy = MaskStrategy::anchor;
  specs[4].strategy = MaskStrategy::closed_class, specs[4].num_blanks = 3;
  std::size_t checked = 0, adjacent = 0;
  for (std::uint64_t round = 0; checked < 10000; ++round) {
    const auto& spec_base = specs[round % specs.size()];
    MaskSpec spec = spec_base;
    spec.seed = 100 + round;
    const auto sentences = synth_sentences(round % 2 ? "order" : "nba", 1000, 200 + round);
    for (const auto& ex : mask_corpus(sentences, spec).examples) {
      ++checked;
      auto filled = ex.templ;
      for (const auto& [id, fill] : ex.golden) filled = filled.update(id, fill);
      c.expect(filled.complete() && filled.reconstruct() == ex.original, "round trip of '" + pair_line(ex) + "'");
      c.expect(parse_pair_line(pair_line(ex)) == ex, "pair line '" + pair_line(ex) + "'");
      if (has_adjacent_blanks(ex.templ)) ++adjacent;
    }
  }
  c.expect(adjacent == 0, std::to_string(adjacent) + " templates with adjacent blanks");
  return c.outcome(std::to_string(checked) + " examples, " + std::to_string(adjacent) + " adjacent-blank templates");
}

// 6. Realised mask rates and the anchor and closed-class template shapes.
Outcome masking_statistics_suite() {
  Checker c;
  const auto sentences = synth_sentences("nba", 1000, 3);
  std::string rates;
  for (double rate : {0.3, 0.4, 0.5}) {
    for (std::size_t blanks : {1u, 2u}) {
      MaskSpec spec;
      spec.mask_rate = rate;
      spec.num_blanks = blanks;
      spec.seed = 4;
      const auto res = mask_corpus(sentences, spec);
      const double realised = res.stats.mask_rate();
      rates += (rates.empty() ? "" : " ") + fmt("%.4f", realised);
      c.expect(std::abs(realised - rate) <= 0.02, "rate " + fmt("%.1f", rate) + " realised " + fmt("%.4f", realised));
      for (const auto& ex : res.examples) c.expect(ex.golden.size() == blanks, "blank count");
    }
  }
  const auto grimm = tokenize("if you bear it without letting a sound escape you , i shall be free");
  const auto g = mask_anchor(grimm, std::vector<std::size_t>{7, 13});
  c.expect(g && render(g->templ) == "__m__ sound __m__ be __m__", "anchor noun/verb template");
  const auto nba = tokenize("The Toronto_Raptors defeated the Detroit_Pistons 114 - 110 on Sunday at the Air Canada");
  const auto n = mask_anchor(nba, select_anchors(nba, AnchorRules{}));
  c.expect(n && render(n->templ) == "__m__ Toronto_Raptors __m__ 114 - 110 __m__", "anchor entity/number template");

  const auto s = tokenize("the old woman went out , but saw no one on the stairs");
  const std::set<std::string> list{"the", "out", "no"};
  bool found = false;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    Rng rng(seed);
    const auto ex = mask_closed_class(s, list, 3, rng);
    c.expect(ex && ex->golden.size() == 3, "closed-class blank count");
    if (ex) found |= render(ex->templ) == "__m__ old woman went __m__ , but saw __m__ one on the stairs";
  }
  c.expect(found, "closed-class template shape");
  return c.outcome("realised rates " + rates + " for targets 0.3/0.4/0.5 x 1/2 blanks, template shapes match");
}

// 7. Learning-rate schedule and Adam.
Outcome schedule_suite() {
  Checker c;
  const ScheduleConfig cfg{0.3, 10000, 400};
  const double lr = lr_schedule(10000, cfg);
  const double rel = std::abs(lr - 1.5e-4) / 1.5e-4;
  c.expect(rel <= 1e-12, "lr " + fmt("%.17g", lr));
  const double w = 10000.0;
  const double warm = 0.3 / 20.0 * w / std::pow(w, 1.5), decay = 0.3 / 20.0 / std::sqrt(w);
  const double gap = std::abs(warm - decay) / decay;
  c.expect(gap <= 1e-12, "branch gap " + fmt("%.3g", gap));
  c.expect(lr_schedule(9999, cfg) < lr && lr_schedule(10001, cfg) < lr, "peak at warmup");

  ParamStore<double> p;
  Rng rng(5);
  p.add("w", test::random_tensor({4, 3}, rng));
  p.add("b", test::random_tensor({3}, rng));
  const auto w0 = p.tensor(0), b0 = p.tensor(1);
  auto st = AdamState<double>::init(p);
  adam_step(p, zero_grads(p), st, 0.1);
  c.expect(p.tensor(0) == w0 && p.tensor(1) == b0, "zero-gradient step moved parameters");
  return c.outcome("lr(10000) = " + fmt("%.17g", lr) + " (rel error " + fmt("%.1e", rel) + "), branch gap " +
                   fmt("%.1e", gap) + ", zero-gradient step is a no-op");
}

// 8. BLEU and perplexity reference values.
Outcome metrics_suite() {
  Checker c;
  auto corpus = [](std::initializer_list<const char*> lines) {
    std::vector<std::vector<std::string>> out;
    for (const char* l : lines) out.push_back(tokenize(l));
    return out;
  };
  const auto refs = corpus({"the cat sat on the mat", "a quick fox jumps over the lazy dog"});
  const double identity = bleu(refs, refs);
  c.expect(std::abs(identity - 100.0) < 1e-9, "identity " + fmt("%.17g", identity));
  const double disjoint = bleu(corpus({"x y z w", "p q r s t u"}), refs);
  c.expect(disjoint == 0.0, "disjoint " + fmt("%.17g", disjoint));
  const double logp = std::log(11.0 / 11) + std::log(6.0 / 9) + std::log(4.0 / 7) + std::log(2.0 / 5);
  const double hand = 100.0 * std::exp(1.0 - 14.0 / 11.0) * std::exp(logp / 4);
  const double got = bleu(corpus({"the cat sat on mat", "a fox jumps over the dog"}), refs);
  c.expect(std::abs(got - hand) < 1e-6, "hand case " + fmt("%.17g", got) + " vs " + fmt("%.17g", hand));

  Rng rng(1);
  double ppl_worst = 0.0;
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind, 23), 2);
    zero_output(*m);
    std::vector<InfillExample> data;
    for (int i = 0; i < 10; ++i) data.push_back(test::random_example(rng, 23, 1 + i % 3));
    const double err = std::abs(perplexity(*m, data) - 23.0);
    ppl_worst = std::max(ppl_worst, err);
    c.expect(err < 1e-4, "uniform perplexity error " + fmt("%.3g", err));
  }
  return c.outcome("identity " + fmt("%.6f", identity) + ", disjoint " + fmt("%.1f", disjoint) + ", hand case " +
                   fmt("%.6f", got) + ", uniform PPL error " + fmt("%.1e", ppl_worst));
}

// 9. A small transformer memorises a 32-sentence corpus.
Outcome overfit_suite() {
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  const auto sentences = synth_sentences("nba", 32, 11);
  MaskSpec ms;
  ms.mask_rate = 0.3;
  ms.num_blanks = 1;
  ms.seed = 5;
  const auto masked = mask_corpus(sentences, ms);
  c.expect(masked.examples.size() == 32, "masked " + std::to_string(masked.examples.size()) + " of 32");
  const Vocab vocab = build_vocab(sentences, 0);
  const auto data = encode_all(masked.examples, vocab);

  ModelSpec spec;
  spec.kind = ModelKind::self_attn;
  spec.vocab_size = vocab.size();
  spec.d_model = 64;
  spec.num_blocks = 2;
  spec.num_heads = 4;
  spec.ffn_dim = 256;
  spec.dropout = 0.0;
  auto model = make_model<float>(spec, 1);

  TrainOptions o;
  o.epochs = 2000;
  o.batch_size = 32;
  o.max_steps = 2000;
  o.val_every = 25;
  o.schedule = {1.0, 100, spec.d_model};
  o.seed = 3;
  o.threads = worker_threads();
  o.target_val_ppl = 1.05;
  const auto res = train(*model, data, data, o);
  const double ppl = res.best_val_ppl.value_or(INFINITY);
  c.expect(ppl < 1.05, "training PPL " + fmt("%.4f", ppl) + " after " + std::to_string(res.steps) + " steps");

  DecodeOptions d;
  std::size_t exact = 0;
  for (const auto& ex : data) exact += fill_template(*model, ex.templ, d).filled.reconstruct() == ex.original;
  c.expect(exact >= 30, std::to_string(exact) + "/32 exact fills");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 600.0, "runtime " + fmt("%.1f s", secs));
  return c.outcome("training PPL " + fmt("%.4f", ppl) + " at step " + std::to_string(res.best_step) + ", " +
                   std::to_string(exact) + "/32 exact greedy fills, " + fmt("%.1f s", secs));
}

// 10. Trained models against the unigram baseline on a 2K-sentence corpus.
Outcome directional_suite() {
  Checker c;
  const auto start = std::chrono::steady_clock::now();
  const auto sentences = synth_sentences("nba", 2000, 21);
  MaskSpec ms;
  ms.mask_rate = 0.3;
  ms.num_blanks = 2;
  ms.seed = 22;
  const auto masked = mask_corpus(sentences, ms);
  const Vocab vocab = build_vocab(sentences, 0);
  const auto all = encode_all(masked.examples, vocab);
  const std::size_t n_test = all.size() / 10, n_valid = all.size() / 10;
  const std::span<const InfillExample> everything(all);
  const auto test = everything.subspan(0, n_test);
  const auto valid = everything.subspan(n_test, n_valid);
  const auto train_set = everything.subspan(n_test + n_valid);
  const double unigram = unigram_perplexity(train_set, test, vocab.size());

  auto run = [&](ModelKind kind) {
    ModelSpec spec;
    spec.kind = kind;
    spec.vocab_size = vocab.size();
    spec.d_model = 64;
    spec.num_blocks = 2;
    spec.num_heads = 4;
    spec.ffn_dim = 256;
    spec.embedding_size = 64;
    spec.num_units = 64;
    spec.layers = 1;
    spec.dropout = 0.1;
    auto model = make_model<float>(spec, 31);
    TrainOptions o;
    o.epochs = 8;
    o.batch_size = 32;
    o.val_every = 50;
    o.schedule = {1.0, 100, kind == ModelKind::seq2seq ? spec.num_units : spec.d_model};
    o.seed = 32;
    o.threads = worker_threads();
    train(*model, train_set, valid, o);
    return perplexity(*model, test, nullptr, o.threads);
  };
  const double attn = run(ModelKind::self_attn);
  const double s2s = run(ModelKind::seq2seq);
  c.expect(attn < unigram, "self-attn PPL not below unigram");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c.outcome("test PPL self-attn " + fmt("%.3f", attn) + ", seq2seq " + fmt("%.3f", s2s) + ", unigram " +
                   fmt("%.3f", unigram) + "; ordering " + (attn < s2s ? "self-attn < seq2seq" : "seq2seq <= self-attn") +
                   ", " + fmt("%.1f s", secs));
}

// 11. The demo pipeline is reproducible byte for byte in 64-bit mode.
Outcome determinism_suite() {
  Checker c;
  const fs::path conf = fs::path(INFILL_SOURCE_DIR) / "configs" / "demo.conf";
  const auto root = fs::temp_directory_path() / "infill_acceptance_demo";
  fs::remove_all(root);
  auto pipeline = [&](const fs::path& out, const char* threads) {
    setenv("INFILL_THREADS", threads, 1);
    std::ostringstream sink, err;
    auto step = [&](std::vector<std::string> args) {
      args.insert(args.begin() + 1, {"--config", conf.string()});
      const int code = run_cli(args, sink, err);
      c.expect(code == 0, args[0] + " exited " + std::to_string(code) + ": " + err.str());
      return code == 0;
    };
    const std::string o = out.string();
    if (!step({"gen-synth", "--out", o})) return;
    if (!step({"build-vocab", "--corpus", o + "/corpus.txt", "--out", o})) return;
    if (!step({"mask", "--corpus", o + "/corpus.txt", "--out", o})) return;
    if (!step({"train", "--train", o + "/train.tsv", "--valid", o + "/valid.tsv", "--vocab", o + "/vocab.txt",
               "--precision", "f64", "--out", o}))
      return;
    std::ofstream templates(out / "templates.txt");
    for (const auto& ex : read_pairs(out / "test.tsv")) templates << render(ex.templ) << '\n';
    templates.close();
    if (!step({"infill", "--checkpoint", o + "/model.ckpt", "--vocab", o + "/vocab.txt", "--templates",
               o + "/templates.txt", "--precision", "f64", "--out", o + "/infill"}))
      return;
    step({"evaluate", "--checkpoint", o + "/model.ckpt", "--vocab", o + "/vocab.txt", "--test", o + "/test.tsv",
          "--train", o + "/train.tsv", "--precision", "f64", "--out", o + "/eval"});
  };
  pipeline(root / "a", "1");
  pipeline(root / "b", "3");
  unsetenv("INFILL_THREADS");
  const char* files[] = {"corpus.txt", "train.tsv", "metrics.csv", "model.ckpt", "infill/filled.txt",
                         "eval/report.txt", "eval/fills.txt", "eval/logprobs.txt"};
  for (const char* f : files) {
    const auto a = slurp(root / "a" / f), b = slurp(root / "b" / f);
    c.expect(!a.empty() && a == b, std::string(f) + " differs");
  }
  const auto metrics = slurp(root / "a" / "metrics.csv");
  const auto rows = std::count(metrics.begin(), metrics.end(), '\n');
  if (c.ok) fs::remove_all(root);
  return c.outcome("two runs (1 and 3 worker threads) identical across " + std::to_string(std::size(files)) +
                   " artifacts, " + std::to_string(rows - 1) + " metric rows");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    bool blocking;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient suite", gradient_suite, true},
      {2, "positional encoding", positional_encoding_suite, true},
      {3, "causality", causality_suite, true},
      {4, "loss accounting", loss_accounting_suite, true},
      {5, "round trip", round_trip_suite, true},
      {6, "masking statistics", masking_statistics_suite, true},
      {7, "schedule and optimizer", schedule_suite, true},
      {8, "metrics", metrics_suite, true},
      {9, "overfit run", overfit_suite, true},
      {10, "directional comparison", directional_suite, false},
      {11, "determinism", determinism_suite, true},
  };
  int blocking_failures = 0;
  for (const auto& cr : criteria) {
    Outcome out;
    try {
      out = cr.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass && cr.blocking) ++blocking_failures;
    std::printf("%s %2d %s%s: %s\n", out.pass ? "PASS" : "FAIL", cr.id, cr.name, cr.blocking ? "" : " (non-blocking)",
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d blocking failure(s)\n", blocking_failures);
  return blocking_failures == 0 ? 0 : 1;
}
