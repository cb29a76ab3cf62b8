// segtext: command-line driver for the segmentation pipeline.
//
//   synth -> build-vocab -> train-trigram -> select-triggers -> train-triggers
//         -> relevance-profile / extract-events -> induce -> tune -> segment
//         -> evaluate / baseline
//
// Every subcommand reads all of its inputs and finishes its computation
// before any output file is opened.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segtext/corpus.hpp"
#include "segtext/features.hpp"
#include "segtext/induction.hpp"
#include "segtext/metric.hpp"
#include "segtext/relevance.hpp"
#include "segtext/segmenter.hpp"
#include "segtext/synth.hpp"
#include "segtext/trigger.hpp"
#include "segtext/trigram.hpp"

namespace {

using namespace segtext;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

// Writes `text` to `path`, or to stdout for "-".
void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

SurfaceCorpus read_surface(const std::string& path, const std::string& delim) {
  auto in = open_input(path);
  try {
    return load_corpus(in, delim);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

Vocabulary read_vocab(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_vocabulary(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

Segmentation read_seg(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_segmentation(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

unsigned default_threads() {
  if (const char* env = std::getenv("SEGTEXT_THREADS")) {
    try {
      auto n = detail::parse_count(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const Error&) {
    }
    throw Error("SEGTEXT_THREADS must be a positive integer");
  }
  return 1;
}

// Flags shared by every subcommand that needs the language models.
struct ModelPaths {
  std::string vocab;
  std::string trigram;
  std::string triggers;
  std::size_t window = 500;

  void add(CLI::App* app, bool need_triggers = true) {
    app->add_option("--vocab", vocab, "vocabulary file")->required();
    app->add_option("--trigram", trigram, "ARPA trigram model")->required();
    if (need_triggers) {
      app->add_option("--triggers", triggers, "trigger pair file")->required();
      app->add_option("--window", window, "trigger history window in words")->check(CLI::PositiveNumber);
    }
  }
};

struct Models {
  Vocabulary vocab;
  std::shared_ptr<const TrigramModel> trigram;
  std::optional<TriggerModel> trigger;
};

Models load_models(const ModelPaths& p, bool need_triggers = true) {
  Models m;
  m.vocab = read_vocab(p.vocab);
  {
    auto in = open_input(p.trigram);
    try {
      m.trigram = std::make_shared<const TrigramModel>(TrigramModel::read_arpa(in, m.vocab));
    } catch (const Error& e) {
      throw Error(p.trigram + ": " + e.what());
    }
  }
  if (need_triggers) {
    auto in = open_input(p.triggers);
    try {
      m.trigger.emplace(m.trigram, read_triggers(in, m.vocab), p.window);
    } catch (const Error& e) {
      throw Error(p.triggers + ": " + e.what());
    }
  }
  return m;
}

BoundaryModel read_model_file(const std::string& path, const Vocabulary& vocab) {
  auto in = open_input(path);
  try {
    return read_boundary_model(in, vocab);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

// 1 / mean segment length of the reference unless given.
double resolve_mu(std::optional<double> mu, const Segmentation& ref) {
  if (mu) {
    if (!(*mu > 0.0) || !std::isfinite(*mu)) throw Error("--mu must be positive");
    return *mu;
  }
  return static_cast<double>(ref.document_count()) / static_cast<double>(ref.n_sentences());
}

std::size_t mean_length(const Segmentation& ref) {
  double len = static_cast<double>(ref.n_sentences()) / static_cast<double>(ref.document_count());
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(len)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical text segmentation with trigger language models and induced boundary features"};
  app.require_subcommand(1);
  std::string delim(kDefaultDelimiter);
  app.add_option("--delimiter", delim, "document delimiter line in corpus files");

  std::optional<unsigned> threads_opt;
  auto threads = [&] { return threads_opt ? std::max(1u, *threads_opt) : default_threads(); };
  std::uint64_t seed = 1;

  // ---- synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted structure");
  SynthOptions so;
  std::string synth_out = "-", synth_pairs;
  synth->add_option("--docs", so.docs, "number of documents")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "random seed");
  synth->add_option("--min-sentences", so.min_sentences);
  synth->add_option("--max-sentences", so.max_sentences);
  synth->add_option("--min-words", so.min_words);
  synth->add_option("--max-words", so.max_words);
  synth->add_option("--general-words", so.general_words, "size of the background vocabulary");
  synth->add_option("--planted-pairs", so.planted_pairs);
  synth->add_option("--cross-pairs", so.cross_pairs);
  synth->add_option("--pairs-per-doc", so.pairs_per_doc);
  synth->add_option("--burst-rate", so.burst_rate);
  synth->add_option("--start-cue-rate", so.start_cue_rate);
  synth->add_option("--end-cue-rate", so.end_cue_rate);
  synth->add_option("--pronoun-rate", so.pronoun_rate);
  synth->add_option("--out", synth_out, "corpus output (- for stdout)");
  synth->add_option("--pairs-out", synth_pairs, "planted pair list output");

  // ---- build-vocab
  auto* bv = app.add_subcommand("build-vocab", "build a frequency-ranked vocabulary");
  std::string bv_corpus, bv_out;
  std::size_t bv_size = 20000;
  bv->add_option("--corpus", bv_corpus)->required();
  bv->add_option("--size", bv_size, "vocabulary size including reserved tokens");
  bv->add_option("--out", bv_out)->required();

  // ---- train-trigram
  auto* tt = app.add_subcommand("train-trigram", "train a Katz backoff trigram model");
  std::string tt_corpus, tt_vocab, tt_out;
  KatzOptions katz;
  tt->add_option("--corpus", tt_corpus)->required();
  tt->add_option("--vocab", tt_vocab)->required();
  tt->add_option("--cutoff", katz.discount_cutoff, "largest discounted count");
  tt->add_option("--out", tt_out)->required();

  // ---- select-triggers
  auto* st = app.add_subcommand("select-triggers", "rank trigger pairs by mutual information");
  std::string st_corpus, st_vocab, st_out;
  TriggerSelectionOptions sel;
  st->add_option("--corpus", st_corpus)->required();
  st->add_option("--vocab", st_vocab)->required();
  st->add_option("--window", sel.window_n)->check(CLI::PositiveNumber);
  st->add_option("--max-pairs", sel.max_pairs)->check(CLI::PositiveNumber);
  st->add_option("--min-cooccur", sel.min_cooccur);
  st->add_option("--min-freq", sel.min_word_freq);
  st->add_option("--out", st_out)->required();

  // ---- train-triggers
  auto* trt = app.add_subcommand("train-triggers", "fit trigger pair weights by iterative scaling");
  std::string trt_corpus, trt_out, trt_log;
  ModelPaths trt_models;
  TriggerTrainOptions tro;
  trt->add_option("--corpus", trt_corpus)->required();
  trt_models.add(trt);
  trt->add_option("--iterations", tro.iterations);
  trt->add_option("--max-words", tro.max_words, "train on leading documents up to this many words (0 = all)");
  trt->add_option("--threads", threads_opt);
  trt->add_option("--out", trt_out)->required();
  trt->add_option("--log", trt_log, "per-iteration log-likelihood output");

  // ---- relevance-profile
  auto* rp = app.add_subcommand("relevance-profile", "mean sentence relevance by offset from document starts");
  std::string rp_corpus, rp_out = "-";
  ModelPaths rp_models;
  std::size_t rp_max = 20;
  rp->add_option("--corpus", rp_corpus)->required();
  rp_models.add(rp);
  rp->add_option("--max-offset", rp_max);
  rp->add_option("--out", rp_out);

  // ---- extract-events
  auto* ee = app.add_subcommand("extract-events", "list labelled boundary events");
  std::string ee_corpus, ee_out = "-";
  ModelPaths ee_models;
  ee->add_option("--corpus", ee_corpus)->required();
  ee_models.add(ee);
  ee->add_option("--out", ee_out);

  // ---- induce
  auto* ind = app.add_subcommand("induce", "greedily induce a boundary model");
  std::string ind_corpus, ind_out, ind_trace;
  ModelPaths ind_models;
  InductionOptions io;
  std::size_t ind_rank = 5000;
  ind->add_option("--corpus", ind_corpus)->required();
  ind_models.add(ind);
  ind->add_option("--num-features", io.num_features);
  ind->add_option("--max-word-rank", ind_rank, "candidate words from the top of the vocabulary");
  ind->add_option("--refit-every", io.refit_every);
  ind->add_option("--iis-iters", io.iis_max_iters);
  ind->add_option("--q0", io.q0_yes, "prior boundary probability (default: empirical rate)");
  ind->add_option("--threads", threads_opt);
  ind->add_option("--out", ind_out)->required();
  ind->add_option("--trace", ind_trace, "selection trace output");

  // ---- tune
  auto* tu = app.add_subcommand("tune", "choose threshold and separation on heldout data");
  std::string tu_corpus, tu_model, tu_out = "-";
  ModelPaths tu_models;
  std::optional<double> tu_mu;
  tu->add_option("--heldout", tu_corpus)->required();
  tu_models.add(tu);
  tu->add_option("--model", tu_model)->required();
  tu->add_option("--mu", tu_mu, "distance decay (default: 1 / mean document length)");
  tu->add_option("--out", tu_out);

  // ---- segment
  auto* sg = app.add_subcommand("segment", "place boundaries in text");
  std::string sg_corpus, sg_model, sg_config, sg_out = "-", sg_probs, sg_ref;
  ModelPaths sg_models;
  std::optional<double> sg_alpha;
  std::optional<std::size_t> sg_eps;
  sg->add_option("--text", sg_corpus, "input text; its document structure is ignored")->required();
  sg_models.add(sg);
  sg->add_option("--model", sg_model)->required();
  sg->add_option("--config", sg_config, "tuned decision config");
  sg->add_option("--alpha", sg_alpha);
  sg->add_option("--epsilon", sg_eps);
  sg->add_option("--out", sg_out, "boundary output");
  sg->add_option("--probs-out", sg_probs, "per-gap probability output");
  sg->add_option("--ref-out", sg_ref, "reference segmentation of the input text");

  // ---- evaluate
  auto* ev = app.add_subcommand("evaluate", "score hypotheses against a reference");
  std::string ev_ref, ev_ref_corpus;
  std::vector<std::string> ev_hyp;
  std::optional<double> ev_mu;
  bool ev_tsv = false, ev_baselines = false;
  auto* ev_ref_opt = ev->add_option("--ref", ev_ref, "reference segmentation file");
  auto* ev_refc_opt = ev->add_option("--ref-corpus", ev_ref_corpus, "corpus whose documents are the reference");
  ev_ref_opt->excludes(ev_refc_opt);
  ev->add_option("--hyp", ev_hyp, "hypothesis segmentation file(s)");
  ev->add_option("--mu", ev_mu, "distance decay (default: 1 / mean reference segment length)");
  ev->add_flag("--tsv", ev_tsv, "machine-readable output");
  ev->add_flag("--baselines", ev_baselines, "add random/all/none/even rows");
  ev->add_option("--seed", seed, "seed for the random baseline");

  // ---- baseline
  auto* bl = app.add_subcommand("baseline", "write a baseline segmentation");
  std::string bl_ref, bl_ref_corpus, bl_kind, bl_out = "-";
  auto* bl_ref_opt = bl->add_option("--ref", bl_ref);
  auto* bl_refc_opt = bl->add_option("--ref-corpus", bl_ref_corpus);
  bl_ref_opt->excludes(bl_refc_opt);
  bl->add_option("--kind", bl_kind, "random, all, none or even")->required();
  bl->add_option("--seed", seed);
  bl->add_option("--out", bl_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      so.seed = seed;
      auto s = synthesize(so);
      std::string corpus_text = render([&](std::ostream& os) { write_corpus(s.corpus, os, delim); });
      emit(synth_out, corpus_text);
      if (!synth_pairs.empty())
        emit(synth_pairs, render([&](std::ostream& os) {
               for (const auto& [a, b] : s.planted_pairs) os << a << '\t' << b << '\n';
             }));
    } else if (bv->parsed()) {
      auto corpus = read_surface(bv_corpus, delim);
      auto vocab = build_vocabulary(corpus, bv_size);
      emit(bv_out, render([&](std::ostream& os) { write_vocabulary(vocab, os); }));
    } else if (tt->parsed()) {
      auto vocab = read_vocab(tt_vocab);
      auto corpus = encode(read_surface(tt_corpus, delim), vocab);
      auto model = train_trigram(corpus, vocab, katz);
      emit(tt_out, render([&](std::ostream& os) { model.write_arpa(os); }));
    } else if (st->parsed()) {
      auto vocab = read_vocab(st_vocab);
      auto corpus = encode(read_surface(st_corpus, delim), vocab);
      auto pairs = select_triggers(corpus, vocab, sel);
      emit(st_out, render([&](std::ostream& os) { write_triggers(pairs, vocab, os); }));
    } else if (trt->parsed()) {
      auto m = load_models(trt_models);
      auto corpus = encode(read_surface(trt_corpus, delim), m.vocab);
      tro.threads = threads();
      auto result = train_triggers_iis(*m.trigger, corpus, tro);
      std::string pairs = render([&](std::ostream& os) { write_triggers(result.model.pairs(), m.vocab, os); });
      emit(trt_out, pairs);
      if (!trt_log.empty())
        emit(trt_log, render([&](std::ostream& os) {
               for (std::size_t i = 0; i < result.log_likelihood.size(); ++i)
                 os << i << '\t' << detail::format_double(result.log_likelihood[i], 10) << '\n';
             }));
      std::cerr << "iterations: " << result.iterations_run << "  mean log-likelihood: "
                << result.log_likelihood.front() << " -> " << result.log_likelihood.back() << '\n';
    } else if (rp->parsed()) {
      auto m = load_models(rp_models);
      auto corpus = encode(read_surface(rp_corpus, delim), m.vocab);
      auto rows = relevance_profile(*m.trigger, corpus, rp_max);
      emit(rp_out, render([&](std::ostream& os) { write_profile(rows, os); }));
    } else if (ee->parsed()) {
      auto m = load_models(ee_models);
      auto corpus = encode(read_surface(ee_corpus, delim), m.vocab);
      auto events = extract_events(corpus, *m.trigger);
      emit(ee_out, render([&](std::ostream& os) {
             os << "gap\tlabel\trelevance_next\n";
             for (std::size_t i = 0; i < events.size(); ++i)
               os << (i + 1) << '\t' << (events.label(i) ? "YES" : "NO") << '\t'
                  << detail::format_double(events.relevance()[i + 1], 10) << '\n';
           }));
    } else if (ind->parsed()) {
      auto m = load_models(ind_models);
      auto corpus = encode(read_surface(ind_corpus, delim), m.vocab);
      auto events = extract_events(corpus, *m.trigger);
      auto candidates =
          generate_candidates(m.vocab, std::min(ind_rank, m.vocab.size()), default_relevance_bins());
      io.threads = threads();
      auto result = induce(events, candidates, io);
      emit(ind_out, render([&](std::ostream& os) { write_boundary_model(result.model, m.vocab, os); }));
      if (!ind_trace.empty())
        emit(ind_trace, render([&](std::ostream& os) { write_trace(result.trace, m.vocab, os); }));
      std::cerr << "selected " << result.model.features.size() << " of " << candidates.size()
                << " candidates; mean log-likelihood " << result.prior_log_likelihood << " -> "
                << (result.trace.empty() ? result.prior_log_likelihood : result.trace.back().log_likelihood)
                << '\n';
    } else if (tu->parsed()) {
      auto m = load_models(tu_models);
      auto model = read_model_file(tu_model, m.vocab);
      auto heldout = encode(read_surface(tu_corpus, delim), m.vocab);
      double mu = resolve_mu(tu_mu, heldout.reference());
      auto best = tune(model, *m.trigger, heldout, mu);
      emit(tu_out, render([&](std::ostream& os) {
             write_config(best.config, os);
             os << "p_mu\t" << detail::format_double(best.p_mu) << '\n';
           }));
    } else if (sg->parsed()) {
      auto m = load_models(sg_models);
      auto model = read_model_file(sg_model, m.vocab);
      SegmenterConfig cfg;
      if (!sg_config.empty()) {
        auto in = open_input(sg_config);
        cfg = read_config(in);
      }
      if (sg_alpha) cfg.alpha = *sg_alpha;
      if (sg_eps) cfg.epsilon = *sg_eps;
      cfg.validate();
      auto text = encode(read_surface(sg_corpus, delim), m.vocab);
      auto probs = score_gaps(model, *m.trigger, text);
      auto seg = decide(probs, cfg);
      std::string seg_text = render([&](std::ostream& os) { write_segmentation(seg, os); });
      std::string probs_text = render([&](std::ostream& os) { write_gap_probs(probs, os); });
      std::string ref_text = render([&](std::ostream& os) { write_segmentation(text.reference(), os); });
      emit(sg_out, seg_text);
      if (!sg_probs.empty()) emit(sg_probs, probs_text);
      if (!sg_ref.empty()) emit(sg_ref, ref_text);
    } else if (ev->parsed()) {
      if (ev_ref.empty() && ev_ref_corpus.empty()) throw Error("evaluate needs --ref or --ref-corpus");
      if (ev_hyp.empty() && !ev_baselines) throw Error("evaluate needs --hyp or --baselines");
      Segmentation ref = ev_ref.empty() ? read_surface(ev_ref_corpus, delim).reference() : read_seg(ev_ref);
      double mu = resolve_mu(ev_mu, ref);
      std::vector<MetricReport> rows;
      for (const auto& path : ev_hyp) {
        auto hyp = read_seg(path);
        if (hyp.n_sentences() != ref.n_sentences())
          throw Error(path + ": " + std::to_string(hyp.n_sentences()) + " sentences, reference has " +
                      std::to_string(ref.n_sentences()));
        rows.push_back(evaluate(std::filesystem::path(path).stem().string(), ref, hyp, mu));
      }
      if (ev_baselines) {
        std::size_t mean_len = mean_length(ref);
        for (auto kind : {BaselineKind::Random, BaselineKind::All, BaselineKind::None, BaselineKind::Even})
          rows.push_back(evaluate(std::string(baseline_name(kind)), ref,
                                  baseline(kind, ref.n_sentences(), ref.document_count(), mean_len, seed), mu));
      }
      std::cout << render([&](std::ostream& os) {
        if (ev_tsv)
          write_report_tsv(rows, os);
        else
          write_report_table(rows, os);
      });
    } else if (bl->parsed()) {
      if (bl_ref.empty() && bl_ref_corpus.empty()) throw Error("baseline needs --ref or --ref-corpus");
      auto kind = parse_baseline_kind(bl_kind);
      Segmentation ref = bl_ref.empty() ? read_surface(bl_ref_corpus, delim).reference() : read_seg(bl_ref);
      std::size_t mean_len = mean_length(ref);
      auto seg = baseline(kind, ref.n_sentences(), ref.document_count(), mean_len, seed);
      emit(bl_out, render([&](std::ostream& os) { write_segmentation(seg, os); }));
    }
  } catch (const std::exception& e) {
    std::cerr << "segtext: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
