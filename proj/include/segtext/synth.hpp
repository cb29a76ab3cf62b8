#pragma once

// Seeded generator of boundary-annotated text with planted structure: bursty
// trigger pairs per document, boundary cue words, and a pronoun that only
// appears away from document starts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"

namespace segtext {

struct SynthOptions {
  std::size_t docs = 200;
  std::uint64_t seed = 1;
  std::size_t min_sentences = 12;
  std::size_t max_sentences = 28;
  std::size_t min_words = 6;
  std::size_t max_words = 14;
  std::size_t general_words = 300;
  double zipf_exponent = 1.0;

  /// Planted (s, t) pairs; the last cross_pairs have s != t, the rest are
  /// self-triggers.
  std::size_t planted_pairs = 50;
  std::size_t cross_pairs = 5;
  std::size_t pairs_per_doc = 3;
  /// Per-token probability of emitting each activated pair's target.
  double burst_rate = 0.04;
  /// A pair's trigger word first appears in a sentence drawn from [0, span).
  std::size_t activation_span = 8;

  double start_cue_rate = 0.5;
  std::string start_cue = "begin";
  double end_cue_rate = 0.3;
  std::string end_cue = "closing";
  double pronoun_rate = 0.25;
  std::string pronoun = "he";
};

struct SynthCorpus {
  SurfaceCorpus corpus;
  std::vector<std::pair<std::string, std::string>> planted_pairs;
};

inline SynthCorpus synthesize(const SynthOptions& opts) {
  if (opts.docs < 1) throw Error("synthetic corpus needs at least one document");
  if (opts.min_sentences < 1 || opts.max_sentences < opts.min_sentences)
    throw Error("invalid sentence-count range");
  if (opts.min_words < 1 || opts.max_words < opts.min_words) throw Error("invalid sentence-length range");
  if (opts.general_words < 1) throw Error("need at least one general word");
  if (opts.cross_pairs > opts.planted_pairs) throw Error("more cross pairs than planted pairs");
  if (opts.pairs_per_doc > opts.planted_pairs) throw Error("more pairs per document than planted");
  if (opts.burst_rate < 0 || opts.burst_rate * static_cast<double>(opts.pairs_per_doc) >= 1.0)
    throw Error("burst rate too large for the pairs per document");

  std::mt19937_64 rng(opts.seed);
  auto uniform_index = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  auto coin = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  std::vector<std::string> general(opts.general_words);
  std::vector<double> zipf(opts.general_words);
  for (std::size_t r = 0; r < opts.general_words; ++r) {
    general[r] = "w" + std::to_string(r);
    zipf[r] = 1.0 / std::pow(static_cast<double>(r + 1), opts.zipf_exponent);
  }
  std::discrete_distribution<std::size_t> general_dist(zipf.begin(), zipf.end());

  SynthCorpus out;
  std::size_t n_self = opts.planted_pairs - opts.cross_pairs;
  for (std::size_t k = 0; k < opts.planted_pairs; ++k) {
    if (k < n_self) {
      std::string w = "topic" + std::to_string(k);
      out.planted_pairs.emplace_back(w, w);
    } else {
      out.planted_pairs.emplace_back("lead" + std::to_string(k), "follow" + std::to_string(k));
    }
  }

  std::vector<std::size_t> pair_order(opts.planted_pairs);
  for (std::size_t d = 0; d < opts.docs; ++d) {
    std::size_t n_sent = opts.min_sentences + uniform_index(opts.max_sentences - opts.min_sentences + 1);
    for (std::size_t k = 0; k < pair_order.size(); ++k) pair_order[k] = k;
    std::vector<std::size_t> pairs, activation;
    for (std::size_t i = 0; i < opts.pairs_per_doc; ++i) {
      std::size_t j = i + uniform_index(pair_order.size() - i);
      std::swap(pair_order[i], pair_order[j]);
      pairs.push_back(pair_order[i]);
      activation.push_back(uniform_index(std::min(opts.activation_span, n_sent)));
    }

    std::size_t first = out.corpus.sentences.size();
    for (std::size_t s = 0; s < n_sent; ++s) {
      std::size_t len = opts.min_words + uniform_index(opts.max_words - opts.min_words + 1);
      std::vector<std::string> sentence;
      for (std::size_t i = 0; i < len; ++i) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        std::string word;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          if (activation[p] >= s) continue;
          if (u < opts.burst_rate) {
            word = out.planted_pairs[pairs[p]].second;
            break;
          }
          u -= opts.burst_rate;
        }
        if (word.empty()) word = general[general_dist(rng)];
        sentence.push_back(std::move(word));
      }
      for (std::size_t p = 0; p < pairs.size(); ++p)
        if (activation[p] == s)
          sentence.insert(sentence.begin() + static_cast<std::ptrdiff_t>(uniform_index(sentence.size() + 1)),
                          out.planted_pairs[pairs[p]].first);
      if (s == n_sent - 1 && n_sent > 1 && coin(opts.end_cue_rate))
        sentence.insert(sentence.begin() + static_cast<std::ptrdiff_t>(uniform_index(sentence.size() + 1)),
                        opts.end_cue);
      if (s == 0 && coin(opts.start_cue_rate)) sentence.insert(sentence.begin(), opts.start_cue);
      if (s > 0 && coin(opts.pronoun_rate)) sentence.insert(sentence.begin(), opts.pronoun);
      out.corpus.sentences.push_back(std::move(sentence));
    }
    out.corpus.doc_spans.push_back({first, out.corpus.sentences.size() - 1});
  }
  return out;
}

}  // namespace segtext
