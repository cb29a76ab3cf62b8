#pragma once

// Candidate boundary features: word questions about the sentences and words
// around a gap, and bins of the relevance of the following sentences.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"
#include "segtext/relevance.hpp"
#include "segtext/trigger.hpp"

namespace segtext {

enum class FeatureKind {
  WordInNextKSentences,
  WordInPrevKSentences,
  WordPrevKNotNextK,
  WordNextKNotPrevK,
  WordInNextKWords,
  WordInPrevKWords,
  WordBeginsPrecedingSentence,
  RelevanceBin,
};

inline constexpr std::size_t kSentenceReach = 5;
inline constexpr std::size_t kWordReach = 5;
inline constexpr std::size_t kRelevanceReach = 2;

inline std::string_view kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::WordInNextKSentences: return "next_sentences";
    case FeatureKind::WordInPrevKSentences: return "prev_sentences";
    case FeatureKind::WordPrevKNotNextK: return "prev_not_next";
    case FeatureKind::WordNextKNotPrevK: return "next_not_prev";
    case FeatureKind::WordInNextKWords: return "next_words";
    case FeatureKind::WordInPrevKWords: return "prev_words";
    case FeatureKind::WordBeginsPrecedingSentence: return "begins_preceding";
    case FeatureKind::RelevanceBin: return "relevance";
  }
  return "?";
}

inline FeatureKind parse_kind(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(FeatureKind::RelevanceBin); ++i) {
    auto k = static_cast<FeatureKind>(i);
    if (kind_name(k) == name) return k;
  }
  throw FormatError("unknown feature kind '" + std::string(name) + "'");
}

/// A binary question about a boundary context. Word templates use `word` and
/// span `k`; RelevanceBin fires when the mean relevance of the next `k`
/// sentences lies in (lo, hi].
struct FeatureTemplate {
  FeatureKind kind = FeatureKind::WordInNextKSentences;
  TokenId word = 0;
  std::size_t k = 1;
  double lo = 0.0;
  double hi = 0.0;

  static FeatureTemplate word_feature(FeatureKind kind, TokenId word, std::size_t k) {
    FeatureTemplate f{kind, word, k, 0.0, 0.0};
    f.validate();
    return f;
  }

  static FeatureTemplate relevance_bin(double lo, double hi, std::size_t span) {
    FeatureTemplate f{FeatureKind::RelevanceBin, 0, span, lo, hi};
    f.validate();
    return f;
  }

  void validate() const {
    auto one_of = [&](std::initializer_list<std::size_t> allowed) {
      return std::find(allowed.begin(), allowed.end(), k) != allowed.end();
    };
    bool ok = true;
    switch (kind) {
      case FeatureKind::WordInNextKSentences:
      case FeatureKind::WordInPrevKSentences: ok = one_of({1, 2, 3, 5}); break;
      case FeatureKind::WordPrevKNotNextK:
      case FeatureKind::WordNextKNotPrevK: ok = k == 5; break;
      case FeatureKind::WordInNextKWords:
      case FeatureKind::WordInPrevKWords: ok = one_of({1, 5}); break;
      case FeatureKind::WordBeginsPrecedingSentence: ok = k == 1; break;
      case FeatureKind::RelevanceBin:
        ok = k >= 1 && k <= kRelevanceReach && lo < hi;
        break;
    }
    if (!ok) throw Error("invalid parameters for feature kind " + std::string(kind_name(kind)));
  }

  bool is_word_feature() const { return kind != FeatureKind::RelevanceBin; }

  friend bool operator==(const FeatureTemplate& a, const FeatureTemplate& b) {
    if (a.kind != b.kind || a.k != b.k) return false;
    return a.kind == FeatureKind::RelevanceBin ? (a.lo == b.lo && a.hi == b.hi) : a.word == b.word;
  }
};

/// Human-readable description, e.g. "next_sentences(incorporated,1)".
inline std::string describe(const FeatureTemplate& f, const Vocabulary& vocab) {
  std::string arg = f.is_word_feature()
                        ? vocab.word(f.word)
                        : detail::format_double(f.lo, 6) + "<R<=" + detail::format_double(f.hi, 6);
  return std::string(kind_name(f.kind)) + "(" + arg + "," + std::to_string(f.k) + ")";
}

// ---------------------------------------------------------------------------
// Boundary context
// ---------------------------------------------------------------------------

/// Neighbourhood of gap g: sentences g, g+1, ... follow it and g-1, g-2, ...
/// precede it. Reads never leave the corpus.
class BoundaryContext {
public:
  BoundaryContext(const Corpus& corpus, std::span<const double> relevance, std::size_t gap)
      : corpus_(&corpus), relevance_(relevance), gap_(gap) {
    if (gap < 1 || gap >= corpus.n_sentences()) throw Error("gap index outside the corpus");
    if (relevance.size() != corpus.n_sentences())
      throw Error("relevance vector does not match the corpus");
  }

  std::size_t gap() const { return gap_; }

  std::size_t sentences_after() const {
    return std::min(kSentenceReach, corpus_->n_sentences() - gap_);
  }
  std::size_t sentences_before() const { return std::min(kSentenceReach, gap_); }
  bool truncated_after() const { return sentences_after() < kSentenceReach; }
  bool truncated_before() const { return sentences_before() < kSentenceReach; }

  /// j = 0 is the sentence right after the gap.
  const std::vector<TokenId>& next_sentence(std::size_t j) const {
    if (j >= sentences_after()) throw Error("sentence outside the context window");
    return corpus_->sentences[gap_ + j];
  }
  /// j = 0 is the sentence right before the gap.
  const std::vector<TokenId>& prev_sentence(std::size_t j) const {
    if (j >= sentences_before()) throw Error("sentence outside the context window");
    return corpus_->sentences[gap_ - 1 - j];
  }

  /// Up to kWordReach words after the gap, crossing sentence ends.
  std::vector<TokenId> next_words() const {
    std::vector<TokenId> out;
    for (std::size_t s = gap_; s < corpus_->n_sentences() && out.size() < kWordReach; ++s)
      for (TokenId w : corpus_->sentences[s]) {
        if (out.size() == kWordReach) break;
        out.push_back(w);
      }
    return out;
  }

  /// Up to kWordReach words before the gap, nearest first.
  std::vector<TokenId> prev_words() const {
    std::vector<TokenId> out;
    for (std::size_t s = gap_; s-- > 0 && out.size() < kWordReach;) {
      const auto& sent = corpus_->sentences[s];
      for (std::size_t i = sent.size(); i-- > 0;) {
        if (out.size() == kWordReach) break;
        out.push_back(sent[i]);
      }
    }
    return out;
  }

  /// Sentence relevance; j = 0 is the sentence right after the gap.
  double relevance_after(std::size_t j) const {
    if (j >= kRelevanceReach || gap_ + j >= corpus_->n_sentences())
      throw Error("relevance outside the context window");
    return relevance_[gap_ + j];
  }
  double relevance_before(std::size_t j) const {
    if (j >= kRelevanceReach || j >= gap_) throw Error("relevance outside the context window");
    return relevance_[gap_ - 1 - j];
  }
  std::size_t relevance_after_available() const {
    return std::min(kRelevanceReach, corpus_->n_sentences() - gap_);
  }

private:
  const Corpus* corpus_;
  std::span<const double> relevance_;
  std::size_t gap_;
};

namespace detail {

inline bool contains(const std::vector<TokenId>& v, TokenId w) {
  return std::find(v.begin(), v.end(), w) != v.end();
}

inline bool in_next_sentences(const BoundaryContext& c, TokenId w, std::size_t k) {
  for (std::size_t j = 0; j < std::min(k, c.sentences_after()); ++j)
    if (contains(c.next_sentence(j), w)) return true;
  return false;
}

inline bool in_prev_sentences(const BoundaryContext& c, TokenId w, std::size_t k) {
  for (std::size_t j = 0; j < std::min(k, c.sentences_before()); ++j)
    if (contains(c.prev_sentence(j), w)) return true;
  return false;
}

inline double mean_relevance_after(const BoundaryContext& c, std::size_t span) {
  std::size_t n = std::min(span, c.relevance_after_available());
  double sum = 0;
  for (std::size_t j = 0; j < n; ++j) sum += c.relevance_after(j);
  return sum / static_cast<double>(n);
}

}  // namespace detail

inline bool evaluate_feature(const FeatureTemplate& f, const BoundaryContext& c) {
  switch (f.kind) {
    case FeatureKind::WordInNextKSentences: return detail::in_next_sentences(c, f.word, f.k);
    case FeatureKind::WordInPrevKSentences: return detail::in_prev_sentences(c, f.word, f.k);
    case FeatureKind::WordPrevKNotNextK:
      return detail::in_prev_sentences(c, f.word, f.k) && !detail::in_next_sentences(c, f.word, f.k);
    case FeatureKind::WordNextKNotPrevK:
      return detail::in_next_sentences(c, f.word, f.k) && !detail::in_prev_sentences(c, f.word, f.k);
    case FeatureKind::WordInNextKWords: {
      auto words = c.next_words();
      if (words.size() > f.k) words.resize(f.k);
      return detail::contains(words, f.word);
    }
    case FeatureKind::WordInPrevKWords: {
      auto words = c.prev_words();
      if (words.size() > f.k) words.resize(f.k);
      return detail::contains(words, f.word);
    }
    case FeatureKind::WordBeginsPrecedingSentence:
      return c.prev_sentence(0).front() == f.word;
    case FeatureKind::RelevanceBin: {
      double r = detail::mean_relevance_after(c, f.k);
      return f.lo < r && r <= f.hi;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Candidate generation
// ---------------------------------------------------------------------------

struct WordTemplateSlot {
  FeatureKind kind;
  std::size_t k;
};

/// The fifteen word questions asked of every candidate word, in candidate order.
inline constexpr std::array<WordTemplateSlot, 15> kWordTemplates = {{
    {FeatureKind::WordInNextKSentences, 1},
    {FeatureKind::WordInNextKSentences, 2},
    {FeatureKind::WordInNextKSentences, 3},
    {FeatureKind::WordInNextKSentences, 5},
    {FeatureKind::WordInPrevKSentences, 1},
    {FeatureKind::WordInPrevKSentences, 2},
    {FeatureKind::WordInPrevKSentences, 3},
    {FeatureKind::WordInPrevKSentences, 5},
    {FeatureKind::WordPrevKNotNextK, 5},
    {FeatureKind::WordNextKNotPrevK, 5},
    {FeatureKind::WordInNextKWords, 1},
    {FeatureKind::WordInNextKWords, 5},
    {FeatureKind::WordInPrevKWords, 1},
    {FeatureKind::WordInPrevKWords, 5},
    {FeatureKind::WordBeginsPrecedingSentence, 1},
}};

struct RelevanceBinSpec {
  double lo;
  double hi;
  std::size_t span;
};

/// Every interval between the edges {-inf, -0.5, -0.1, 0, 0.05, 0.1, 0.5, inf}
/// (except the whole line), over the next 1 and next 2 sentences.
inline std::vector<RelevanceBinSpec> default_relevance_bins() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::array<double, 8> edges = {-inf, -0.5, -0.1, 0.0, 0.05, 0.1, 0.5, inf};
  std::vector<RelevanceBinSpec> bins;
  for (std::size_t span = 1; span <= kRelevanceReach; ++span)
    for (std::size_t i = 0; i < edges.size(); ++i)
      for (std::size_t j = i + 1; j < edges.size(); ++j) {
        if (std::isinf(edges[i]) && std::isinf(edges[j])) continue;
        bins.push_back({edges[i], edges[j], span});
      }
  return bins;
}

/// Word templates for the max_word_rank most frequent words (reserved tokens
/// excluded), then one RelevanceBin per bin.
inline std::vector<FeatureTemplate> generate_candidates(const Vocabulary& vocab,
                                                        std::size_t max_word_rank,
                                                        const std::vector<RelevanceBinSpec>& bins) {
  if (max_word_rank > vocab.size()) throw Error("max_word_rank exceeds the vocabulary size");
  std::size_t n_words = std::min(max_word_rank, vocab.size() - Vocabulary::kReserved);
  std::vector<FeatureTemplate> out;
  out.reserve(n_words * kWordTemplates.size() + bins.size());
  for (std::size_t r = 0; r < n_words; ++r) {
    TokenId w = static_cast<TokenId>(Vocabulary::kReserved + r);
    for (const auto& slot : kWordTemplates) out.push_back(FeatureTemplate::word_feature(slot.kind, w, slot.k));
  }
  for (const auto& b : bins) out.push_back(FeatureTemplate::relevance_bin(b.lo, b.hi, b.span));
  return out;
}

// ---------------------------------------------------------------------------
// Training events
// ---------------------------------------------------------------------------

struct TrainingEvent {
  std::size_t gap = 0;
  bool boundary = false;
};

/// One event per inter-sentence gap, with the corpus and per-sentence
/// relevance the contexts read from. Event i describes gap i + 1.
class EventSet {
public:
  EventSet() = default;

  EventSet(Corpus corpus, std::vector<double> relevance, std::vector<char> labels)
      : corpus_(std::move(corpus)), relevance_(std::move(relevance)), labels_(std::move(labels)) {
    if (corpus_.n_sentences() < 2) throw Error("boundary events need at least 2 sentences");
    if (relevance_.size() != corpus_.n_sentences())
      throw Error("relevance vector does not match the corpus");
    if (labels_.size() != corpus_.n_sentences() - 1) throw Error("one label per gap required");
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  bool label(std::size_t i) const { return labels_.at(i) != 0; }
  TrainingEvent event(std::size_t i) const { return {i + 1, label(i)}; }
  BoundaryContext context(std::size_t i) const { return BoundaryContext(corpus_, relevance_, i + 1); }

  const Corpus& corpus() const { return corpus_; }
  const std::vector<double>& relevance() const { return relevance_; }

  std::size_t yes_count() const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), char{1}));
  }
  double yes_rate() const { return static_cast<double>(yes_count()) / static_cast<double>(size()); }

private:
  Corpus corpus_;
  std::vector<double> relevance_;
  std::vector<char> labels_;
};

/// Labels each gap YES exactly at document boundaries. Relevance is computed
/// with a cache that runs across boundaries, matching test-time conditions.
inline EventSet extract_events(const Corpus& corpus, const TriggerModel& trig) {
  if (corpus.n_sentences() < 2) throw Error("boundary events need at least 2 sentences");
  corpus.validate();
  auto relevance = sentence_relevances(trig, corpus, false);
  std::vector<char> labels(corpus.n_sentences() - 1, 0);
  for (std::size_t d = 1; d < corpus.doc_spans.size(); ++d) labels[corpus.doc_spans[d].first - 1] = 1;
  return EventSet(corpus, std::move(relevance), std::move(labels));
}

/// Events over unsegmented text; every label is NO.
inline EventSet unlabeled_events(const Corpus& corpus, const TriggerModel& trig) {
  if (corpus.n_sentences() < 2) throw Error("boundary events need at least 2 sentences");
  auto relevance = sentence_relevances(trig, corpus, false);
  return EventSet(corpus, std::move(relevance), std::vector<char>(corpus.n_sentences() - 1, 0));
}

// ---------------------------------------------------------------------------
// Sparse index: for each candidate, the events where it fires.
// ---------------------------------------------------------------------------

using FireList = std::vector<std::uint32_t>;

inline std::vector<FireList> build_feature_index(const EventSet& events,
                                                 std::span<const FeatureTemplate> candidates) {
  std::vector<FireList> fires(candidates.size());
  const Corpus& corpus = events.corpus();
  std::size_t vsize = 0;
  for (const auto& s : corpus.sentences)
    for (TokenId w : s) vsize = std::max<std::size_t>(vsize, w + 1);
  for (const auto& f : candidates)
    if (f.is_word_feature()) vsize = std::max<std::size_t>(vsize, f.word + 1);

  // (word, template slot) -> candidate index.
  auto slot_of = [](const FeatureTemplate& f) -> int {
    for (std::size_t i = 0; i < kWordTemplates.size(); ++i)
      if (kWordTemplates[i].kind == f.kind && kWordTemplates[i].k == f.k) return static_cast<int>(i);
    return -1;
  };
  constexpr std::size_t kSlots = kWordTemplates.size();
  std::vector<std::int64_t> lookup(vsize * kSlots, -1);
  std::vector<std::size_t> bin_candidates;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].is_word_feature())
      lookup[candidates[c].word * kSlots + slot_of(candidates[c])] = static_cast<std::int64_t>(c);
    else
      bin_candidates.push_back(c);
  }

  constexpr std::uint8_t kNone = 0xff;
  std::vector<std::uint8_t> next_sent(vsize, kNone), prev_sent(vsize, kNone);
  std::vector<std::uint8_t> next_word(vsize, kNone), prev_word(vsize, kNone);
  std::vector<TokenId> touched;
  auto touch = [&](std::vector<std::uint8_t>& dist, TokenId w, std::uint8_t d) {
    if (next_sent[w] == kNone && prev_sent[w] == kNone && next_word[w] == kNone && prev_word[w] == kNone)
      touched.push_back(w);
    dist[w] = std::min(dist[w], d);
  };

  for (std::size_t e = 0; e < events.size(); ++e) {
    BoundaryContext ctx = events.context(e);
    touched.clear();
    for (std::size_t j = 0; j < ctx.sentences_after(); ++j)
      for (TokenId w : ctx.next_sentence(j)) touch(next_sent, w, static_cast<std::uint8_t>(j + 1));
    for (std::size_t j = 0; j < ctx.sentences_before(); ++j)
      for (TokenId w : ctx.prev_sentence(j)) touch(prev_sent, w, static_cast<std::uint8_t>(j + 1));
    auto nw = ctx.next_words();
    for (std::size_t j = 0; j < nw.size(); ++j) touch(next_word, nw[j], static_cast<std::uint8_t>(j + 1));
    auto pw = ctx.prev_words();
    for (std::size_t j = 0; j < pw.size(); ++j) touch(prev_word, pw[j], static_cast<std::uint8_t>(j + 1));
    TokenId begins = ctx.prev_sentence(0).front();

    std::sort(touched.begin(), touched.end());
    std::vector<std::int64_t> fired;
    for (TokenId w : touched) {
      const std::int64_t* row = &lookup[w * kSlots];
      for (std::size_t slot = 0; slot < kSlots; ++slot) {
        if (row[slot] < 0) continue;
        const auto& t = kWordTemplates[slot];
        bool on = false;
        switch (t.kind) {
          case FeatureKind::WordInNextKSentences: on = next_sent[w] <= t.k; break;
          case FeatureKind::WordInPrevKSentences: on = prev_sent[w] <= t.k; break;
          case FeatureKind::WordPrevKNotNextK: on = prev_sent[w] <= t.k && !(next_sent[w] <= t.k); break;
          case FeatureKind::WordNextKNotPrevK: on = next_sent[w] <= t.k && !(prev_sent[w] <= t.k); break;
          case FeatureKind::WordInNextKWords: on = next_word[w] <= t.k; break;
          case FeatureKind::WordInPrevKWords: on = prev_word[w] <= t.k; break;
          case FeatureKind::WordBeginsPrecedingSentence: on = (w == begins); break;
          case FeatureKind::RelevanceBin: break;
        }
        if (on) fires[static_cast<std::size_t>(row[slot])].push_back(static_cast<std::uint32_t>(e));
      }
    }
    for (TokenId w : touched) next_sent[w] = prev_sent[w] = next_word[w] = prev_word[w] = kNone;
    for (std::size_t c : bin_candidates)
      if (evaluate_feature(candidates[c], ctx)) fires[c].push_back(static_cast<std::uint32_t>(e));
  }
  return fires;
}

// ---------------------------------------------------------------------------
// Induced-feature file: "kind<TAB>word-or-bin<TAB>k<TAB>lambda".
// ---------------------------------------------------------------------------

struct WeightedFeature {
  FeatureTemplate feature;
  double lambda = 0.0;
};

inline void write_feature_line(const FeatureTemplate& f, double lambda, const Vocabulary& vocab,
                               std::ostream& os) {
  os << kind_name(f.kind) << '\t';
  if (f.is_word_feature())
    os << vocab.word(f.word);
  else
    os << detail::format_double(f.lo) << ',' << detail::format_double(f.hi);
  os << '\t' << f.k << '\t' << detail::format_double(lambda) << '\n';
}

inline WeightedFeature parse_feature_line(std::string_view line, const Vocabulary& vocab) {
  auto fields = detail::split(line, '\t');
  if (fields.size() != 4) throw FormatError("feature line needs 4 tab-separated fields");
  WeightedFeature out;
  FeatureKind kind = parse_kind(fields[0]);
  std::size_t k = detail::parse_count(fields[2]);
  try {
    if (kind == FeatureKind::RelevanceBin) {
      auto bounds = detail::split(fields[1], ',');
      if (bounds.size() != 2) throw FormatError("relevance bin must be 'lo,hi'");
      out.feature = FeatureTemplate::relevance_bin(detail::parse_double(bounds[0]),
                                                   detail::parse_double(bounds[1]), k);
    } else {
      if (!vocab.contains(fields[1]))
        throw FormatError("feature word '" + std::string(fields[1]) + "' not in vocabulary");
      out.feature = FeatureTemplate::word_feature(kind, vocab.id(fields[1]), k);
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  out.lambda = detail::parse_double(fields[3]);
  if (!std::isfinite(out.lambda)) throw FormatError("non-finite feature weight");
  return out;
}

}  // namespace segtext
