#pragma once

// Long-range adaptive language model: a conditional exponential model over
// the trigram prior whose features are (s, t) trigger pairs, active when s
// occurred in the last N words and the predicted word is t.

#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"
#include "segtext/trigram.hpp"

namespace segtext {

struct TriggerPair {
  TokenId s = 0;  // trigger (left) word
  TokenId t = 0;  // triggered word
  double lambda = 0.0;
  double mi = 0.0;
};

class HistoryCache;

class TriggerModel {
public:
  static constexpr double kLambdaLimit = 10.0;

  TriggerModel() = default;

  TriggerModel(std::shared_ptr<const TrigramModel> prior, std::vector<TriggerPair> pairs,
               std::size_t window_n)
      : prior_(std::move(prior)), pairs_(std::move(pairs)), window_(window_n) {
    if (!prior_) throw Error("trigger model needs a trigram prior");
    if (window_ < 1) throw Error("trigger window must be at least 1 word");
    std::size_t v = prior_->vocab().size();
    by_left_.assign(v, {});
    by_target_.assign(v, {});
    std::unordered_map<std::uint64_t, std::size_t> seen;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (p.s >= v || p.t >= v) throw Error("trigger pair id outside vocabulary");
      if (!prior_->is_outcome(p.t)) throw Error("trigger target must be a predictable token");
      if (!std::isfinite(p.lambda)) throw Error("trigger pair has a non-finite weight");
      auto key = (std::uint64_t{p.s} << 32) | p.t;
      if (!seen.emplace(key, i).second)
        throw Error("duplicate trigger pair (" + prior_->vocab().word(p.s) + ", " +
                    prior_->vocab().word(p.t) + ")");
      by_left_[p.s].push_back(static_cast<std::uint32_t>(i));
      by_target_[p.t].push_back(static_cast<std::uint32_t>(i));
    }
  }

  const TrigramModel& prior() const { return *prior_; }
  std::shared_ptr<const TrigramModel> prior_ptr() const { return prior_; }
  const Vocabulary& vocab() const { return prior_->vocab(); }
  const std::vector<TriggerPair>& pairs() const { return pairs_; }
  std::size_t window() const { return window_; }

  bool is_trigger_word(TokenId s) const { return s < by_left_.size() && !by_left_[s].empty(); }
  const std::vector<std::uint32_t>& pairs_from(TokenId s) const { return by_left_.at(s); }
  const std::vector<std::uint32_t>& pairs_to(TokenId t) const { return by_target_.at(t); }

  /// Same pairs and prior with replaced weights.
  TriggerModel with_lambdas(const std::vector<double>& lambdas) const {
    if (lambdas.size() != pairs_.size()) throw Error("lambda count does not match pair count");
    auto pairs = pairs_;
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].lambda = lambdas[i];
    return TriggerModel(prior_, std::move(pairs), window_);
  }

  /// Z(H) = 1 + sum over triggered t of p_tri(t | w2, w1) (e^{Lambda_t} - 1).
  double normalizer(const HistoryCache& cache, TokenId w2, TokenId w1) const;

  /// p_exp(w | H); H is the cache plus the two preceding tokens.
  double prob(TokenId w, const HistoryCache& cache, TokenId w2, TokenId w1) const;
  double log_prob(TokenId w, const HistoryCache& cache, TokenId w2, TokenId w1) const;

private:
  std::shared_ptr<const TrigramModel> prior_;
  std::vector<TriggerPair> pairs_;
  std::size_t window_ = 1;
  std::vector<std::vector<std::uint32_t>> by_left_;
  std::vector<std::vector<std::uint32_t>> by_target_;
};

/// The last N words of history, with the set of trigger words currently in it
/// and the resulting per-target boosts.
class HistoryCache {
public:
  struct Boost {
    TokenId t;
    double lambda_sum;          // Lambda_t(H)
    std::uint32_t multiplicity; // number of active pairs targeting t
  };

  explicit HistoryCache(const TriggerModel& model)
      : model_(&model),
        ring_(model.window()),
        counts_(model.vocab().size(), 0),
        active_pos_(model.vocab().size(), kAbsent),
        boost_sum_(model.vocab().size(), 0.0),
        boost_mult_(model.vocab().size(), 0) {}

  void push(TokenId w) {
    if (w >= counts_.size()) throw Error("token id out of vocabulary range");
    if (size_ == ring_.size()) {
      TokenId old = ring_[head_];
      if (--counts_[old] == 0 && model_->is_trigger_word(old)) deactivate(old);
      ring_[head_] = w;
      head_ = (head_ + 1) % ring_.size();
    } else {
      ring_[(head_ + size_) % ring_.size()] = w;
      ++size_;
    }
    if (counts_[w]++ == 0 && model_->is_trigger_word(w)) activate(w);
  }

  void clear() {
    for (std::size_t i = 0; i < size_; ++i) counts_[ring_[(head_ + i) % ring_.size()]] = 0;
    for (TokenId s : active_) active_pos_[s] = kAbsent;
    active_.clear();
    head_ = size_ = 0;
    dirty_ = true;
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return ring_.size(); }
  std::size_t count(TokenId w) const { return w < counts_.size() ? counts_[w] : 0; }

  /// Trigger words present in the window, in ascending id order.
  std::vector<TokenId> active_left_words() const {
    std::vector<TokenId> out(active_.begin(), active_.end());
    std::sort(out.begin(), out.end());
    return out;
  }
  const std::vector<TokenId>& active_unordered() const { return active_; }

  /// Contents oldest first.
  std::vector<TokenId> contents() const {
    std::vector<TokenId> out;
    out.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) out.push_back(ring_[(head_ + i) % ring_.size()]);
    return out;
  }

  /// Words boosted by the active pairs, ascending by id.
  const std::vector<Boost>& boosts() const {
    refresh();
    return boosts_;
  }

  double lambda_sum(TokenId t) const {
    refresh();
    return t < boost_sum_.size() ? boost_sum_[t] : 0.0;
  }

  std::uint32_t multiplicity(TokenId t) const {
    refresh();
    return t < boost_mult_.size() ? boost_mult_[t] : 0;
  }

private:
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  void activate(TokenId s) {
    active_pos_[s] = active_.size();
    active_.push_back(s);
    dirty_ = true;
  }

  void deactivate(TokenId s) {
    std::size_t pos = active_pos_[s];
    TokenId last = active_.back();
    active_[pos] = last;
    active_pos_[last] = pos;
    active_.pop_back();
    active_pos_[s] = kAbsent;
    dirty_ = true;
  }

  // Recomputed from the active set so sums never drift.
  void refresh() const {
    if (!dirty_) return;
    for (const auto& b : boosts_) {
      boost_sum_[b.t] = 0.0;
      boost_mult_[b.t] = 0;
    }
    boosts_.clear();
    touched_.clear();
    const auto& pairs = model_->pairs();
    for (TokenId s : active_) {
      for (std::uint32_t i : model_->pairs_from(s)) {
        TokenId t = pairs[i].t;
        if (boost_mult_[t]++ == 0) touched_.push_back(t);
      }
    }
    std::sort(touched_.begin(), touched_.end());
    // Summed in pair order so the value does not depend on cache history.
    for (TokenId t : touched_) {
      double sum = 0;
      for (std::uint32_t i : model_->pairs_to(t))
        if (counts_[pairs[i].s] > 0) sum += pairs[i].lambda;
      boost_sum_[t] = sum;
      boosts_.push_back({t, sum, boost_mult_[t]});
    }
    dirty_ = false;
  }

  const TriggerModel* model_;
  std::vector<TokenId> ring_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::vector<std::uint32_t> counts_;
  std::vector<TokenId> active_;
  std::vector<std::size_t> active_pos_;

  mutable bool dirty_ = true;
  mutable std::vector<Boost> boosts_;
  mutable std::vector<TokenId> touched_;
  mutable std::vector<double> boost_sum_;
  mutable std::vector<std::uint32_t> boost_mult_;
};

inline double TriggerModel::normalizer(const HistoryCache& cache, TokenId w2, TokenId w1) const {
  double z = 1.0;
  for (const auto& b : cache.boosts())
    z += prior_->prob_unchecked(b.t, w2, w1) * std::expm1(b.lambda_sum);
  return z;
}

inline double TriggerModel::log_prob(TokenId w, const HistoryCache& cache, TokenId w2,
                                     TokenId w1) const {
  double p_tri = prior_->prob(w, w2, w1);
  return cache.lambda_sum(w) + std::log(p_tri) - std::log(normalizer(cache, w2, w1));
}

inline double TriggerModel::prob(TokenId w, const HistoryCache& cache, TokenId w2,
                                 TokenId w1) const {
  return std::exp(log_prob(w, cache, w2, w1));
}

inline double trigger_prob(const TriggerModel& model, TokenId w, const HistoryCache& cache,
                           TokenId w2, TokenId w1) {
  return model.prob(w, cache, w2, w1);
}

/// Walks every predicted token of `corpus` (sentence-end included) in text
/// order. visit(sentence_index, w, w2, w1, cache) sees the cache holding the
/// words before w; only words, not sentence-end, enter the cache.
template <class Visit>
void scan_history(const TriggerModel& model, const Corpus& corpus, bool reset_at_documents,
                  Visit&& visit, std::size_t first_doc = 0, std::size_t end_doc = SIZE_MAX) {
  HistoryCache cache(model);
  end_doc = std::min(end_doc, corpus.doc_spans.size());
  for (std::size_t d = first_doc; d < end_doc; ++d) {
    if (reset_at_documents) cache.clear();
    for (std::size_t si = corpus.doc_spans[d].first; si <= corpus.doc_spans[d].last; ++si) {
      const auto& sentence = corpus.sentences[si];
      TokenId w2 = Vocabulary::kSentBegin, w1 = Vocabulary::kSentBegin;
      for (std::size_t i = 0; i <= sentence.size(); ++i) {
        TokenId w = i < sentence.size() ? sentence[i] : Vocabulary::kSentEnd;
        visit(si, w, w2, w1, static_cast<const HistoryCache&>(cache));
        if (i < sentence.size()) cache.push(w);
        w2 = w1;
        w1 = w;
      }
    }
  }
}

/// Mean natural-log probability per predicted token.
inline double mean_log_likelihood(const TriggerModel& model, const Corpus& corpus,
                                  bool reset_at_documents = true) {
  double total = 0;
  std::size_t n = 0;
  scan_history(model, corpus, reset_at_documents,
               [&](std::size_t, TokenId w, TokenId w2, TokenId w1, const HistoryCache& cache) {
                 total += model.log_prob(w, cache, w2, w1);
                 ++n;
               });
  if (n == 0) throw Error("log-likelihood of an empty corpus");
  return total / static_cast<double>(n);
}

inline double mean_log_likelihood(const TrigramModel& model, const Corpus& corpus) {
  return -std::log(perplexity(model, corpus));
}

// ---------------------------------------------------------------------------
// Trigger selection
// ---------------------------------------------------------------------------

namespace detail {

struct Contingency {
  double n11 = 0, n1x = 0, nx1 = 0, n = 0;  // joint, s-in-window, w = t, positions
};

inline double mutual_information(const Contingency& c) {
  if (c.n <= 0) return 0.0;
  double cells[2][2] = {{c.n - c.n1x - c.nx1 + c.n11, c.nx1 - c.n11},
                        {c.n1x - c.n11, c.n11}};
  double px[2] = {c.n - c.n1x, c.n1x};
  double py[2] = {c.n - c.nx1, c.nx1};
  double mi = 0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      double nxy = cells[x][y];
      if (nxy <= 0) continue;
      mi += nxy / c.n * std::log(nxy * c.n / (px[x] * py[y]));
    }
  return std::max(0.0, mi);
}

// Word-only history window used for selection statistics.
class WordWindow {
public:
  WordWindow(std::size_t n, std::size_t vocab) : ring_(n), counts_(vocab, 0) {}
  void clear() {
    for (std::size_t i = 0; i < size_; ++i) counts_[ring_[(head_ + i) % ring_.size()]] = 0;
    head_ = size_ = 0;
  }
  // enter/leave fire when a word's count in the window becomes 1 / 0.
  template <class OnEnter, class OnLeave>
  void push(TokenId w, OnEnter&& enter, OnLeave&& leave) {
    if (size_ == ring_.size()) {
      TokenId old = ring_[head_];
      if (--counts_[old] == 0) leave(old);
      ring_[head_] = w;
      head_ = (head_ + 1) % ring_.size();
    } else {
      ring_[(head_ + size_) % ring_.size()] = w;
      ++size_;
    }
    if (counts_[w]++ == 0) enter(w);
  }
  bool contains(TokenId w) const { return counts_[w] > 0; }

private:
  std::vector<TokenId> ring_;
  std::size_t head_ = 0, size_ = 0;
  std::vector<std::uint32_t> counts_;
};

}  // namespace detail

/// I(X;Y) in nats for X = [s among the previous window_n words], Y = [current
/// word is t], over every word position. The window restarts at each document.
inline double mutual_information(TokenId s, TokenId t, const Corpus& corpus,
                                 std::size_t window_n, std::size_t vocab_size) {
  if (window_n < 1) throw Error("window must be at least 1");
  detail::Contingency c;
  detail::WordWindow window(window_n, vocab_size);
  auto nop = [](TokenId) {};
  for (const auto& span : corpus.doc_spans) {
    window.clear();
    for (std::size_t si = span.first; si <= span.last; ++si)
      for (TokenId w : corpus.sentences[si]) {
        bool x = window.contains(s);
        bool y = (w == t);
        c.n += 1;
        c.n1x += x;
        c.nx1 += y;
        c.n11 += (x && y);
        window.push(w, nop, nop);
      }
  }
  return detail::mutual_information(c);
}

struct TriggerSelectionOptions {
  std::size_t window_n = 500;
  std::size_t max_pairs = 1000;
  std::size_t min_cooccur = 3;
  std::size_t min_word_freq = 10;
};

/// Top pairs by mutual information among words with corpus frequency >=
/// min_word_freq and pairs co-occurring >= min_cooccur times. Ties go to the
/// smaller (s, t). Returned lambdas are zero.
inline std::vector<TriggerPair> select_triggers(const Corpus& corpus, const Vocabulary& vocab,
                                                const TriggerSelectionOptions& opts) {
  if (opts.max_pairs < 1) throw Error("max_pairs must be at least 1");
  if (opts.window_n < 1) throw Error("window must be at least 1");
  std::size_t v = vocab.size();
  std::vector<std::size_t> freq(v, 0);
  for (const auto& s : corpus.sentences)
    for (TokenId w : s) {
      if (w >= v) throw Error("corpus token id outside vocabulary");
      ++freq[w];
    }
  std::vector<char> eligible(v, 0);
  for (TokenId w = Vocabulary::kReserved; w < v; ++w) eligible[w] = freq[w] >= opts.min_word_freq;

  std::vector<double> in_window(v, 0.0), as_target(v, 0.0);
  std::unordered_map<std::uint64_t, std::size_t> co;
  double positions = 0;

  std::vector<TokenId> active;
  std::vector<std::size_t> pos(v, SIZE_MAX);
  auto enter = [&](TokenId w) {
    if (!eligible[w]) return;
    pos[w] = active.size();
    active.push_back(w);
  };
  auto leave = [&](TokenId w) {
    if (!eligible[w]) return;
    TokenId last = active.back();
    active[pos[w]] = last;
    pos[last] = pos[w];
    active.pop_back();
    pos[w] = SIZE_MAX;
  };

  detail::WordWindow window(opts.window_n, v);
  for (const auto& span : corpus.doc_spans) {
    window.clear();
    for (TokenId s : active) pos[s] = SIZE_MAX;
    active.clear();
    for (std::size_t si = span.first; si <= span.last; ++si)
      for (TokenId w : corpus.sentences[si]) {
        positions += 1;
        for (TokenId s : active) in_window[s] += 1;
        if (eligible[w]) {
          as_target[w] += 1;
          for (TokenId s : active) ++co[(std::uint64_t{s} << 32) | w];
        }
        window.push(w, enter, leave);
      }
  }

  std::vector<TriggerPair> out;
  for (const auto& [key, n11] : co) {
    if (n11 < opts.min_cooccur) continue;
    TriggerPair p;
    p.s = static_cast<TokenId>(key >> 32);
    p.t = static_cast<TokenId>(key & 0xffffffffu);
    p.mi = detail::mutual_information({static_cast<double>(n11), in_window[p.s], as_target[p.t], positions});
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const TriggerPair& a, const TriggerPair& b) {
    if (a.mi != b.mi) return a.mi > b.mi;
    return a.s != b.s ? a.s < b.s : a.t < b.t;
  });
  if (out.size() > opts.max_pairs) out.resize(opts.max_pairs);
  return out;
}

// ---------------------------------------------------------------------------
// Improved iterative scaling
// ---------------------------------------------------------------------------

inline constexpr std::size_t kTrainChunks = 32;

struct TriggerTrainOptions {
  std::size_t iterations = 20;
  /// Train on the leading documents holding at most this many words (0 = all).
  std::size_t max_words = 0;
  double tolerance = 1e-8;
  unsigned threads = 1;
};

struct TriggerTrainResult {
  TriggerModel model;
  /// Mean training log-likelihood before each iteration, then after the last.
  std::vector<double> log_likelihood;
  std::size_t iterations_run = 0;
};

namespace detail {

// Solves sum_{m>=1} a[m] e^{delta m} = target for delta in [lo, hi]; the left side
// is increasing in delta. Newton steps with bisection fallback.
inline double solve_scaling(const std::vector<double>& a, double target, double lo, double hi,
                            double tol = 1e-8, int max_steps = 50) {
  auto eval = [&](double d, double& deriv) {
    double f = 0;
    deriv = 0;
    for (std::size_t m = 1; m < a.size(); ++m) {
      if (a[m] == 0) continue;
      double e = a[m] * std::exp(d * static_cast<double>(m));
      f += e;
      deriv += e * static_cast<double>(m);
    }
    return f;
  };
  double total = 0;
  for (std::size_t m = 1; m < a.size(); ++m) total += a[m];
  if (total <= 0) return 0.0;
  if (target <= 0) return lo;
  // Work with g(d) = log f(d) - log target, which is nearly linear.
  auto g = [&](double d, double& dg) {
    double df = 0;
    double f = eval(d, df);
    dg = df / f;
    return std::log(f) - std::log(target);
  };
  double dg = 0;
  if (g(lo, dg) >= 0) return lo;
  if (g(hi, dg) <= 0) return hi;
  double x = std::clamp(0.0, lo, hi);
  for (int step = 0; step < max_steps; ++step) {
    double gx = g(x, dg);
    if (gx > 0) hi = x; else lo = x;
    double next = dg > 0 ? x - gx / dg : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < tol) return next;
    x = next;
  }
  return x;
}

}  // namespace detail

/// Fits the pair weights by improved iterative scaling. The history cache is
/// reset at every document boundary of the training corpus.
inline TriggerTrainResult train_triggers_iis(const TriggerModel& initial, const Corpus& full_corpus,
                                             const TriggerTrainOptions& opts = {}) {
  Corpus subset;
  const Corpus* corpus = &full_corpus;
  if (opts.max_words > 0 && full_corpus.n_words() > opts.max_words) {
    std::size_t words = 0, end_doc = 0;
    for (; end_doc < full_corpus.doc_spans.size(); ++end_doc) {
      std::size_t dw = 0;
      for (std::size_t s = full_corpus.doc_spans[end_doc].first; s <= full_corpus.doc_spans[end_doc].last; ++s)
        dw += full_corpus.sentences[s].size();
      if (end_doc > 0 && words + dw > opts.max_words) break;
      words += dw;
    }
    subset = full_corpus.slice_documents(0, end_doc);
    corpus = &subset;
  }

  const auto& pairs = initial.pairs();
  std::size_t n_pairs = pairs.size();
  std::vector<double> lambdas(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) lambdas[i] = pairs[i].lambda;

  TriggerTrainResult result{initial, {}, 0};
  std::vector<double> empirical(n_pairs, 0.0);
  bool have_empirical = false;
  std::size_t vsize = initial.vocab().size();
  unsigned threads = std::max(1u, opts.threads);
  std::size_t n_docs = corpus->doc_spans.size();

  for (std::size_t iter = 0;; ++iter) {
    TriggerModel model = initial.with_lambdas(lambdas);
    struct Acc {
      std::vector<std::vector<double>> expected;
      std::vector<double> empirical;
      double ll = 0;
      std::size_t n = 0;
    };
    // Fixed partition, so sums (and results) do not depend on the thread count.
    std::size_t n_chunks = std::min<std::size_t>(kTrainChunks, std::max<std::size_t>(1, n_docs));
    std::vector<Acc> acc(n_chunks);
    bool need_expectations = iter < opts.iterations;
    std::size_t chunk = (n_docs + n_chunks - 1) / n_chunks;
    detail::parallel_for(n_chunks, threads, [&](std::size_t b, std::size_t e) {
      std::vector<double> p_target(vsize, 0.0);
      for (std::size_t c = b; c < e; ++c) {
        Acc& a = acc[c];
        a.expected.assign(n_pairs, {});
        a.empirical.assign(n_pairs, 0.0);
        scan_history(
            model, *corpus, true,
            [&](std::size_t, TokenId w, TokenId w2, TokenId w1, const HistoryCache& cache) {
              const auto& boosts = cache.boosts();
              double z = 1.0;
              for (const auto& bst : boosts) {
                double pt = model.prior().prob_unchecked(bst.t, w2, w1);
                p_target[bst.t] = pt * std::exp(bst.lambda_sum);
                z += pt * std::expm1(bst.lambda_sum);
              }
              a.ll += cache.lambda_sum(w) + std::log(model.prior().prob(w, w2, w1)) - std::log(z);
              ++a.n;
              if (need_expectations) {
                for (TokenId s : cache.active_unordered()) {
                  for (std::uint32_t i : model.pairs_from(s)) {
                    TokenId t = pairs[i].t;
                    std::uint32_t m = cache.multiplicity(t);
                    auto& row = a.expected[i];
                    if (row.size() <= m) row.resize(m + 1, 0.0);
                    row[m] += p_target[t] / z;
                    if (w == t) a.empirical[i] += 1.0;
                  }
                }
              }
              for (const auto& bst : boosts) p_target[bst.t] = 0.0;
            },
            c * chunk, std::min(n_docs, (c + 1) * chunk));
      }
    });

    double ll = 0;
    std::size_t n = 0;
    for (const auto& a : acc) {
      ll += a.ll;
      n += a.n;
    }
    if (n == 0) throw Error("trigger training corpus is empty");
    result.log_likelihood.push_back(ll / static_cast<double>(n));
    if (!need_expectations) {
      result.model = std::move(model);
      break;
    }

    std::vector<std::vector<double>> expected(n_pairs);
    for (const auto& a : acc)
      for (std::size_t i = 0; i < n_pairs; ++i) {
        if (a.expected[i].size() > expected[i].size()) expected[i].resize(a.expected[i].size(), 0.0);
        for (std::size_t m = 0; m < a.expected[i].size(); ++m) expected[i][m] += a.expected[i][m];
      }
    if (!have_empirical) {
      for (const auto& a : acc)
        for (std::size_t i = 0; i < n_pairs; ++i) empirical[i] += a.empirical[i];
      have_empirical = true;
    }

    double max_delta = 0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
      double lo = -TriggerModel::kLambdaLimit - lambdas[i];
      double hi = TriggerModel::kLambdaLimit - lambdas[i];
      double delta = detail::solve_scaling(expected[i], empirical[i], lo, hi, opts.tolerance);
      double updated = lambdas[i] + delta;
      if (!std::isfinite(updated))
        throw Error("non-finite weight for trigger pair (" + initial.vocab().word(pairs[i].s) +
                    ", " + initial.vocab().word(pairs[i].t) + ")");
      lambdas[i] = std::clamp(updated, -TriggerModel::kLambdaLimit, TriggerModel::kLambdaLimit);
      max_delta = std::max(max_delta, std::abs(delta));
    }
    result.iterations_run = iter + 1;
    if (max_delta < opts.tolerance) {
      // One more pass records the final likelihood.
      TriggerModel final_model = initial.with_lambdas(lambdas);
      result.log_likelihood.push_back(mean_log_likelihood(final_model, *corpus, true));
      result.model = std::move(final_model);
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Trigger file: "s<TAB>t<TAB>lambda<TAB>mi", descending mi.
// ---------------------------------------------------------------------------

inline void write_triggers(const std::vector<TriggerPair>& pairs, const Vocabulary& vocab,
                           std::ostream& os) {
  std::vector<TriggerPair> sorted = pairs;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TriggerPair& a, const TriggerPair& b) { return a.mi > b.mi; });
  for (const auto& p : sorted)
    os << vocab.word(p.s) << '\t' << vocab.word(p.t) << '\t' << detail::format_double(p.lambda)
       << '\t' << detail::format_double(p.mi) << '\n';
}

inline std::vector<TriggerPair> read_triggers(std::istream& is, const Vocabulary& vocab) {
  std::vector<TriggerPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = detail::strip_cr(line);
    if (v.empty()) continue;
    auto f = detail::split(v, '\t');
    auto fail = [&](const std::string& why) {
      return FormatError("trigger line " + std::to_string(lineno) + ": " + why);
    };
    if (f.size() != 4) throw fail("expected 4 tab-separated fields");
    if (!vocab.contains(f[0]) || !vocab.contains(f[1])) throw fail("word not in vocabulary");
    TriggerPair p;
    p.s = vocab.id(f[0]);
    p.t = vocab.id(f[1]);
    try {
      p.lambda = detail::parse_double(f[2]);
      p.mi = detail::parse_double(f[3]);
    } catch (const FormatError& e) {
      throw fail(e.what());
    }
    if (!std::isfinite(p.lambda)) throw fail("non-finite lambda");
    out.push_back(p);
  }
  return out;
}

}  // namespace segtext
