#pragma once

// Static short-range language model: trigram with Katz backoff over a
// closed vocabulary, Good-Turing discounting of low counts.

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"

namespace segtext {

struct KatzOptions {
  /// Counts 1..discount_cutoff are Good-Turing discounted; larger counts are kept.
  std::size_t discount_cutoff = 5;
  /// Absolute discount used when Good-Turing gives an unusable ratio.
  double fallback_discount = 0.5;
};

class TrigramModel {
public:
  static constexpr std::size_t kMaxVocab = std::size_t{1} << 21;

  TrigramModel() = default;

  /// Trains on `corpus`, which must be encoded with `vocab`. Each sentence is
  /// an independent sequence padded with two sentence-begin tokens; the
  /// sentence-end token is predicted.
  static TrigramModel train(const Corpus& corpus, const Vocabulary& vocab,
                            const KatzOptions& opts = {}) {
    if (corpus.n_sentences() < 1) throw Error("trigram training needs at least one sentence");
    if (vocab.size() > kMaxVocab) throw Error("vocabulary too large for trigram keys");
    TrigramModel m;
    m.vocab_ = vocab;
    m.opts_ = opts;
    m.count_events(corpus);
    m.estimate();
    return m;
  }

  const Vocabulary& vocab() const { return vocab_; }
  const KatzOptions& options() const { return opts_; }

  /// Ids that may be predicted: everything except sentence-begin.
  bool is_outcome(TokenId w) const {
    return w < vocab_.size() && w != Vocabulary::kSentBegin;
  }

  /// p(w | w2, w1) where w1 is the immediately preceding token.
  double prob(TokenId w, TokenId w2, TokenId w1) const {
    check_ids(w, w2, w1);
    return prob_unchecked(w, w2, w1);
  }

  double log_prob(TokenId w, TokenId w2, TokenId w1) const { return std::log(prob(w, w2, w1)); }

  double prob_unchecked(TokenId w, TokenId w2, TokenId w1) const {
    auto it = trigram_prob_.find(tri_key(w2, w1, w));
    if (it != trigram_prob_.end()) return it->second;
    auto bo = trigram_bow_.find(bi_key(w2, w1));
    double bow = bo == trigram_bow_.end() ? 1.0 : bo->second;
    return bow * bigram_prob(w, w1);
  }

  /// Backoff bigram estimate p(w | w1).
  double bigram_prob(TokenId w, TokenId w1) const {
    auto it = bigram_prob_.find(bi_key(w1, w));
    if (it != bigram_prob_.end()) return it->second;
    return bigram_bow_[w1] * unigram_[w];
  }

  double unigram_prob(TokenId w) const { return unigram_.at(w); }

  /// Weight applied to the bigram estimate for trigram contexts (w2, w1).
  double trigram_backoff(TokenId w2, TokenId w1) const {
    auto bo = trigram_bow_.find(bi_key(w2, w1));
    return bo == trigram_bow_.end() ? 1.0 : bo->second;
  }

  double bigram_backoff(TokenId w1) const { return bigram_bow_.at(w1); }

  std::size_t count(TokenId w) const { return w < unigram_count_.size() ? unigram_count_[w] : 0; }
  std::size_t count(TokenId w1, TokenId w) const { return lookup(bigram_count_, bi_key(w1, w)); }
  std::size_t count(TokenId w2, TokenId w1, TokenId w) const {
    return lookup(trigram_count_, tri_key(w2, w1, w));
  }

  /// Good-Turing ratio d_r applied to order-n counts r (n in 1..3).
  double discount(int order, std::size_t r) const {
    if (r == 0 || r > opts_.discount_cutoff) return 1.0;
    return discounts_.at(order - 1).at(r);
  }

  /// ARPA text format, log10 probabilities and backoff weights.
  void write_arpa(std::ostream& os) const;
  static TrigramModel read_arpa(std::istream& is, const Vocabulary& vocab);

private:
  static std::uint64_t bi_key(TokenId a, TokenId b) {
    return (std::uint64_t{a} << 32) | std::uint64_t{b};
  }
  static std::uint64_t tri_key(TokenId a, TokenId b, TokenId c) {
    return (std::uint64_t{a} << 42) | (std::uint64_t{b} << 21) | std::uint64_t{c};
  }
  static std::size_t lookup(const std::unordered_map<std::uint64_t, std::size_t>& m,
                            std::uint64_t k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }

  void check_ids(TokenId w, TokenId w2, TokenId w1) const {
    if (w2 >= vocab_.size() || w1 >= vocab_.size() || w >= vocab_.size())
      throw Error("token id out of vocabulary range");
    if (w == Vocabulary::kSentBegin) throw Error("sentence-begin is not a predictable token");
  }

  std::size_t n_outcomes() const { return vocab_.size() - 1; }

  void count_events(const Corpus& corpus) {
    unigram_count_.assign(vocab_.size(), 0);
    for (const auto& sentence : corpus.sentences) {
      TokenId u = Vocabulary::kSentBegin, v = Vocabulary::kSentBegin;
      for (std::size_t i = 0; i <= sentence.size(); ++i) {
        TokenId w = i < sentence.size() ? sentence[i] : Vocabulary::kSentEnd;
        if (w >= vocab_.size() || w == Vocabulary::kSentBegin)
          throw Error("corpus token id " + std::to_string(w) + " invalid for vocabulary");
        ++unigram_count_[w];
        ++bigram_count_[bi_key(v, w)];
        ++trigram_count_[tri_key(u, v, w)];
        u = v;
        v = w;
      }
    }
  }

  // d_r for r = 1..cutoff; fallback for any ratio outside (0, 1).
  std::vector<double> good_turing(const std::vector<std::size_t>& counts_of_counts) const {
    std::size_t k = opts_.discount_cutoff;
    std::vector<double> d(k + 1, 1.0);
    auto n = [&](std::size_t r) -> double {
      return r < counts_of_counts.size() ? static_cast<double>(counts_of_counts[r]) : 0.0;
    };
    double common = n(1) > 0 ? (k + 1) * n(k + 1) / n(1) : NAN;
    for (std::size_t r = 1; r <= k; ++r) {
      double r_star = n(r) > 0 ? (r + 1) * n(r + 1) / n(r) : NAN;
      double ratio = (r_star / r - common) / (1.0 - common);
      if (!std::isfinite(ratio) || ratio <= 0.0 || ratio >= 1.0)
        ratio = (r - opts_.fallback_discount) / static_cast<double>(r);
      d[r] = ratio;
    }
    return d;
  }

  template <class Map>
  std::vector<std::size_t> counts_of_counts(const Map& m) const {
    std::vector<std::size_t> coc(opts_.discount_cutoff + 2, 0);
    for (const auto& [key, c] : m)
      if (c < coc.size()) ++coc[c];
    return coc;
  }

  struct Seen {
    TokenId w;
    std::size_t count;
  };

  // Discounted probabilities for one context. When no mass is freed but
  // unseen outcomes remain, every count takes the absolute fallback discount.
  std::vector<double> discounted(const std::vector<Seen>& seen, std::size_t total,
                                 const std::vector<double>& d) const {
    std::vector<double> p(seen.size());
    double freed = 0;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      double ratio = seen[i].count <= opts_.discount_cutoff ? d[seen[i].count] : 1.0;
      p[i] = ratio * seen[i].count / static_cast<double>(total);
      freed += (1.0 - ratio) * seen[i].count;
    }
    if (freed <= 0 && seen.size() < n_outcomes()) {
      for (std::size_t i = 0; i < seen.size(); ++i)
        p[i] = (seen[i].count - opts_.fallback_discount) / static_cast<double>(total);
    }
    return p;
  }

  void estimate() {
    for (int order = 0; order < 3; ++order) discounts_[order].clear();
    {
      std::vector<std::size_t> coc(opts_.discount_cutoff + 2, 0);
      for (std::size_t c : unigram_count_)
        if (c < coc.size()) ++coc[c];
      discounts_[0] = good_turing(coc);
    }
    discounts_[1] = good_turing(counts_of_counts(bigram_count_));
    discounts_[2] = good_turing(counts_of_counts(trigram_count_));

    // Unigrams: leftover mass spread over unseen outcomes.
    unigram_.assign(vocab_.size(), 0.0);
    {
      std::vector<Seen> seen;
      std::size_t total = 0;
      for (TokenId w = 0; w < vocab_.size(); ++w) {
        if (w == Vocabulary::kSentBegin || unigram_count_[w] == 0) continue;
        seen.push_back({w, unigram_count_[w]});
        total += unigram_count_[w];
      }
      auto p = discounted(seen, total, discounts_[0]);
      double mass = 0;
      for (std::size_t i = 0; i < seen.size(); ++i) {
        unigram_[seen[i].w] = p[i];
        mass += p[i];
      }
      std::size_t unseen = n_outcomes() - seen.size();
      if (unseen > 0) {
        double share = (1.0 - mass) / static_cast<double>(unseen);
        for (TokenId w = 0; w < vocab_.size(); ++w)
          if (w != Vocabulary::kSentBegin && unigram_count_[w] == 0) unigram_[w] = share;
      } else {
        for (auto& x : unigram_) x /= mass;
      }
    }

    // Bigrams grouped by context.
    bigram_bow_.assign(vocab_.size(), 1.0);
    {
      std::unordered_map<TokenId, std::vector<Seen>> by_ctx;
      for (const auto& [key, c] : bigram_count_)
        by_ctx[static_cast<TokenId>(key >> 32)].push_back({static_cast<TokenId>(key & 0xffffffffu), c});
      for (auto& [ctx, seen] : by_ctx) {
        std::size_t total = 0;
        for (const auto& s : seen) total += s.count;
        auto p = discounted(seen, total, discounts_[1]);
        double mass = 0, lower = 0;
        for (std::size_t i = 0; i < seen.size(); ++i) {
          mass += p[i];
          lower += unigram_[seen[i].w];
        }
        bool all_seen = seen.size() == n_outcomes();
        for (std::size_t i = 0; i < seen.size(); ++i)
          bigram_prob_[bi_key(ctx, seen[i].w)] = all_seen ? p[i] / mass : p[i];
        bigram_bow_[ctx] = all_seen ? 1.0 : (1.0 - mass) / (1.0 - lower);
      }
    }

    // Trigrams grouped by (w2, w1) context.
    {
      std::unordered_map<std::uint64_t, std::vector<Seen>> by_ctx;
      constexpr std::uint64_t kMask = (std::uint64_t{1} << 21) - 1;
      for (const auto& [key, c] : trigram_count_) {
        TokenId u = static_cast<TokenId>(key >> 42);
        TokenId v = static_cast<TokenId>((key >> 21) & kMask);
        by_ctx[bi_key(u, v)].push_back({static_cast<TokenId>(key & kMask), c});
      }
      for (auto& [ctx, seen] : by_ctx) {
        TokenId u = static_cast<TokenId>(ctx >> 32);
        TokenId v = static_cast<TokenId>(ctx & 0xffffffffu);
        std::size_t total = 0;
        for (const auto& s : seen) total += s.count;
        auto p = discounted(seen, total, discounts_[2]);
        double mass = 0, lower = 0;
        for (std::size_t i = 0; i < seen.size(); ++i) {
          mass += p[i];
          lower += bigram_prob(seen[i].w, v);
        }
        bool all_seen = seen.size() == n_outcomes();
        for (std::size_t i = 0; i < seen.size(); ++i)
          trigram_prob_[tri_key(u, v, seen[i].w)] = all_seen ? p[i] / mass : p[i];
        trigram_bow_[ctx] = all_seen ? 1.0 : (1.0 - mass) / (1.0 - lower);
      }
    }
  }

  Vocabulary vocab_;
  KatzOptions opts_;
  std::vector<std::size_t> unigram_count_;
  std::unordered_map<std::uint64_t, std::size_t> bigram_count_;
  std::unordered_map<std::uint64_t, std::size_t> trigram_count_;
  std::array<std::vector<double>, 3> discounts_;

  std::vector<double> unigram_;
  std::vector<double> bigram_bow_;
  std::unordered_map<std::uint64_t, double> bigram_prob_;
  std::unordered_map<std::uint64_t, double> trigram_bow_;
  std::unordered_map<std::uint64_t, double> trigram_prob_;
};

inline TrigramModel train_trigram(const Corpus& corpus, const Vocabulary& vocab,
                                  const KatzOptions& opts = {}) {
  return TrigramModel::train(corpus, vocab, opts);
}

inline double trigram_prob(const TrigramModel& model, TokenId w, TokenId w2, TokenId w1) {
  return model.prob(w, w2, w1);
}

/// exp of the mean negative log probability over every predicted token,
/// sentence-end included.
inline double perplexity(const TrigramModel& model, const Corpus& corpus) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& sentence : corpus.sentences) {
    TokenId u = Vocabulary::kSentBegin, v = Vocabulary::kSentBegin;
    for (std::size_t i = 0; i <= sentence.size(); ++i) {
      TokenId w = i < sentence.size() ? sentence[i] : Vocabulary::kSentEnd;
      total += model.log_prob(w, u, v);
      ++n;
      u = v;
      v = w;
    }
  }
  if (n == 0) throw Error("perplexity of an empty corpus");
  return std::exp(-total / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// ARPA interchange
// ---------------------------------------------------------------------------

inline void TrigramModel::write_arpa(std::ostream& os) const {
  auto lg = [](double p) { return detail::format_double(std::log10(p)); };
  auto word = [&](TokenId id) -> const std::string& { return vocab_.word(id); };

  // Contexts such as "<s> <s>" carry a backoff weight but have no bigram
  // probability; they are written with the conventional -99.
  std::vector<std::pair<std::uint64_t, double>> bigrams(bigram_prob_.begin(), bigram_prob_.end());
  for (const auto& [key, bow] : trigram_bow_)
    if (!bigram_prob_.count(key)) bigrams.emplace_back(key, 0.0);
  std::vector<std::pair<std::uint64_t, double>> trigrams(trigram_prob_.begin(), trigram_prob_.end());
  std::sort(bigrams.begin(), bigrams.end());
  std::sort(trigrams.begin(), trigrams.end());

  os << "\\data\\\n";
  os << "ngram 1=" << vocab_.size() << '\n';
  os << "ngram 2=" << bigrams.size() << '\n';
  os << "ngram 3=" << trigrams.size() << "\n\n";

  os << "\\1-grams:\n";
  for (TokenId w = 0; w < vocab_.size(); ++w) {
    os << (w == Vocabulary::kSentBegin ? std::string("-99") : lg(unigram_[w])) << '\t' << word(w);
    if (bigram_bow_[w] != 1.0) os << '\t' << lg(bigram_bow_[w]);
    os << '\n';
  }
  os << "\n\\2-grams:\n";
  for (const auto& [key, p] : bigrams) {
    TokenId a = static_cast<TokenId>(key >> 32), b = static_cast<TokenId>(key & 0xffffffffu);
    os << (p > 0 ? lg(p) : std::string("-99")) << '\t' << word(a) << ' ' << word(b);
    auto bo = trigram_bow_.find(key);
    if (bo != trigram_bow_.end() && bo->second != 1.0) os << '\t' << lg(bo->second);
    os << '\n';
  }
  os << "\n\\3-grams:\n";
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 21) - 1;
  for (const auto& [key, p] : trigrams) {
    os << lg(p) << '\t' << word(static_cast<TokenId>(key >> 42)) << ' '
       << word(static_cast<TokenId>((key >> 21) & kMask)) << ' '
       << word(static_cast<TokenId>(key & kMask)) << '\n';
  }
  os << "\n\\end\\\n";
}

inline TrigramModel TrigramModel::read_arpa(std::istream& is, const Vocabulary& vocab) {
  TrigramModel m;
  m.vocab_ = vocab;
  m.unigram_.assign(vocab.size(), 0.0);
  m.bigram_bow_.assign(vocab.size(), 1.0);
  m.unigram_count_.assign(vocab.size(), 0);
  std::vector<bool> have_unigram(vocab.size(), false);

  auto lookup_word = [&](std::string_view w) {
    if (!vocab.contains(w)) throw FormatError("ARPA word '" + std::string(w) + "' not in vocabulary");
    return vocab.id(w);
  };
  auto pow10 = [](std::string_view s) { return std::pow(10.0, detail::parse_double(s)); };

  std::string line;
  int section = -1;  // 0 = \data\, 1..3 = n-grams, 4 = \end\ .
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = detail::strip_cr(line);
    if (v.empty()) continue;
    if (v == "\\data\\") { section = 0; continue; }
    if (v == "\\1-grams:") { section = 1; continue; }
    if (v == "\\2-grams:") { section = 2; continue; }
    if (v == "\\3-grams:") { section = 3; continue; }
    if (v == "\\end\\") { section = 4; break; }
    if (section == 0) continue;
    if (section < 1) throw FormatError("ARPA line " + std::to_string(lineno) + " before \\data\\");
    auto fields = detail::split(v, '\t');
    if (fields.size() < 2 || fields.size() > 3)
      throw FormatError("ARPA line " + std::to_string(lineno) + ": expected 2 or 3 tab fields");
    auto words = detail::split(fields[1], ' ');
    if (static_cast<int>(words.size()) != section)
      throw FormatError("ARPA line " + std::to_string(lineno) + ": wrong n-gram order");
    try {
      if (section == 1) {
        TokenId w = lookup_word(words[0]);
        have_unigram[w] = true;
        if (w != Vocabulary::kSentBegin) m.unigram_[w] = pow10(fields[0]);
        if (fields.size() == 3) m.bigram_bow_[w] = pow10(fields[2]);
      } else if (section == 2) {
        TokenId a = lookup_word(words[0]), b = lookup_word(words[1]);
        if (b != Vocabulary::kSentBegin) m.bigram_prob_[bi_key(a, b)] = pow10(fields[0]);
        if (fields.size() == 3) m.trigram_bow_[bi_key(a, b)] = pow10(fields[2]);
      } else {
        TokenId a = lookup_word(words[0]), b = lookup_word(words[1]), c = lookup_word(words[2]);
        m.trigram_prob_[tri_key(a, b, c)] = pow10(fields[0]);
      }
    } catch (const FormatError& e) {
      throw FormatError("ARPA line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (section != 4) throw FormatError("ARPA file lacks \\end\\ marker");
  for (TokenId w = 0; w < vocab.size(); ++w)
    if (!have_unigram[w]) throw FormatError("ARPA file lacks unigram for '" + vocab.word(w) + "'");
  for (int order = 0; order < 3; ++order) m.discounts_[order].assign(m.opts_.discount_cutoff + 1, 1.0);
  return m;
}

}  // namespace segtext
