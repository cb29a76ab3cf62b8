#pragma once

// Relevance: log ratio of the adaptive model's probability to the trigram
// prior's, per word and averaged per sentence.

#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"
#include "segtext/trigger.hpp"

namespace segtext {

struct RelevanceScore {
  enum class Span { Word, Sentence };
  double value = 0.0;  // nats
  Span span = Span::Word;
};

/// log p_exp(w | H) - log p_tri(w | w2, w1), which reduces to
/// Lambda_w(H) - log Z(H).
inline RelevanceScore word_relevance(const TriggerModel& model, TokenId w,
                                     const HistoryCache& cache, TokenId w2, TokenId w1) {
  if (!model.prior().is_outcome(w) || w2 >= model.vocab().size() || w1 >= model.vocab().size())
    throw Error("invalid token id for relevance");
  double value = cache.lambda_sum(w) - std::log(model.normalizer(cache, w2, w1));
  return {value, RelevanceScore::Span::Word};
}

/// Mean word relevance over the sentence, sentence-end included. Pushes the
/// sentence's words into `cache`.
inline RelevanceScore sentence_relevance(const TriggerModel& model,
                                         std::span<const TokenId> sentence, HistoryCache& cache) {
  if (sentence.empty()) throw Error("relevance of an empty sentence");
  double total = 0;
  TokenId w2 = Vocabulary::kSentBegin, w1 = Vocabulary::kSentBegin;
  for (std::size_t i = 0; i <= sentence.size(); ++i) {
    TokenId w = i < sentence.size() ? sentence[i] : Vocabulary::kSentEnd;
    total += word_relevance(model, w, cache, w2, w1).value;
    if (i < sentence.size()) cache.push(w);
    w2 = w1;
    w1 = w;
  }
  return {total / static_cast<double>(sentence.size() + 1), RelevanceScore::Span::Sentence};
}

/// Sentence relevance of every sentence in text order. By default the cache
/// runs across document boundaries, as it must on unsegmented text.
inline std::vector<double> sentence_relevances(const TriggerModel& model, const Corpus& corpus,
                                               bool reset_at_documents = false) {
  std::vector<double> out(corpus.n_sentences(), 0.0);
  HistoryCache cache(model);
  for (const auto& span : corpus.doc_spans) {
    if (reset_at_documents) cache.clear();
    for (std::size_t s = span.first; s <= span.last; ++s)
      out[s] = sentence_relevance(model, corpus.sentences[s], cache).value;
  }
  return out;
}

struct ProfileRow {
  long offset = 0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Mean sentence relevance by sentence offset from each document start, for
/// offsets -max_offset..max_offset. Non-negative offsets count only sentences
/// inside the same document; negative offsets reach back into earlier text.
inline std::vector<ProfileRow> relevance_profile(const TriggerModel& model, const Corpus& corpus,
                                                 std::size_t max_offset) {
  auto rel = sentence_relevances(model, corpus, false);
  long m = static_cast<long>(max_offset);
  std::vector<ProfileRow> rows(2 * max_offset + 1);
  std::vector<double> sums(rows.size(), 0.0);
  for (long off = -m; off <= m; ++off) rows[off + m].offset = off;
  for (const auto& span : corpus.doc_spans) {
    long start = static_cast<long>(span.first);
    for (long off = -m; off <= m; ++off) {
      long s = start + off;
      if (s < 0) continue;
      if (off >= 0 && s > static_cast<long>(span.last)) break;
      sums[off + m] += rel[s];
      ++rows[off + m].count;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].mean = rows[i].count ? sums[i] / static_cast<double>(rows[i].count) : 0.0;
  return rows;
}

/// "offset<TAB>mean_relevance<TAB>count" lines.
inline void write_profile(const std::vector<ProfileRow>& rows, std::ostream& os) {
  for (const auto& r : rows)
    os << r.offset << '\t' << detail::format_double(r.mean, 10) << '\t' << r.count << '\n';
}

}  // namespace segtext
