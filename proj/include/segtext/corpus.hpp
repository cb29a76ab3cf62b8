#pragma once

// Corpus ingestion: tokenization, document structure, closed vocabulary,
// and the Segmentation value type shared by every downstream module.

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "segtext/common.hpp"

namespace segtext {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

inline bool is_alpha(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0;
}

inline bool is_known_abbreviation(std::string_view core) {
  static constexpr std::array<std::string_view, 20> kAbbrev = {
      "mr", "mrs", "ms", "dr", "jr", "sr", "st", "inc", "corp", "co",
      "ltd", "vs", "etc", "prof", "gen", "sen", "rep", "gov", "lt", "col"};
  return std::find(kAbbrev.begin(), kAbbrev.end(), core) != kAbbrev.end();
}

// "c", "u.s", "e.g": single letters separated by periods.
inline bool is_initialism(std::string_view core) {
  if (core.empty()) return false;
  for (std::size_t i = 0; i < core.size(); ++i) {
    bool letter_slot = (i % 2 == 0);
    if (letter_slot ? !is_alpha(core[i]) : core[i] != '.') return false;
  }
  return core.size() % 2 == 1;
}

inline void tokenize_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::size_t b = 0, e = chunk.size();
  while (b < e && is_punct(chunk[b])) out.emplace_back(1, chunk[b++]);
  if (b == e) return;
  std::size_t core_end = e;
  while (core_end > b && is_punct(chunk[core_end - 1])) --core_end;
  std::string_view core = chunk.substr(b, core_end - b);
  std::size_t suffix = core_end;
  if (suffix < e && chunk[suffix] == '.' &&
      (is_initialism(core) || is_known_abbreviation(core))) {
    out.emplace_back(std::string(core) + ".");
    ++suffix;
  } else {
    out.emplace_back(core);
  }
  for (; suffix < e; ++suffix) out.emplace_back(1, chunk[suffix]);
}

}  // namespace detail

/// Lowercases the line and splits it into word and punctuation tokens. A
/// period stays attached to single letters, initialisms ("u.s.") and a small
/// list of abbreviations ("mr.", "inc.").
inline std::vector<std::string> tokenize(std::string_view line) {
  std::string lower(line);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < lower.size()) {
    while (i < lower.size() && std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
    std::size_t j = i;
    while (j < lower.size() && !std::isspace(static_cast<unsigned char>(lower[j]))) ++j;
    if (j > i) detail::tokenize_chunk(std::string_view(lower).substr(i, j - i), out);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

/// Boundary positions over an n-sentence text. Gap g (1 <= g < n) separates
/// sentence g-1 from sentence g.
class Segmentation {
public:
  Segmentation() = default;

  Segmentation(std::size_t n_sentences, std::vector<std::size_t> boundaries)
      : n_(n_sentences), boundaries_(std::move(boundaries)) {
    if (n_ == 0) throw Error("segmentation over zero sentences");
    for (std::size_t i = 0; i < boundaries_.size(); ++i) {
      std::size_t g = boundaries_[i];
      if (g < 1 || g >= n_)
        throw Error("boundary " + std::to_string(g) + " outside gaps 1.." +
                    std::to_string(n_ - 1));
      if (i > 0 && boundaries_[i - 1] >= g)
        throw Error("boundaries must be strictly increasing");
    }
  }

  std::size_t n_sentences() const { return n_; }
  const std::vector<std::size_t>& boundaries() const { return boundaries_; }
  std::size_t document_count() const { return boundaries_.size() + 1; }

  bool is_boundary(std::size_t gap) const {
    return std::binary_search(boundaries_.begin(), boundaries_.end(), gap);
  }

  /// Lengths (in sentences) of the documents, in order.
  std::vector<std::size_t> segment_lengths() const {
    std::vector<std::size_t> lengths;
    std::size_t prev = 0;
    for (std::size_t g : boundaries_) {
      lengths.push_back(g - prev);
      prev = g;
    }
    lengths.push_back(n_ - prev);
    return lengths;
  }

  /// Document index of every sentence.
  std::vector<std::size_t> document_ids() const {
    std::vector<std::size_t> ids(n_);
    std::size_t doc = 0, next = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (next < boundaries_.size() && boundaries_[next] == i) {
        ++doc;
        ++next;
      }
      ids[i] = doc;
    }
    return ids;
  }

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> boundaries_;
};

/// Text form: "#n_sentences <n>" header then one gap index per line.
inline void write_segmentation(const Segmentation& seg, std::ostream& os) {
  os << "#n_sentences " << seg.n_sentences() << '\n';
  for (std::size_t g : seg.boundaries()) os << g << '\n';
}

inline Segmentation read_segmentation(std::istream& is) {
  std::string line;
  std::size_t n = 0;
  bool have_n = false;
  std::vector<std::size_t> gaps;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = detail::strip_cr(line);
    if (v.empty()) continue;
    if (v.front() == '#') {
      constexpr std::string_view kKey = "#n_sentences ";
      if (v.substr(0, kKey.size()) == kKey) {
        n = detail::parse_count(v.substr(kKey.size()));
        have_n = true;
      }
      continue;
    }
    try {
      gaps.push_back(detail::parse_count(v));
    } catch (const FormatError& e) {
      throw FormatError("segmentation line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_n) throw FormatError("segmentation file lacks '#n_sentences' header");
  return Segmentation(n, std::move(gaps));
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

/// Inclusive sentence range of one document.
struct DocSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const DocSpan&, const DocSpan&) = default;
};

/// Sentences grouped into documents. Token is std::string for surface text
/// and TokenId once encoded against a Vocabulary.
template <class Token>
struct BasicCorpus {
  std::vector<std::vector<Token>> sentences;
  std::vector<DocSpan> doc_spans;

  std::size_t n_sentences() const { return sentences.size(); }

  std::size_t n_words() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
  }

  /// Throws unless spans partition [0, n_sentences) in order and every
  /// sentence is non-empty.
  void validate() const {
    std::size_t next = 0;
    for (const auto& span : doc_spans) {
      if (span.first != next || span.last < span.first)
        throw Error("document spans do not partition the sentences");
      next = span.last + 1;
    }
    if (next != sentences.size()) throw Error("document spans do not cover the corpus");
    for (const auto& s : sentences)
      if (s.empty()) throw Error("corpus contains an empty sentence");
  }

  Segmentation reference() const {
    std::vector<std::size_t> gaps;
    for (std::size_t d = 1; d < doc_spans.size(); ++d) gaps.push_back(doc_spans[d].first);
    return Segmentation(sentences.size(), std::move(gaps));
  }

  /// Sentences [first, last] re-based as a corpus of their own; document
  /// spans are clipped to the range.
  BasicCorpus slice_documents(std::size_t first_doc, std::size_t end_doc) const {
    BasicCorpus out;
    if (first_doc >= end_doc || end_doc > doc_spans.size()) return out;
    std::size_t base = doc_spans[first_doc].first;
    for (std::size_t d = first_doc; d < end_doc; ++d) {
      const auto& span = doc_spans[d];
      out.doc_spans.push_back({span.first - base, span.last - base});
      for (std::size_t s = span.first; s <= span.last; ++s) out.sentences.push_back(sentences[s]);
    }
    return out;
  }

  friend bool operator==(const BasicCorpus&, const BasicCorpus&) = default;
};

using SurfaceCorpus = BasicCorpus<std::string>;
using Corpus = BasicCorpus<TokenId>;

inline constexpr std::string_view kDefaultDelimiter = "===";

/// Reads one sentence per line; a line equal to `delimiter` closes the
/// current document. Blank lines and empty documents are dropped.
inline SurfaceCorpus load_corpus(std::istream& is,
                                 std::string_view delimiter = kDefaultDelimiter) {
  SurfaceCorpus corpus;
  std::size_t doc_first = 0;
  auto close_doc = [&] {
    if (corpus.sentences.size() > doc_first) {
      corpus.doc_spans.push_back({doc_first, corpus.sentences.size() - 1});
      doc_first = corpus.sentences.size();
    }
  };
  std::string line;
  while (std::getline(is, line)) {
    std::string_view v = detail::strip_cr(line);
    auto b = v.find_first_not_of(" \t");
    auto e = v.find_last_not_of(" \t");
    std::string_view trimmed = b == std::string_view::npos ? std::string_view{} : v.substr(b, e - b + 1);
    if (trimmed == delimiter) {
      close_doc();
      continue;
    }
    auto tokens = tokenize(v);
    if (!tokens.empty()) corpus.sentences.push_back(std::move(tokens));
  }
  close_doc();
  if (corpus.sentences.empty()) throw Error("empty corpus");
  return corpus;
}

/// Inverse of load_corpus for already-tokenized text.
inline void write_corpus(const SurfaceCorpus& corpus, std::ostream& os,
                         std::string_view delimiter = kDefaultDelimiter) {
  for (std::size_t d = 0; d < corpus.doc_spans.size(); ++d) {
    if (d > 0) os << delimiter << '\n';
    for (std::size_t s = corpus.doc_spans[d].first; s <= corpus.doc_spans[d].last; ++s) {
      const auto& sent = corpus.sentences[s];
      for (std::size_t i = 0; i < sent.size(); ++i) os << (i ? " " : "") << sent[i];
      os << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Closed vocabulary with dense ids. Ids 0..2 are reserved for the unknown
/// word, sentence-begin and sentence-end; the rest follow frequency rank.
class Vocabulary {
public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kSentBegin = 1;
  static constexpr TokenId kSentEnd = 2;
  static constexpr std::size_t kReserved = 3;

  static constexpr std::string_view kUnkWord = "<unk>";
  static constexpr std::string_view kSentBeginWord = "<s>";
  static constexpr std::string_view kSentEndWord = "</s>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// `ranked` lists the non-reserved words in id order.
  explicit Vocabulary(const std::vector<std::string>& ranked) {
    words_ = {std::string(kUnkWord), std::string(kSentBeginWord), std::string(kSentEndWord)};
    for (const auto& w : ranked) {
      if (is_reserved_word(w)) throw Error("reserved token '" + w + "' listed as a word");
      words_.push_back(w);
    }
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second)
        throw Error("duplicate vocabulary word '" + words_[i] + "'");
    }
  }

  std::size_t size() const { return words_.size(); }
  TokenId unk_id() const { return kUnk; }
  TokenId sent_begin_id() const { return kSentBegin; }
  TokenId sent_end_id() const { return kSentEnd; }
  const std::vector<std::string>& words() const { return words_; }

  TokenId id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view word) const { return index_.count(std::string(word)) != 0; }

  const std::string& word(TokenId id) const {
    if (id >= words_.size()) throw Error("token id " + std::to_string(id) + " out of range");
    return words_[id];
  }

  static bool is_reserved_word(std::string_view w) {
    return w == kUnkWord || w == kSentBeginWord || w == kSentEndWord;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Keeps the max_size - 3 most frequent words; ties go to the
/// lexicographically smaller word.
template <class Range>
Vocabulary build_vocabulary(const Range& tokens, std::size_t max_size) {
  if (max_size < Vocabulary::kReserved + 1)
    throw Error("vocabulary size must be at least " + std::to_string(Vocabulary::kReserved + 1));
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tokens) {
    if (!Vocabulary::is_reserved_word(t)) ++counts[std::string(t)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::size_t keep = std::min(ranked.size(), max_size - Vocabulary::kReserved);
  std::vector<std::string> words;
  words.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) words.push_back(std::move(ranked[i].first));
  return Vocabulary(words);
}

inline Vocabulary build_vocabulary(const SurfaceCorpus& corpus, std::size_t max_size) {
  std::vector<std::string_view> flat;
  flat.reserve(corpus.n_words());
  for (const auto& s : corpus.sentences)
    for (const auto& t : s) flat.emplace_back(t);
  return build_vocabulary(flat, max_size);
}

/// Header line lists the three reserved tokens (ids 0..2, tab separated);
/// every following line holds one word, ids counting up from 3.
inline void write_vocabulary(const Vocabulary& vocab, std::ostream& os) {
  os << Vocabulary::kUnkWord << '\t' << Vocabulary::kSentBeginWord << '\t'
     << Vocabulary::kSentEndWord << '\n';
  for (std::size_t i = Vocabulary::kReserved; i < vocab.size(); ++i) os << vocab.words()[i] << '\n';
}

inline Vocabulary read_vocabulary(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("vocabulary file is empty");
  auto header = detail::split(detail::strip_cr(line), '\t');
  if (header.size() != 3 || header[0] != Vocabulary::kUnkWord ||
      header[1] != Vocabulary::kSentBeginWord || header[2] != Vocabulary::kSentEndWord)
    throw FormatError("vocabulary header must list <unk>, <s>, </s>");
  std::vector<std::string> words;
  while (std::getline(is, line)) {
    std::string_view v = detail::strip_cr(line);
    if (v.empty()) throw FormatError("blank line in vocabulary file");
    words.emplace_back(v);
  }
  try {
    return Vocabulary(words);
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
}

/// Maps every token through the vocabulary; out-of-vocabulary tokens become
/// unk_id.
inline Corpus encode(const SurfaceCorpus& surface, const Vocabulary& vocab) {
  Corpus out;
  out.doc_spans = surface.doc_spans;
  out.sentences.reserve(surface.sentences.size());
  for (const auto& s : surface.sentences) {
    std::vector<TokenId> ids;
    ids.reserve(s.size());
    for (const auto& t : s) ids.push_back(vocab.id(t));
    out.sentences.push_back(std::move(ids));
  }
  return out;
}

inline SurfaceCorpus decode(const Corpus& corpus, const Vocabulary& vocab) {
  SurfaceCorpus out;
  out.doc_spans = corpus.doc_spans;
  for (const auto& s : corpus.sentences) {
    std::vector<std::string> words;
    words.reserve(s.size());
    for (TokenId id : s) words.push_back(vocab.word(id));
    out.sentences.push_back(std::move(words));
  }
  return out;
}

/// Single-document corpus over the given sentences, for unsegmented text.
template <class Token>
BasicCorpus<Token> as_single_document(std::vector<std::vector<Token>> sentences) {
  BasicCorpus<Token> c;
  c.sentences = std::move(sentences);
  if (!c.sentences.empty()) c.doc_spans.push_back({0, c.sentences.size() - 1});
  return c;
}

}  // namespace segtext
