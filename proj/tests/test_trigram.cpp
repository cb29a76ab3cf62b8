#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "segtext/trigram.hpp"
#include "test_util.hpp"

using namespace segtext;

namespace {

// Dense Katz estimate written directly from the definitions: every context's
// full distribution is materialised, no backoff tables.
class DenseKatz {
public:
  DenseKatz(const Corpus& corpus, std::size_t v, std::size_t k) : v_(v), k_(k) {
    for (const auto& s : corpus.sentences) {
      std::vector<TokenId> seq = {1, 1};
      seq.insert(seq.end(), s.begin(), s.end());
      seq.push_back(2);
      for (std::size_t i = 2; i < seq.size(); ++i) {
        uni_[seq[i]]++;
        bi_[{seq[i - 1], seq[i]}]++;
        tri_[{seq[i - 2], seq[i - 1], seq[i]}]++;
      }
    }
    d1_ = gt(coc(uni_));
    d2_ = gt(coc(bi_));
    d3_ = gt(coc(tri_));

    // unigram
    std::vector<std::pair<TokenId, double>> seen;
    for (auto& [w, c] : uni_) seen.push_back({w, double(c)});
    p1_ = level(seen, d1_, [](TokenId) { return 0.0; }, true);
  }

  double p1(TokenId w) const { return p1_[w]; }

  double p2(TokenId w, TokenId a) const {
    std::vector<std::pair<TokenId, double>> seen;
    for (auto& [key, c] : bi_)
      if (key.first == a) seen.push_back({key.second, double(c)});
    if (seen.empty()) return p1(w);
    return level(seen, d2_, [&](TokenId x) { return p1(x); }, false)[w];
  }

  double p3(TokenId w, TokenId a, TokenId b) const {
    std::vector<std::pair<TokenId, double>> seen;
    for (auto& [key, c] : tri_)
      if (std::get<0>(key) == a && std::get<1>(key) == b) seen.push_back({std::get<2>(key), double(c)});
    if (seen.empty()) return p2(w, b);
    return level(seen, d3_, [&](TokenId x) { return p2(x, b); }, false)[w];
  }

private:
  template <class Map>
  std::vector<double> coc(const Map& m) const {
    std::vector<double> n(k_ + 2, 0.0);
    for (auto& [key, c] : m)
      if (c <= k_ + 1) n[c] += 1;
    return n;
  }

  std::vector<double> gt(const std::vector<double>& n) const {
    std::vector<double> d(k_ + 1, 1.0);
    double a = (k_ + 1) * n[k_ + 1] / n[1];
    for (std::size_t r = 1; r <= k_; ++r) {
      double x = ((r + 1) * n[r + 1] / n[r] / r - a) / (1 - a);
      d[r] = (std::isfinite(x) && x > 0 && x < 1) ? x : (r - 0.5) / r;
    }
    return d;
  }

  template <class Lower>
  std::vector<double> level(const std::vector<std::pair<TokenId, double>>& seen,
                            const std::vector<double>& d, Lower lower, bool uniform_rest) const {
    double total = 0;
    for (auto& [w, c] : seen) total += c;
    std::vector<double> p(v_, 0.0);
    std::vector<char> is_seen(v_, 0);
    double freed = 0;
    for (auto& [w, c] : seen) {
      double ratio = c <= k_ ? d[std::size_t(c)] : 1.0;
      p[w] = ratio * c / total;
      freed += (1 - ratio) * c;
      is_seen[w] = 1;
    }
    std::size_t outcomes = v_ - 1;
    if (freed <= 0 && seen.size() < outcomes)
      for (auto& [w, c] : seen) p[w] = (c - 0.5) / total;
    double mass = 0, low = 0;
    for (auto& [w, c] : seen) {
      mass += p[w];
      low += lower(w);
    }
    if (seen.size() == outcomes) {
      for (auto& x : p) x /= mass;
      return p;
    }
    for (TokenId w = 0; w < v_; ++w) {
      if (w == 1 || is_seen[w]) continue;
      p[w] = uniform_rest ? (1 - mass) / double(outcomes - seen.size()) : (1 - mass) / (1 - low) * lower(w);
    }
    return p;
  }

  std::size_t v_, k_;
  std::map<TokenId, std::size_t> uni_;
  std::map<std::pair<TokenId, TokenId>, std::size_t> bi_;
  std::map<std::tuple<TokenId, TokenId, TokenId>, std::size_t> tri_;
  std::vector<double> d1_, d2_, d3_, p1_;
};

testutil::Encoded abc_corpus() {
  std::vector<std::string> lines(100, "a b c");
  return testutil::encode_all(testutil::surface({lines}));
}

double context_sum(const TrigramModel& m, TokenId a, TokenId b) {
  double sum = 0;
  for (TokenId w = 0; w < m.vocab().size(); ++w)
    if (m.is_outcome(w)) sum += m.prob(w, a, b);
  return sum;
}

}  // namespace

TEST(Trigram, DeterministicToyCorpusHandValue) {
  auto e = abc_corpus();
  auto m = train_trigram(e.corpus, e.vocab);
  TokenId a = e.vocab.id("a"), b = e.vocab.id("b"), c = e.vocab.id("c");
  // One outcome seen 100 times, count above the cutoff, no freed mass:
  // the absolute fallback leaves 99.5 / 100.
  EXPECT_NEAR(m.prob(c, a, b), 0.995, 1e-12);
  EXPECT_GE(m.prob(c, a, b), 0.9);
  EXPECT_NEAR(context_sum(m, a, b), 1.0, 1e-9);
}

TEST(Trigram, UnseenContextIsBackoffProduct) {
  auto e = abc_corpus();
  auto m = train_trigram(e.corpus, e.vocab);
  TokenId a = e.vocab.id("a"), c = e.vocab.id("c");
  // (c, a) never occurs as a trigram context.
  EXPECT_EQ(m.trigram_backoff(c, a), 1.0);
  for (TokenId w = 0; w < e.vocab.size(); ++w) {
    if (!m.is_outcome(w)) continue;
    EXPECT_DOUBLE_EQ(m.prob(w, c, a), m.bigram_prob(w, a));
    EXPECT_GT(m.prob(w, c, a), 0.0);
  }
}

TEST(Trigram, MatchesDenseOracle) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto e = testutil::encode_all(testutil::random_text(4, 5, 5, 6, seed));
    auto m = train_trigram(e.corpus, e.vocab);
    DenseKatz oracle(e.corpus, e.vocab.size(), 5);
    for (TokenId a = 0; a < e.vocab.size(); ++a)
      for (TokenId b = 0; b < e.vocab.size(); ++b)
        for (TokenId w = 0; w < e.vocab.size(); ++w) {
          if (!m.is_outcome(w)) continue;
          ASSERT_NEAR(m.prob(w, a, b), oracle.p3(w, a, b), 1e-12) << a << " " << b << " " << w;
        }
  }
}

TEST(Trigram, NormalizedAndPositiveEverywhere) {
  auto e = testutil::encode_all(testutil::random_text(10, 10, 8, 40, 4));
  auto m = train_trigram(e.corpus, e.vocab);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(e.vocab.size() - 1));
  for (int i = 0; i < 100; ++i) {
    TokenId a = pick(rng), b = pick(rng);
    EXPECT_NEAR(context_sum(m, a, b), 1.0, 1e-6);
    for (TokenId w = 0; w < e.vocab.size(); ++w)
      if (m.is_outcome(w)) {
        EXPECT_GT(m.prob(w, a, b), 0.0);
      }
  }
}

TEST(Trigram, ValidatesIdsAndIsDeterministic) {
  auto e = abc_corpus();
  auto m = train_trigram(e.corpus, e.vocab);
  TokenId a = e.vocab.id("a"), b = e.vocab.id("b");
  EXPECT_GT(m.prob(e.vocab.unk_id(), a, b), 0.0);
  EXPECT_THROW(m.prob(99, a, b), Error);
  EXPECT_THROW(m.prob(a, 99, b), Error);
  EXPECT_THROW(m.prob(Vocabulary::kSentBegin, a, b), Error);
  EXPECT_EQ(trigram_prob(m, a, b, a), trigram_prob(m, a, b, a));
  EXPECT_THROW(train_trigram(Corpus{}, e.vocab), Error);
}

TEST(Trigram, RejectsTokensOutsideVocabulary) {
  Corpus c = as_single_document(std::vector<std::vector<TokenId>>{{3, 7}});
  EXPECT_THROW(train_trigram(c, Vocabulary({"x"})), Error);
}

TEST(Trigram, ArpaRoundTrip) {
  auto e = testutil::encode_all(testutil::random_text(5, 6, 6, 12, 6));
  auto m = train_trigram(e.corpus, e.vocab);
  std::stringstream ss;
  m.write_arpa(ss);
  auto r = TrigramModel::read_arpa(ss, e.vocab);
  for (TokenId a = 0; a < e.vocab.size(); ++a)
    for (TokenId b = 0; b < e.vocab.size(); ++b)
      for (TokenId w = 0; w < e.vocab.size(); ++w)
        if (m.is_outcome(w)) {
          ASSERT_NEAR(r.prob(w, a, b) / m.prob(w, a, b), 1.0, 1e-12);
        }
}

TEST(Trigram, ArpaRejectsMalformedInput) {
  auto e = abc_corpus();
  std::istringstream empty("");
  EXPECT_THROW(TrigramModel::read_arpa(empty, e.vocab), Error);
  std::istringstream junk("\\data\\\nngram 1=2\n\n\\1-grams:\nnot-a-number a\n\\end\\\n");
  EXPECT_THROW(TrigramModel::read_arpa(junk, e.vocab), Error);
}

TEST(Perplexity, DeterministicCorpus) {
  auto e = abc_corpus();
  auto m = train_trigram(e.corpus, e.vocab);
  double ppl = perplexity(m, e.corpus);
  EXPECT_LT(ppl, 3.0);
  EXPECT_GE(ppl, 1.0);
  EXPECT_THROW(perplexity(m, Corpus{}), Error);
}

TEST(Perplexity, UniformTextApproachesAlphabetSize) {
  const std::size_t v = 20;
  auto train = testutil::random_text(20, 200, 50, v, 7);
  auto e = testutil::encode_all(train);
  auto m = train_trigram(e.corpus, e.vocab);
  auto test = encode(testutil::random_text(5, 100, 50, v, 8), e.vocab);
  double ppl = perplexity(m, test);
  // 20 symbols plus an end token once per 50 words.
  EXPECT_NEAR(ppl, double(v), 0.1 * v);
  EXPECT_LE(perplexity(m, e.corpus), ppl);
}
