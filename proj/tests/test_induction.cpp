#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "segtext/induction.hpp"
#include "segtext/trigram.hpp"
#include "test_util.hpp"

using namespace segtext;

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

// 20 events over 4 features with overlapping, non-separable patterns.
struct Matrix {
  std::vector<std::vector<bool>> active;
  std::vector<bool> labels;
};

Matrix small_matrix() {
  Matrix m;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    std::vector<bool> row(4);
    for (auto&& b : row) b = rng() % 2 == 0;
    m.active.push_back(row);
    bool yes = (row[0] && rng() % 4 != 0) || (row[2] && rng() % 3 == 0) || rng() % 6 == 0;
    m.labels.push_back(yes);
  }
  return m;
}

// Best mean log-likelihood of the model using features j and k, by a grid
// over both weights in [-6, 6] with step 0.01. Events are grouped by
// (fires j, fires k, label) so each grid point is cheap.
double pair_grid_ll(const Matrix& mat, double prior_logit, std::size_t j, std::size_t k) {
  double count[2][2][2] = {};
  for (std::size_t e = 0; e < mat.labels.size(); ++e)
    count[mat.active[e][j]][mat.active[e][k]][mat.labels[e]] += 1;
  double best = -1e300;
  for (int s1 = -600; s1 <= 600; ++s1)
    for (int s2 = -600; s2 <= 600; ++s2) {
      double a1 = s1 * 0.01, a2 = s2 * 0.01, ll = 0;
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
          for (int l = 0; l < 2; ++l)
            if (count[x][y][l] > 0) ll += count[x][y][l] * oracle::log_q(prior_logit + x * a1 + y * a2, l == 1);
      best = std::max(best, ll / static_cast<double>(mat.labels.size()));
    }
  return best;
}

// Planted cue corpus: "begin" opens every document.
struct CueSetup {
  Vocabulary vocab;
  Corpus corpus;
  EventSet events;
};

CueSetup cue_setup(std::size_t docs, std::uint64_t seed) {
  SynthOptions o;
  o.docs = docs;
  o.seed = seed;
  o.start_cue_rate = 1.0;
  auto e = testutil::encode_all(synthesize(o).corpus);
  auto tri = std::make_shared<const TrigramModel>(train_trigram(e.corpus, e.vocab));
  TriggerModel trig(tri, {}, 100);
  CueSetup s{e.vocab, e.corpus, extract_events(e.corpus, trig)};
  return s;
}

}  // namespace

TEST(BoundaryModel, NoFeaturesGivesPrior) {
  auto mx = testutil::matrix_events({{true}, {false}}, {true, false});
  BoundaryModel m;
  m.q0_yes = 0.3;
  EXPECT_NEAR(q_boundary(m, mx.events.context(0)), 0.3, 1e-15);
}

TEST(BoundaryModel, FiringFeatureScalesOdds) {
  auto mx = testutil::matrix_events({{true}, {false}}, {true, false});
  BoundaryModel m;
  m.q0_yes = 0.5;
  m.features = mx.features;
  m.lambdas = {std::log(4.5)};
  EXPECT_NEAR(q_boundary(m, mx.events.context(0)), 4.5 / 5.5, 1e-12);
  EXPECT_NEAR(q_boundary(m, mx.events.context(1)), 0.5, 1e-15);
  m.lambdas = {-800.0};
  double q = q_boundary(m, mx.events.context(0));
  EXPECT_GT(q, 0.0);
  EXPECT_LT(q, 1.0);
}

TEST(BoundaryModel, ValidateRejectsBadModels) {
  auto mx = testutil::matrix_events({{true, true}}, {true});
  BoundaryModel m;
  m.q0_yes = 1.0;
  EXPECT_THROW(m.validate(), Error);
  m.q0_yes = 0.5;
  m.features = {mx.features[0]};
  EXPECT_THROW(m.validate(), Error);
  m.lambdas = {0.1};
  m.validate();
  m.features.push_back(mx.features[0]);
  m.lambdas.push_back(0.2);
  EXPECT_THROW(m.validate(), Error);
}

TEST(BoundaryModel, PriorLogLikelihoodIsBinaryEntropy) {
  std::vector<std::vector<bool>> active(10, std::vector<bool>{false});
  std::vector<bool> labels = {true, false, false, true, false, false, false, true, false, false};
  auto mx = testutil::matrix_events(active, labels);
  double r = 0.3;
  auto res = induce(mx.events, mx.features, {});
  EXPECT_NEAR(res.prior_log_likelihood, r * std::log(r) + (1 - r) * std::log(1 - r), 1e-12);
  EXPECT_TRUE(res.model.features.empty());
}

TEST(Gain, NeverFiringIsZero) {
  auto mx = testutil::matrix_events({{false}, {false}, {false}}, {true, false, false});
  BoundaryModel m;
  m.q0_yes = 1.0 / 3.0;
  auto g = gain(m, mx.features[0], mx.events);
  EXPECT_EQ(g.gain, 0.0);
  EXPECT_EQ(g.alpha_star, 0.0);
}

TEST(Gain, YesOnlyFeatureHasPositiveWeight) {
  auto mx = testutil::matrix_events({{true}, {false}, {true}, {false}, {false}}, {true, true, true, false, false});
  BoundaryModel m;
  m.q0_yes = 0.6;
  auto g = gain(m, mx.features[0], mx.events);
  EXPECT_GT(g.alpha_star, 0.0);
  EXPECT_GT(g.gain, 0.0);
}

TEST(Gain, MatchesGridSearch) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<bool>> active;
    std::vector<bool> labels;
    std::size_t n = 15 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) {
      active.push_back({rng() % 2 == 0, rng() % 3 == 0, rng() % 2 == 0});
      labels.push_back(rng() % 3 == 0 || (active.back()[1] && rng() % 2 == 0));
    }
    auto mx = testutil::matrix_events(active, labels);
    BoundaryModel m;
    m.q0_yes = 0.2 + 0.02 * trial;
    m.features = {mx.features[0], mx.features[1]};
    m.lambdas = {0.7, -0.4};
    auto got = gain(m, mx.features[2], mx.events);
    auto want = oracle::grid_gain(m, mx.features[2], mx.events);
    EXPECT_NEAR(got.gain, want.gain, 1e-6) << "trial " << trial;
    if (std::abs(want.alpha_star) < kBoundaryLambdaLimit) {
      EXPECT_NEAR(got.alpha_star, want.alpha_star, 2e-3);
    }
  }
}

TEST(Gain, InvariantToEventOrder) {
  std::vector<std::vector<bool>> active;
  std::vector<bool> labels;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i) {
    active.push_back({rng() % 2 == 0, rng() % 2 == 0});
    labels.push_back(rng() % 3 == 0);
  }
  auto a = testutil::matrix_events(active, labels);
  std::reverse(active.begin(), active.end());
  std::reverse(labels.begin(), labels.end());
  auto b = testutil::matrix_events(active, labels);
  BoundaryModel ma, mb;
  ma.q0_yes = mb.q0_yes = 0.35;
  ma.features = {a.features[0]};
  mb.features = {b.features[0]};
  ma.lambdas = mb.lambdas = {0.9};
  auto ga = gain(ma, a.features[1], a.events), gb = gain(mb, b.features[1], b.events);
  EXPECT_NEAR(ga.gain, gb.gain, 1e-12);
  EXPECT_NEAR(ga.alpha_star, gb.alpha_star, 1e-7);
}

TEST(IisFit, SingleFeatureMatchesClosedForm) {
  // Feature fires on 8 events, 5 of them YES; 12 events without it.
  std::vector<std::vector<bool>> active;
  std::vector<bool> labels;
  for (int i = 0; i < 8; ++i) {
    active.push_back({true});
    labels.push_back(i < 5);
  }
  for (int i = 0; i < 12; ++i) {
    active.push_back({false});
    labels.push_back(i < 3);
  }
  auto mx = testutil::matrix_events(active, labels);
  BoundaryModel m;
  m.q0_yes = 0.25;
  m.features = mx.features;
  m.lambdas = {0.0};
  auto res = iis_fit(m, mx.events, 2000, 1e-12);
  EXPECT_NEAR(res.model.lambdas[0], logit(5.0 / 8.0) - logit(0.25), 1e-6);
}

TEST(IisFit, NoFeaturesLeavesModel) {
  auto mx = testutil::matrix_events({{false}, {true}}, {true, false});
  BoundaryModel m;
  m.q0_yes = 0.4;
  auto res = iis_fit(m, mx.events);
  EXPECT_TRUE(res.model.lambdas.empty());
  EXPECT_EQ(res.iterations, 0u);
  EXPECT_EQ(res.log_likelihood.size(), 1u);
}

TEST(IisFit, LogLikelihoodNeverDecreases) {
  auto mat = small_matrix();
  auto mx = testutil::matrix_events(mat.active, mat.labels);
  BoundaryModel m;
  m.q0_yes = 0.4;
  m.features = mx.features;
  m.lambdas.assign(4, 0.0);
  auto res = iis_fit(m, mx.events, 300, 1e-10);
  for (std::size_t i = 1; i < res.log_likelihood.size(); ++i)
    EXPECT_GE(res.log_likelihood[i], res.log_likelihood[i - 1] - 1e-12);
  EXPECT_NEAR(res.log_likelihood.back(), log_likelihood(res.model, mx.events), 1e-12);
}

TEST(Induce, GreedyMatchesBruteForceOnSmallMatrix) {
  auto mat = small_matrix();
  auto mx = testutil::matrix_events(mat.active, mat.labels);
  InductionOptions opts;
  opts.num_features = 2;
  opts.refit_every = 1;
  opts.iis_max_iters = 5000;
  opts.iis_tol = 1e-12;
  auto res = induce(mx.events, mx.features, opts);
  ASSERT_EQ(res.model.features.size(), 2u);
  double q0 = res.model.q0_yes;
  double b = logit(q0);

  // Step 1: the single feature with the best grid-fitted gain.
  BoundaryModel empty;
  empty.q0_yes = q0;
  std::size_t first = 0;
  double best = -1;
  for (std::size_t j = 0; j < 4; ++j) {
    double g = oracle::grid_gain(empty, mx.features[j], mx.events).gain;
    if (g > best + 1e-9) {
      best = g;
      first = j;
    }
  }
  EXPECT_EQ(res.model.features[0], mx.features[first]);

  // Step 2: best second feature given the refitted first.
  BoundaryModel one = empty;
  one.features = {mx.features[first]};
  one.lambdas = {0.0};
  one = iis_fit(one, mx.events, 5000, 1e-12).model;
  std::size_t second = 0;
  best = -1;
  for (std::size_t j = 0; j < 4; ++j) {
    if (j == first) continue;
    double g = oracle::grid_gain(one, mx.features[j], mx.events).gain;
    if (g > best + 1e-9) {
      best = g;
      second = j;
    }
  }
  EXPECT_EQ(res.model.features[1], mx.features[second]);

  // The chosen pair's weights reach the 2-D grid optimum.
  double grid_best = pair_grid_ll(mat, b, first, second);
  double got = res.trace.back().log_likelihood;
  EXPECT_NEAR(got, log_likelihood(res.model, mx.events), 1e-12);
  EXPECT_GE(got, grid_best - 1e-9);
  EXPECT_LE(got, grid_best + 1e-4);
}

TEST(Induce, HandBuiltSetMatchesExhaustivePairSearch) {
  // f0 and f1 are informative and orthogonal, f2 is a noisy copy of f0 and
  // f3 fires on every other event.
  Matrix mat;
  const std::vector<int> yes = {0, 1, 2, 3, 5, 6, 7, 10, 11};
  for (int i = 0; i < 20; ++i) {
    bool f0 = i < 10, f1 = i < 5 || (i >= 10 && i < 15);
    bool f2 = i < 8 || i == 15 || i == 16, f3 = i % 2 == 0;
    mat.active.push_back({f0, f1, f2, f3});
    mat.labels.push_back(std::find(yes.begin(), yes.end(), i) != yes.end());
  }
  auto mx = testutil::matrix_events(mat.active, mat.labels);
  InductionOptions opts;
  opts.num_features = 2;
  opts.refit_every = 1;
  opts.iis_max_iters = 5000;
  opts.iis_tol = 1e-12;
  auto res = induce(mx.events, mx.features, opts);
  ASSERT_EQ(res.model.features.size(), 2u);
  double b = logit(res.model.q0_yes);

  double best = -1e300;
  std::pair<std::size_t, std::size_t> best_pair;
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t k = j + 1; k < 4; ++k) {
      double ll = pair_grid_ll(mat, b, j, k);
      if (ll > best) {
        best = ll;
        best_pair = {j, k};
      }
    }
  std::vector<FeatureTemplate> want = {mx.features[best_pair.first], mx.features[best_pair.second]};
  auto got_features = res.model.features;
  if (got_features[0] == want[1]) std::swap(got_features[0], got_features[1]);
  EXPECT_EQ(got_features, want);
  double got = res.trace.back().log_likelihood;
  EXPECT_GE(got, best - 1e-9);
  EXPECT_LE(got, best + 1e-4);
}

TEST(Induce, TraceLikelihoodNeverDecreases) {
  auto s = cue_setup(60, 4);
  auto cands = generate_candidates(s.vocab, 40, default_relevance_bins());
  InductionOptions opts;
  opts.num_features = 12;
  auto res = induce(s.events, cands, opts);
  ASSERT_FALSE(res.trace.empty());
  double prev = res.prior_log_likelihood;
  for (const auto& t : res.trace) {
    EXPECT_GT(t.gain, 0.0);
    EXPECT_GE(t.log_likelihood, prev - 1e-12);
    prev = t.log_likelihood;
  }
  EXPECT_NEAR(res.trace.back().log_likelihood, log_likelihood(res.model, s.events), 1e-12);
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    EXPECT_EQ(res.trace[i].rank, i + 1);
    EXPECT_NEAR(res.trace[i].final_exp_lambda, std::exp(res.model.lambdas[i]), 1e-12);
  }
}

TEST(Induce, PlantedCueSelectedFirst) {
  auto s = cue_setup(80, 5);
  auto cands = generate_candidates(s.vocab, 60, default_relevance_bins());
  InductionOptions opts;
  opts.num_features = 3;
  auto res = induce(s.events, cands, opts);
  ASSERT_FALSE(res.model.features.empty());
  EXPECT_EQ(describe(res.model.features[0], s.vocab), "next_sentences(begin,1)");
  EXPECT_GT(res.model.lambdas[0], 0.0);
}

TEST(Induce, ZeroFeaturesGivesPrior) {
  auto s = cue_setup(20, 6);
  auto cands = generate_candidates(s.vocab, 10, default_relevance_bins());
  InductionOptions opts;
  opts.num_features = 0;
  auto res = induce(s.events, cands, opts);
  EXPECT_TRUE(res.model.features.empty());
  EXPECT_NEAR(res.model.q0_yes, s.events.yes_rate(), 1e-15);
}

TEST(Induce, ThreadCountDoesNotChangeResult) {
  auto s = cue_setup(40, 7);
  auto cands = generate_candidates(s.vocab, 30, default_relevance_bins());
  InductionOptions opts;
  opts.num_features = 6;
  auto one = induce(s.events, cands, opts);
  opts.threads = 4;
  auto four = induce(s.events, cands, opts);
  ASSERT_EQ(one.model.features.size(), four.model.features.size());
  for (std::size_t i = 0; i < one.model.features.size(); ++i) {
    EXPECT_EQ(one.model.features[i], four.model.features[i]);
    EXPECT_EQ(one.model.lambdas[i], four.model.lambdas[i]);
  }
}

TEST(Induce, RejectsSingleClassEvents) {
  auto mx = testutil::matrix_events({{true}, {false}}, {false, false});
  EXPECT_THROW(induce(mx.events, mx.features, {}), Error);
}

TEST(BoundaryModelFile, Roundtrip) {
  auto s = cue_setup(30, 8);
  auto cands = generate_candidates(s.vocab, 20, default_relevance_bins());
  InductionOptions opts;
  opts.num_features = 5;
  auto res = induce(s.events, cands, opts);
  std::stringstream ss;
  write_boundary_model(res.model, s.vocab, ss);
  auto back = read_boundary_model(ss, s.vocab);
  EXPECT_NEAR(back.q0_yes, res.model.q0_yes, 1e-15);
  ASSERT_EQ(back.features.size(), res.model.features.size());
  for (std::size_t i = 0; i < back.features.size(); ++i) {
    EXPECT_EQ(back.features[i], res.model.features[i]);
    EXPECT_NEAR(back.lambdas[i], res.model.lambdas[i], 1e-12 * std::max(1.0, std::abs(back.lambdas[i])));
  }
}

TEST(BoundaryModelFile, Errors) {
  Vocabulary v({"a"});
  std::istringstream no_header("");
  EXPECT_THROW(read_boundary_model(no_header, v), FormatError);
  std::istringstream bad_q0("#q0_yes\t1.5\n");
  EXPECT_THROW(read_boundary_model(bad_q0, v), FormatError);
}

TEST(Trace, Format) {
  auto mx = testutil::matrix_events({{true}}, {true});
  TraceEntry t;
  t.rank = 1;
  t.feature = mx.features[0];
  t.final_exp_lambda = 2.5;
  std::ostringstream os;
  write_trace({t}, mx.vocab, os);
  EXPECT_EQ(os.str(), "1\tnext_sentences(f0,1)\t2.5\n");
}
