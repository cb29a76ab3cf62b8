#pragma once

// Segmentation scoring: the probabilistic agreement metric P_mu, exact-match
// precision/recall, and the degenerate baseline segmenters.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"

namespace segtext {

/// D_mu(i, j) = gamma e^{-mu |i - j|} over the ordered sentence pairs
/// i <= j of an n-sentence text, i = j included.
class DistanceDistribution {
public:
  DistanceDistribution(double mu, std::size_t n) : mu_(mu), n_(n) {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw Error("mu must be a finite non-negative rate");
    if (n < 1) throw Error("distance distribution over an empty text");
    double r = std::exp(-mu);
    // block_[L] = sum_{d < L} (L - d) r^d, mass of all pairs inside a run of L.
    block_.assign(n + 1, 0.0);
    double geometric = 0.0, rd = 1.0;
    for (std::size_t len = 1; len <= n; ++len) {
      geometric += rd;
      rd *= r;
      block_[len] = block_[len - 1] + geometric;
    }
    gamma_ = 1.0 / block_[n];
  }

  double mu() const { return mu_; }
  std::size_t n() const { return n_; }
  double gamma() const { return gamma_; }

  double weight(std::size_t i, std::size_t j) const {
    std::size_t d = i > j ? i - j : j - i;
    return gamma_ * std::exp(-mu_ * static_cast<double>(d));
  }

  /// Unnormalized mass of all pairs inside a run of `len` sentences.
  double block_mass(std::size_t len) const { return block_.at(len); }

  /// Normalized mass of the pairs lying within one segment of `seg`.
  double same_segment_mass(const Segmentation& seg) const {
    double m = 0;
    for (std::size_t len : seg.segment_lengths()) m += block_.at(len);
    return gamma_ * m;
  }

private:
  double mu_;
  std::size_t n_;
  double gamma_ = 1.0;
  std::vector<double> block_;
};

namespace detail {

inline void check_same_length(const Segmentation& ref, const Segmentation& hyp) {
  if (ref.n_sentences() != hyp.n_sentences())
    throw Error("reference and hypothesis cover different numbers of sentences (" +
                std::to_string(ref.n_sentences()) + " vs " + std::to_string(hyp.n_sentences()) + ")");
}

inline Segmentation union_of(const Segmentation& a, const Segmentation& b) {
  std::vector<std::size_t> merged;
  std::set_union(a.boundaries().begin(), a.boundaries().end(), b.boundaries().begin(),
                 b.boundaries().end(), std::back_inserter(merged));
  return Segmentation(a.n_sentences(), std::move(merged));
}

}  // namespace detail

/// Probability that a D_mu-distributed sentence pair is classified the same
/// way (same document or not) by both segmentations.
///
/// Pairs agree unless exactly one segmentation separates them, so
///   1 - P = mass(same in ref) + mass(same in hyp) - 2 mass(same in both),
/// and "same in both" is "same in the union of the boundary sets". Each term
/// is a sum of closed-form per-run masses, O(n) overall.
inline double p_mu(const Segmentation& ref, const Segmentation& hyp, double mu) {
  detail::check_same_length(ref, hyp);
  DistanceDistribution dist(mu, ref.n_sentences());
  double disagree = dist.same_segment_mass(ref) + dist.same_segment_mass(hyp) -
                    2.0 * dist.same_segment_mass(detail::union_of(ref, hyp));
  return std::clamp(1.0 - disagree, 0.0, 1.0);
}

/// Direct double sum over every pair i <= j.
inline double p_mu_quadratic(const Segmentation& ref, const Segmentation& hyp, double mu) {
  detail::check_same_length(ref, hyp);
  std::size_t n = ref.n_sentences();
  auto ref_doc = ref.document_ids(), hyp_doc = hyp.document_ids();
  double total = 0, agree = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double w = std::exp(-mu * static_cast<double>(j - i));
      total += w;
      if ((ref_doc[i] == ref_doc[j]) == (hyp_doc[i] == hyp_doc[j])) agree += w;
    }
  return agree / total;
}

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// Samples a distance d with probability proportional to (n - d) e^{-mu d},
/// then a pair uniformly among those at distance d.
inline MonteCarloEstimate monte_carlo_p_mu(const Segmentation& ref, const Segmentation& hyp,
                                           double mu, std::size_t samples, std::uint64_t seed) {
  detail::check_same_length(ref, hyp);
  if (samples < 1) throw Error("Monte Carlo estimate needs at least one sample");
  std::size_t n = ref.n_sentences();
  std::vector<double> w(n);
  for (std::size_t d = 0; d < n; ++d) w[d] = static_cast<double>(n - d) * std::exp(-mu * static_cast<double>(d));
  std::discrete_distribution<std::size_t> distance(w.begin(), w.end());
  std::mt19937_64 rng(seed);
  auto ref_doc = ref.document_ids(), hyp_doc = hyp.document_ids();
  std::size_t agree = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t d = distance(rng);
    std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - d - 1)(rng);
    std::size_t j = i + d;
    agree += (ref_doc[i] == ref_doc[j]) == (hyp_doc[i] == hyp_doc[j]);
  }
  MonteCarloEstimate out;
  out.samples = samples;
  out.estimate = static_cast<double>(agree) / static_cast<double>(samples);
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(samples));
  return out;
}

/// Exact-match boundary precision and recall. Undefined quantities are
/// reported as 0 with the matching flag cleared; f is empty when P + R = 0.
struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> f_measure;
  bool precision_defined = false;
  bool recall_defined = false;
  std::size_t matched = 0;
};

inline PrecisionRecall precision_recall(const Segmentation& ref, const Segmentation& hyp) {
  detail::check_same_length(ref, hyp);
  std::vector<std::size_t> common;
  std::set_intersection(ref.boundaries().begin(), ref.boundaries().end(), hyp.boundaries().begin(),
                        hyp.boundaries().end(), std::back_inserter(common));
  PrecisionRecall pr;
  pr.matched = common.size();
  if (!hyp.boundaries().empty()) {
    pr.precision = static_cast<double>(common.size()) / static_cast<double>(hyp.boundaries().size());
    pr.precision_defined = true;
  }
  if (!ref.boundaries().empty()) {
    pr.recall = static_cast<double>(common.size()) / static_cast<double>(ref.boundaries().size());
    pr.recall_defined = true;
  }
  if (pr.precision_defined && pr.recall_defined && pr.precision + pr.recall > 0)
    pr.f_measure = 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall);
  return pr;
}

enum class BaselineKind { Random, All, None, Even };

inline BaselineKind parse_baseline_kind(std::string_view s) {
  if (s == "random") return BaselineKind::Random;
  if (s == "all") return BaselineKind::All;
  if (s == "none") return BaselineKind::None;
  if (s == "even") return BaselineKind::Even;
  throw Error("unknown baseline '" + std::string(s) + "' (random, all, none, even)");
}

inline std::string_view baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::Random: return "random";
    case BaselineKind::All: return "all";
    case BaselineKind::None: return "none";
    case BaselineKind::Even: return "even";
  }
  return "?";
}

/// random: ref_count - 1 distinct gaps drawn uniformly; all: every gap;
/// none: no gaps; even: a boundary every mean_len sentences.
inline Segmentation baseline(BaselineKind kind, std::size_t n, std::size_t ref_count,
                             std::size_t mean_len, std::uint64_t seed) {
  if (n < 1) throw Error("baseline over an empty text");
  std::vector<std::size_t> gaps;
  switch (kind) {
    case BaselineKind::All:
      for (std::size_t g = 1; g < n; ++g) gaps.push_back(g);
      break;
    case BaselineKind::None:
      break;
    case BaselineKind::Even:
      if (mean_len < 1) throw Error("even baseline needs mean_len >= 1");
      for (std::size_t g = mean_len; g < n; g += mean_len) gaps.push_back(g);
      break;
    case BaselineKind::Random: {
      if (ref_count < 1) throw Error("random baseline needs ref_count >= 1");
      if (ref_count - 1 > n - 1) throw Error("random baseline asks for more boundaries than gaps");
      std::vector<std::size_t> all(n - 1);
      std::iota(all.begin(), all.end(), std::size_t{1});
      std::mt19937_64 rng(seed);
      std::size_t k = ref_count - 1;
      for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      gaps.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
      std::sort(gaps.begin(), gaps.end());
      break;
    }
  }
  return Segmentation(n, std::move(gaps));
}

struct MetricReport {
  std::string model;
  double p_mu = 0.0;
  PrecisionRecall pr;
  std::size_t ref_count = 0;  // reference boundaries
  std::size_t hyp_count = 0;  // hypothesized boundaries
};

inline MetricReport evaluate(std::string name, const Segmentation& ref, const Segmentation& hyp,
                             double mu) {
  MetricReport r;
  r.model = std::move(name);
  r.p_mu = p_mu(ref, hyp, mu);
  r.pr = precision_recall(ref, hyp);
  r.ref_count = ref.boundaries().size();
  r.hyp_count = hyp.boundaries().size();
  return r;
}

namespace detail {
inline std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}
inline std::string f_text(const std::optional<double>& f) {
  if (!f) return "---";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *f);
  return buf;
}
}  // namespace detail

/// Aligned table: model, reference/hypothesized boundaries, P_mu, precision,
/// recall, F-measure.
inline void write_report_table(const std::vector<MetricReport>& rows, std::ostream& os) {
  std::size_t name_w = 5;
  for (const auto& r : rows) name_w = std::max(name_w, r.model.size());
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                  const std::string& e, const std::string& f, const std::string& g) {
    os << std::left << std::setw(static_cast<int>(name_w)) << a << "  " << std::right << std::setw(9) << b
       << "  " << std::setw(9) << c << "  " << std::setw(7) << d << "  " << std::setw(9) << e << "  "
       << std::setw(7) << f << "  " << std::setw(5) << g << '\n';
  };
  line("model", "ref", "hyp", "P_mu", "precision", "recall", "F");
  for (const auto& r : rows)
    line(r.model, std::to_string(r.ref_count), std::to_string(r.hyp_count), detail::percent(r.p_mu),
         detail::percent(r.pr.precision), detail::percent(r.pr.recall), detail::f_text(r.pr.f_measure));
}

/// Tab-separated form of the same report; undefined F is written as "-".
inline void write_report_tsv(const std::vector<MetricReport>& rows, std::ostream& os) {
  os << "model\tref_boundaries\thyp_boundaries\tp_mu\tprecision\trecall\tf_measure\n";
  for (const auto& r : rows) {
    os << r.model << '\t' << r.ref_count << '\t' << r.hyp_count << '\t'
       << detail::format_double(r.p_mu, 10) << '\t' << detail::format_double(r.pr.precision, 10) << '\t'
       << detail::format_double(r.pr.recall, 10) << '\t'
       << (r.pr.f_measure ? detail::format_double(*r.pr.f_measure, 10) : std::string("-")) << '\n';
  }
}

}  // namespace segtext
