#pragma once

// Decision procedure: boundary probabilities -> Segmentation via a threshold
// and a minimum separation, with both knobs tuned on heldout data.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/corpus.hpp"
#include "segtext/features.hpp"
#include "segtext/induction.hpp"
#include "segtext/metric.hpp"
#include "segtext/trigger.hpp"

namespace segtext {

struct SegmenterConfig {
  double alpha = 0.5;         // probability threshold
  std::size_t epsilon = 1;    // minimum separation between boundaries, in sentences

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0,1)");
    if (epsilon < 1) throw Error("epsilon must be at least 1");
  }
  friend bool operator==(const SegmenterConfig&, const SegmenterConfig&) = default;
};

/// q(YES) at every gap of an event set.
inline std::vector<double> score_events(const BoundaryModel& model, const EventSet& events) {
  auto fires = build_feature_index(events, model.features);
  std::vector<double> z(events.size(), model.prior_logit());
  for (std::size_t i = 0; i < fires.size(); ++i)
    for (std::uint32_t e : fires[i]) z[e] += model.lambdas[i];
  std::vector<double> probs(events.size());
  for (std::size_t e = 0; e < z.size(); ++e) probs[e] = detail::clamp_probability(detail::sigmoid(z[e]));
  return probs;
}

/// Boundary probability at each of the n - 1 gaps of `text`, whose document
/// structure is ignored; the history cache never resets.
inline std::vector<double> score_gaps(const BoundaryModel& model, const TriggerModel& trig,
                                      const Corpus& text) {
  if (text.n_sentences() < 2) throw Error("scoring needs at least 2 sentences");
  model.validate();
  auto flat = as_single_document(text.sentences);
  return score_events(model, unlabeled_events(flat, trig));
}

/// Gaps with probability >= alpha, accepted greedily from the most probable
/// (ties to the smaller gap); a gap closer than epsilon to an accepted one is
/// dropped.
inline Segmentation decide(std::span<const double> probs, const SegmenterConfig& config) {
  config.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) throw Error("gap probability outside [0,1]");
    if (probs[i] >= config.alpha) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  std::vector<std::size_t> accepted;
  for (std::size_t i : order) {
    std::size_t gap = i + 1;
    bool clear = std::none_of(accepted.begin(), accepted.end(), [&](std::size_t a) {
      return (a > gap ? a - gap : gap - a) < config.epsilon;
    });
    if (clear) accepted.push_back(gap);
  }
  std::sort(accepted.begin(), accepted.end());
  return Segmentation(probs.size() + 1, std::move(accepted));
}

struct TuneResult {
  SegmenterConfig config;
  double p_mu = 0.0;
};

/// alpha in {0.02, 0.04, ..., 0.98} crossed with epsilon in {1..10}.
inline std::vector<SegmenterConfig> tuning_grid() {
  std::vector<SegmenterConfig> grid;
  for (int a = 1; a <= 49; ++a)
    for (std::size_t e = 1; e <= 10; ++e) grid.push_back({a / 50.0, e});
  return grid;
}

/// Grid point maximizing P_mu against `ref`; ties go to the smaller alpha,
/// then the smaller epsilon.
inline TuneResult tune(std::span<const double> probs, const Segmentation& ref, double mu) {
  if (ref.n_sentences() != probs.size() + 1) throw Error("probabilities do not match the reference");
  TuneResult best;
  bool have = false;
  for (const auto& cfg : tuning_grid()) {
    double score = p_mu(ref, decide(probs, cfg), mu);
    if (!have || score > best.p_mu) {
      best = {cfg, score};
      have = true;
    }
  }
  return best;
}

inline TuneResult tune(const BoundaryModel& model, const TriggerModel& trig, const Corpus& heldout,
                       double mu) {
  auto probs = score_gaps(model, trig, heldout);
  return tune(probs, heldout.reference(), mu);
}

/// "gap<TAB>prob" lines, gaps numbered from 1.
inline void write_gap_probs(std::span<const double> probs, std::ostream& os) {
  for (std::size_t i = 0; i < probs.size(); ++i)
    os << (i + 1) << '\t' << detail::format_double(probs[i], 10) << '\n';
}

/// "alpha<TAB>value" and "epsilon<TAB>value" lines.
inline void write_config(const SegmenterConfig& cfg, std::ostream& os) {
  os << "alpha\t" << detail::format_double(cfg.alpha) << '\n';
  os << "epsilon\t" << cfg.epsilon << '\n';
}

inline SegmenterConfig read_config(std::istream& is) {
  SegmenterConfig cfg;
  bool have_alpha = false, have_eps = false;
  std::string line;
  while (std::getline(is, line)) {
    std::string_view v = detail::strip_cr(line);
    if (v.empty() || v.front() == '#') continue;
    auto f = detail::split(v, '\t');
    if (f.size() != 2) throw FormatError("config line needs 'key<TAB>value'");
    if (f[0] == "alpha") {
      cfg.alpha = detail::parse_double(f[1]);
      have_alpha = true;
    } else if (f[0] == "epsilon") {
      cfg.epsilon = detail::parse_count(f[1]);
      have_eps = true;
    } else if (f[0] != "p_mu") {
      throw FormatError("unknown config key '" + std::string(f[0]) + "'");
    }
  }
  if (!have_alpha || !have_eps) throw FormatError("config needs both alpha and epsilon");
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return cfg;
}

}  // namespace segtext
