#pragma once

// Exponential boundary model q(b | omega) = e^{lambda . f} q0(b) / Z, with
// features chosen greedily by likelihood gain and weights fit by iterative
// scaling.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "segtext/common.hpp"
#include "segtext/features.hpp"
#include "segtext/trigger.hpp"

namespace segtext {

inline constexpr double kBoundaryLambdaLimit = 15.0;

struct BoundaryModel {
  double q0_yes = 0.5;
  std::vector<FeatureTemplate> features;
  std::vector<double> lambdas;

  void validate() const {
    if (!(q0_yes > 0.0 && q0_yes < 1.0)) throw Error("prior boundary probability must lie in (0,1)");
    if (features.size() != lambdas.size()) throw Error("one weight per feature required");
    for (std::size_t i = 0; i < features.size(); ++i) {
      features[i].validate();
      if (!std::isfinite(lambdas[i])) throw Error("non-finite feature weight");
      for (std::size_t j = 0; j < i; ++j)
        if (features[j] == features[i]) throw Error("duplicate feature in boundary model");
    }
  }

  double prior_logit() const { return std::log(q0_yes) - std::log1p(-q0_yes); }

  /// lambda . f(omega)
  double score(const BoundaryContext& ctx) const {
    double s = 0;
    for (std::size_t i = 0; i < features.size(); ++i)
      if (evaluate_feature(features[i], ctx)) s += lambdas[i];
    return s;
  }
};

namespace detail {

inline double clamp_probability(double q) {
  return std::clamp(q, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

// log q(label) for an event whose YES log-odds is z.
inline double log_q(double z, bool yes) { return yes ? -log1pexp(-z) : -log1pexp(z); }

}  // namespace detail

/// q(YES | omega), strictly inside (0, 1).
inline double q_boundary(const BoundaryModel& model, const BoundaryContext& ctx) {
  double z = model.score(ctx) + model.prior_logit();
  return detail::clamp_probability(detail::sigmoid(z));
}

/// Mean log q(label | omega) over the events, in nats.
inline double log_likelihood(const BoundaryModel& model, const EventSet& events) {
  if (events.empty()) throw Error("log-likelihood over no events");
  double b = model.prior_logit(), total = 0;
  for (std::size_t e = 0; e < events.size(); ++e)
    total += detail::log_q(model.score(events.context(e)) + b, events.label(e));
  return total / static_cast<double>(events.size());
}

/// D(p~ || q) up to the (constant) empirical conditional entropy.
inline double kl_to_empirical(const BoundaryModel& model, const EventSet& events) {
  return -log_likelihood(model, events);
}

struct GainResult {
  double alpha_star = 0.0;
  double gain = 0.0;  // nats per event
};

namespace detail {

// Fit state over the event set: per-event log-odds plus labels.
struct ScoredEvents {
  std::vector<double> z;  // lambda . f + prior logit
  std::vector<char> yes;

  double mean_log_likelihood() const {
    double total = 0;
    for (std::size_t e = 0; e < z.size(); ++e) total += log_q(z[e], yes[e] != 0);
    return total / static_cast<double>(z.size());
  }
};

// Best weight for one extra feature firing on `fires`, holding the rest fixed.
inline GainResult gain_on(const ScoredEvents& st, const FireList& fires, double tol = 1e-8,
                          int max_steps = 100) {
  if (fires.empty()) return {0.0, 0.0};
  auto deriv = [&](double a, double& curvature) {
    double d = 0;
    curvature = 0;
    for (std::uint32_t e : fires) {
      double q = sigmoid(st.z[e] + a);
      d += (st.yes[e] ? 1.0 : 0.0) - q;
      curvature += q * (1.0 - q);
    }
    return d;
  };
  auto objective = [&](double a) {
    double total = 0;
    for (std::uint32_t e : fires) total += log_q(st.z[e] + a, st.yes[e] != 0);
    return total;
  };
  double lo = -kBoundaryLambdaLimit, hi = kBoundaryLambdaLimit, curv = 0;
  double alpha;
  if (deriv(lo, curv) <= 0) {
    alpha = lo;
  } else if (deriv(hi, curv) >= 0) {
    alpha = hi;
  } else {
    alpha = 0.0;
    for (int step = 0; step < max_steps; ++step) {
      double d = deriv(alpha, curv);
      if (d > 0) lo = alpha; else hi = alpha;
      double next = curv > 0 ? alpha + d / curv : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      bool done = std::abs(next - alpha) < tol;
      alpha = next;
      if (done) break;
    }
  }
  double g = (objective(alpha) - objective(0.0)) / static_cast<double>(st.z.size());
  return {alpha, std::max(0.0, g)};
}

struct IisTrace {
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
};

// Improved iterative scaling over indexed features. Updates lambdas and st.z.
inline IisTrace iis_indexed(std::vector<double>& lambdas, const std::vector<FireList>& fires,
                            ScoredEvents& st, double prior_logit, std::size_t max_iters, double tol,
                            const std::vector<std::string>* names = nullptr) {
  IisTrace trace;
  std::size_t n = st.z.size();
  std::vector<std::uint32_t> active(n, 0);
  for (const auto& f : fires)
    for (std::uint32_t e : f) ++active[e];
  std::vector<double> empirical(fires.size(), 0.0);
  for (std::size_t i = 0; i < fires.size(); ++i)
    for (std::uint32_t e : fires[i]) empirical[i] += st.yes[e] ? 1.0 : 0.0;

  auto rescore = [&] {
    std::fill(st.z.begin(), st.z.end(), prior_logit);
    for (std::size_t i = 0; i < fires.size(); ++i)
      for (std::uint32_t e : fires[i]) st.z[e] += lambdas[i];
  };
  rescore();
  trace.log_likelihood.push_back(st.mean_log_likelihood());
  if (fires.empty()) return trace;

  std::vector<double> delta(fires.size());
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    double max_delta = 0;
    for (std::size_t i = 0; i < fires.size(); ++i) {
      std::vector<double> a;
      for (std::uint32_t e : fires[i]) {
        std::uint32_t m = active[e];
        if (a.size() <= m) a.resize(m + 1, 0.0);
        a[m] += sigmoid(st.z[e]);
      }
      double lo = -kBoundaryLambdaLimit - lambdas[i], hi = kBoundaryLambdaLimit - lambdas[i];
      delta[i] = solve_scaling(a, empirical[i], lo, hi, 1e-12, 100);
      if (!std::isfinite(lambdas[i] + delta[i]))
        throw Error("non-finite update for boundary feature " +
                    (names ? (*names)[i] : std::to_string(i)));
      max_delta = std::max(max_delta, std::abs(delta[i]));
    }
    for (std::size_t i = 0; i < fires.size(); ++i)
      lambdas[i] = std::clamp(lambdas[i] + delta[i], -kBoundaryLambdaLimit, kBoundaryLambdaLimit);
    rescore();
    trace.log_likelihood.push_back(st.mean_log_likelihood());
    trace.iterations = iter + 1;
    if (max_delta < tol) break;
  }
  return trace;
}

inline ScoredEvents score_events(const BoundaryModel& model, const std::vector<FireList>& fires,
                                 const EventSet& events) {
  ScoredEvents st;
  st.z.assign(events.size(), model.prior_logit());
  st.yes.resize(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) st.yes[e] = events.label(e) ? 1 : 0;
  for (std::size_t i = 0; i < fires.size(); ++i)
    for (std::uint32_t e : fires[i]) st.z[e] += model.lambdas[i];
  return st;
}

}  // namespace detail

/// Gain of adding `candidate` to `model` with its best single weight.
inline GainResult gain(const BoundaryModel& model, const FeatureTemplate& candidate,
                       const EventSet& events) {
  if (events.empty()) throw Error("gain over no events");
  auto fires = build_feature_index(events, model.features);
  auto st = detail::score_events(model, fires, events);
  FireList cand = build_feature_index(events, std::span<const FeatureTemplate>(&candidate, 1))[0];
  return detail::gain_on(st, cand);
}

struct IisResult {
  BoundaryModel model;
  std::vector<double> log_likelihood;  // before the first update, then after each
  std::size_t iterations = 0;
};

/// Fits the weights of a fixed feature set by improved iterative scaling.
/// Stops when every update is below `tol` in magnitude.
inline IisResult iis_fit(const BoundaryModel& model, const EventSet& events,
                         std::size_t max_iters = 500, double tol = 1e-9) {
  model.validate();
  if (events.empty()) throw Error("iterative scaling over no events");
  auto fires = build_feature_index(events, model.features);
  auto st = detail::score_events(model, fires, events);
  IisResult out{model, {}, 0};
  std::vector<std::string> names;
  for (const auto& f : model.features) names.push_back(std::string(kind_name(f.kind)) + "/" + std::to_string(f.word));
  auto trace = detail::iis_indexed(out.model.lambdas, fires, st, model.prior_logit(), max_iters, tol, &names);
  out.log_likelihood = std::move(trace.log_likelihood);
  out.iterations = trace.iterations;
  return out;
}

// ---------------------------------------------------------------------------
// Greedy induction
// ---------------------------------------------------------------------------

struct InductionOptions {
  std::size_t num_features = 50;
  /// Refit all weights after this many selections (1 refits after each).
  std::size_t refit_every = 5;
  std::size_t iis_max_iters = 200;
  double iis_tol = 1e-7;
  /// Prior YES probability; negative means the empirical boundary rate.
  double q0_yes = -1.0;
  unsigned threads = 1;
};

struct TraceEntry {
  std::size_t rank = 0;
  FeatureTemplate feature;
  double gain = 0.0;
  double alpha = 0.0;           // weight when selected
  double log_likelihood = 0.0;  // training LL after this step
  double final_exp_lambda = 0.0;
};

struct InductionResult {
  BoundaryModel model;
  std::vector<TraceEntry> trace;
  double prior_log_likelihood = 0.0;
};

inline InductionResult induce(const EventSet& events, const std::vector<FeatureTemplate>& candidates,
                              const InductionOptions& opts = {}) {
  if (events.empty()) throw Error("induction over no events");
  InductionResult out;
  double q0 = opts.q0_yes >= 0 ? opts.q0_yes : events.yes_rate();
  if (!(q0 > 0.0 && q0 < 1.0))
    throw Error("training events must contain both boundary and non-boundary gaps");
  out.model.q0_yes = q0;

  auto cand_fires = build_feature_index(events, candidates);
  std::vector<FireList> model_fires;
  auto st = detail::score_events(out.model, model_fires, events);
  out.prior_log_likelihood = st.mean_log_likelihood();

  std::vector<char> used(candidates.size(), 0);
  std::vector<GainResult> gains(candidates.size());
  std::size_t since_refit = 0;
  unsigned threads = std::max(1u, opts.threads);

  for (std::size_t step = 0; step < opts.num_features; ++step) {
    detail::parallel_for(candidates.size(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t c = b; c < e; ++c)
        gains[c] = used[c] ? GainResult{} : detail::gain_on(st, cand_fires[c]);
    });
    std::size_t best = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      if (best == candidates.size() || gains[c].gain > gains[best].gain) best = c;
    }
    if (best == candidates.size() || gains[best].gain <= 1e-12) break;

    used[best] = 1;
    out.model.features.push_back(candidates[best]);
    out.model.lambdas.push_back(gains[best].alpha_star);
    model_fires.push_back(cand_fires[best]);
    for (std::uint32_t e : cand_fires[best]) st.z[e] += gains[best].alpha_star;
    ++since_refit;

    if (opts.refit_every > 0 && since_refit >= opts.refit_every) {
      detail::iis_indexed(out.model.lambdas, model_fires, st, out.model.prior_logit(),
                          opts.iis_max_iters, opts.iis_tol);
      since_refit = 0;
    }
    TraceEntry entry;
    entry.rank = step + 1;
    entry.feature = candidates[best];
    entry.gain = gains[best].gain;
    entry.alpha = gains[best].alpha_star;
    entry.log_likelihood = st.mean_log_likelihood();
    out.trace.push_back(entry);
  }
  if (since_refit > 0) {
    detail::iis_indexed(out.model.lambdas, model_fires, st, out.model.prior_logit(),
                        opts.iis_max_iters, opts.iis_tol);
    if (!out.trace.empty()) out.trace.back().log_likelihood = st.mean_log_likelihood();
  }
  for (std::size_t i = 0; i < out.trace.size(); ++i) out.trace[i].final_exp_lambda = std::exp(out.model.lambdas[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Model and trace files
// ---------------------------------------------------------------------------

/// "#q0_yes<TAB>value" header followed by induced-feature lines.
inline void write_boundary_model(const BoundaryModel& model, const Vocabulary& vocab, std::ostream& os) {
  os << "#q0_yes\t" << detail::format_double(model.q0_yes) << '\n';
  for (std::size_t i = 0; i < model.features.size(); ++i)
    write_feature_line(model.features[i], model.lambdas[i], vocab, os);
}

inline BoundaryModel read_boundary_model(std::istream& is, const Vocabulary& vocab) {
  BoundaryModel model;
  bool have_q0 = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view v = detail::strip_cr(line);
    if (v.empty()) continue;
    try {
      if (v.front() == '#') {
        auto f = detail::split(v, '\t');
        if (f.size() == 2 && f[0] == "#q0_yes") {
          model.q0_yes = detail::parse_double(f[1]);
          have_q0 = true;
        }
        continue;
      }
      auto wf = parse_feature_line(v, vocab);
      model.features.push_back(wf.feature);
      model.lambdas.push_back(wf.lambda);
    } catch (const FormatError& e) {
      throw FormatError("model line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_q0) throw FormatError("boundary model lacks '#q0_yes' header");
  try {
    model.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(e.what());
  }
  return model;
}

/// "rank<TAB>feature<TAB>e_lambda" lines in selection order.
inline void write_trace(const std::vector<TraceEntry>& trace, const Vocabulary& vocab, std::ostream& os) {
  for (const auto& t : trace)
    os << t.rank << '\t' << describe(t.feature, vocab) << '\t'
       << detail::format_double(t.final_exp_lambda, 6) << '\n';
}

}  // namespace segtext
