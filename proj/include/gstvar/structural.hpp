#pragma once
// Recursive structural analysis: lower-triangular impact matrix, structural
// shock recovery, Monte Carlo generalized impulse responses (Koop, Pesaran &
// Potter 1996 style, with common random numbers across the shocked and
// baseline branches) and generalized forecast error variance decompositions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gstvar/errors.hpp"
#include "gstvar/estimation.hpp"
#include "gstvar/model.hpp"
#include "gstvar/rng.hpp"
#include "gstvar/threading.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

// Lower-triangular B_t with B_t B_t' = Omega_{y,t} and positive diagonal.
inline MatrixXd impact_matrix(const MatrixXd& omega_yt) {
  Eigen::LLT<MatrixXd> llt(omega_yt);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("conditional covariance is not positive definite");
  return llt.matrixL();
}

struct ShockRecovery {
  MatrixXd shocks;                 // T x d, e_t = B_t^{-1}(y_t - mu_{y,t})
  TransitionWeightSeries weights;  // T x M trace
};

// Structural shocks of the recursively identified model, recovered from the
// data by per-t triangular solves.
inline ShockRecovery recover_shocks(const FittedModel& fit, const SeriesMatrix& data) {
  LikelihoodTrace trace;
  log_likelihood(fit.params, data, &trace);
  const int T = static_cast<int>(trace.cond_means.rows());
  const int d = fit.params.order.d, p = fit.params.order.p;
  ShockRecovery out;
  out.shocks.resize(T, d);
  out.weights = trace.weights;
  VectorXd e(d);
  for (int t = 0; t < T; ++t) {
    e = data.values.row(p + t).transpose() - trace.cond_means.row(t).transpose();
    trace.cond_cholesky[t].triangularView<Eigen::Lower>().solveInPlace(e);
    out.shocks.row(t) = e;
  }
  return out;
}

// A length-p conditioning history (rows most-recent-first). Histories taken
// from data carry their origin row, the transition weights at that time and
// the recovered structural shock, enabling data-matched impulse experiments.
struct History {
  MatrixXd rows;  // p x d
  std::optional<int> origin_index;          // row index of y_t in the source data
  std::optional<VectorXd> weight_at_origin; // alpha_{.,t}
  std::optional<VectorXd> shock_at_origin;  // recovered e_t
};

struct GirfResult {
  MatrixXd variable_paths;         // (H+1) x d mean responses
  MatrixXd weight_paths;           // (H+1) x M; row 0 is zero by definition
  MatrixXd variable_variances;     // per-horizon sample variance across repetitions
  MatrixXd weight_variances;
  int shock_index = 0;
  double delta = 0.0;
  double scale_factor = 1.0;
  int repetitions = 0;
  std::uint64_t seed = 0;
  std::optional<int> history_id;
};

// Experiment hooks. baseline_shock_override pins the j-th element of the
// baseline branch's first draw (the shocked branch still imposes delta), and
// random_delta redraws delta each repetition instead of imposing it.
struct GirfOptions {
  std::optional<double> baseline_shock_override;
  bool random_delta = false;
};

// Monte Carlo GIRF for one history: per repetition, draw H+1 standard normal
// structural shock vectors, impose (sign, size) delta on element j of the
// first one in the shocked branch, share every other draw across branches,
// iterate both branches forward and average the per-horizon differences.
// Transition-weight responses at horizon h >= 1 come from the simulated
// trailing histories; at h = 0 the weights are predetermined, so the response
// is zero by definition.
inline GirfResult girf(const ParameterVector& params, int shock_index, double delta,
                       const History& history, int H, int R1, std::uint64_t seed,
                       const GirfOptions& options = {}) {
  params.validate();
  const int d = params.order.d, p = params.order.p, M = params.order.M;
  if (shock_index < 0 || shock_index >= d)
    throw ValidationError("shock index out of range");
  if (H < 1 || R1 < 1) throw ValidationError("need H >= 1 and R1 >= 1");
  if (history.rows.rows() != p || history.rows.cols() != d)
    throw DimensionMismatch("history must be p x d");
  if (!history.rows.allFinite())
    throw ValidationError("history has non-finite entries");

  detail::ModelCache cache(params);
  detail::StepWorkspace shocked(d, p, M), baseline(d, p, M);
  const VectorXd hist0 = detail::stack_history(history.rows);

  GirfResult out;
  out.shock_index = shock_index;
  out.delta = delta;
  out.repetitions = R1;
  out.seed = seed;
  out.history_id = history.origin_index;
  out.variable_paths = MatrixXd::Zero(H + 1, d);
  out.weight_paths = MatrixXd::Zero(H + 1, M);
  out.variable_variances = MatrixXd::Zero(H + 1, d);
  out.weight_variances = MatrixXd::Zero(H + 1, M);
  MatrixXd var_m2 = MatrixXd::Zero(H + 1, d);   // Welford accumulators
  MatrixXd wgt_m2 = MatrixXd::Zero(H + 1, M);

  MatrixXd draws(H + 1, d);
  VectorXd e_shocked(d), e_base(d), y_s(d), y_b(d), dv(d), dw(M);

  for (int rep = 0; rep < R1; ++rep) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(rep)));
    for (int h = 0; h <= H; ++h)
      for (int i = 0; i < d; ++i) draws(h, i) = rng.normal();
    double rep_delta = delta;
    if (options.random_delta) rep_delta = rng.normal();

    shocked.hist = hist0;
    baseline.hist = hist0;
    for (int h = 0; h <= H; ++h) {
      detail::weights_at(cache, shocked.hist, shocked);
      detail::weights_at(cache, baseline.hist, baseline);
      dw = shocked.weights - baseline.weights;  // zero at h = 0 by construction

      detail::moments_at(cache, shocked.hist, shocked.weights, shocked);
      detail::moments_at(cache, baseline.hist, baseline.weights, baseline);
      shocked.llt.compute(shocked.omega_t);
      baseline.llt.compute(baseline.omega_t);
      if (shocked.llt.info() != Eigen::Success || baseline.llt.info() != Eigen::Success)
        throw NotPositiveDefinite("conditional covariance failed Cholesky in GIRF");

      if (h == 0) {
        e_base = draws.row(0);
        if (options.baseline_shock_override)
          e_base(shock_index) = *options.baseline_shock_override;
        e_shocked = e_base;
        e_shocked(shock_index) = rep_delta;
      } else {
        e_base = draws.row(h);
        e_shocked = e_base;
      }
      y_s = shocked.mu + shocked.llt.matrixL() * e_shocked;
      y_b = baseline.mu + baseline.llt.matrixL() * e_base;
      dv = y_s - y_b;

      // Welford running mean/variance over repetitions
      for (int i = 0; i < d; ++i) {
        const double d1 = dv(i) - out.variable_paths(h, i);
        out.variable_paths(h, i) += d1 / (rep + 1);
        var_m2(h, i) += d1 * (dv(i) - out.variable_paths(h, i));
      }
      for (int m = 0; m < M; ++m) {
        const double d1 = dw(m) - out.weight_paths(h, m);
        out.weight_paths(h, m) += d1 / (rep + 1);
        wgt_m2(h, m) += d1 * (dw(m) - out.weight_paths(h, m));
      }

      detail::push_history(shocked.hist, y_s, d);
      detail::push_history(baseline.hist, y_b, d);
    }
  }
  if (R1 > 1) {
    out.variable_variances = var_m2 / (R1 - 1);
    out.weight_variances = wgt_m2 / (R1 - 1);
  }
  out.weight_paths.row(0).setZero();  // F_{t-1}-measurable at impact
  return out;
}

// Histories from the data where regime `regime` carries transition weight
// above `threshold`, with origin metadata and the recovered shock attached.
inline std::vector<History> regime_histories(const FittedModel& fit,
                                             const SeriesMatrix& data, int regime,
                                             double threshold = 0.75) {
  const int d = fit.params.order.d, p = fit.params.order.p;
  if (regime < 0 || regime >= fit.params.order.M)
    throw ValidationError("regime index out of range");
  const ShockRecovery rec = recover_shocks(fit, data);
  const int T = static_cast<int>(rec.shocks.rows());
  std::vector<History> out;
  for (int t = 0; t < T; ++t) {
    if (!(rec.weights.weights(t, regime) > threshold)) continue;
    History h;
    h.rows.resize(p, d);
    for (int k = 0; k < p; ++k) h.rows.row(k) = data.values.row(p + t - 1 - k);
    h.origin_index = p + t;
    h.weight_at_origin = rec.weights.weights.row(t);
    h.shock_at_origin = rec.shocks.row(t);
    out.push_back(std::move(h));
  }
  if (out.empty())
    throw EmptyHistorySet("no history exceeds the transition weight threshold");
  return out;
}

inline std::vector<History> all_histories(const FittedModel& fit,
                                          const SeriesMatrix& data) {
  return regime_histories(fit, data, 0, -1.0);  // every weight exceeds -1
}

// Histories drawn from one regime's stationary distribution (initial-value
// uncertainty experiments). Drawn sequentially from one seeded generator.
inline std::vector<History> stationary_histories(const ParameterVector& params,
                                                 int regime, int count,
                                                 std::uint64_t seed) {
  params.validate();
  if (regime < 0 || regime >= params.order.M)
    throw ValidationError("regime index out of range");
  if (count < 1) throw ValidationError("need at least one draw");
  const int d = params.order.d, p = params.order.p;
  detail::ModelCache cache(params);
  const auto& reg = cache.regimes[regime];
  Rng rng(seed);
  std::vector<History> out(count);
  for (int i = 0; i < count; ++i) {
    const VectorXd draw = reg.mean_stack +
        reg.stat_chol.triangularView<Eigen::Lower>() * rng.normal_vector(d * p);
    out[i].rows.resize(p, d);
    for (int k = 0; k < p; ++k) out[i].rows.row(k) = draw.segment(k * d, d);
  }
  return out;
}

enum class DeltaMode { data_shock, fixed };

struct ScaleSpec {
  int variable = 0;   // i*: the variable whose instantaneous response is pinned
  double target = 1.0;
};

struct GirfCollection {
  std::vector<GirfResult> results;
  std::vector<int> excluded;  // history ids dropped for degenerate scaling
};

namespace detail {

inline std::uint64_t history_stream(const History& h, int position) {
  return h.origin_index ? static_cast<std::uint64_t>(*h.origin_index)
                        : 0x100000000ULL + static_cast<std::uint64_t>(position);
}

}  // namespace detail

// Per-history GIRFs for one shock, each scaled (after averaging over
// repetitions) so the instantaneous response of scale->variable equals
// scale->target. In data_shock mode delta is the structural shock recovered
// at each history's origin.
inline GirfCollection girf_collection(const ParameterVector& params,
                                      const std::vector<History>& histories,
                                      int shock_index, int H, int R1,
                                      std::optional<ScaleSpec> scale,
                                      std::uint64_t seed, DeltaMode mode,
                                      double fixed_delta = 1.0, int threads = 0) {
  if (histories.empty()) throw EmptyHistorySet("no histories supplied");
  if (scale) {
    if (scale->variable < 0 || scale->variable >= params.order.d)
      throw ValidationError("scale variable out of range");
    if (scale->target == 0.0)
      throw ScaleDegenerate("scale target must be nonzero");
  }
  const int n = static_cast<int>(histories.size());
  std::vector<GirfResult> raw(n);
  parallel_for(n, resolve_threads(threads), [&](int i) {
    const History& h = histories[i];
    double delta = fixed_delta;
    if (mode == DeltaMode::data_shock) {
      if (!h.shock_at_origin)
        throw ValidationError("data_shock mode requires histories with recovered shocks");
      delta = (*h.shock_at_origin)(shock_index);
    }
    raw[i] = girf(params, shock_index, delta, h,
                  H, R1, derive_seed(seed, detail::history_stream(h, i)));
    if (!h.origin_index) raw[i].history_id = i;
  });

  GirfCollection out;
  for (int i = 0; i < n; ++i) {
    GirfResult& g = raw[i];
    if (scale) {
      const double instant = g.variable_paths(0, scale->variable);
      if (std::abs(instant) < 1e-10) {
        out.excluded.push_back(g.history_id.value_or(i));
        continue;
      }
      const double factor = scale->target / instant;
      g.scale_factor = factor;
      g.variable_paths *= factor;
      g.weight_paths *= factor;
      g.variable_variances *= factor * factor;
      g.weight_variances *= factor * factor;
    }
    out.results.push_back(std::move(g));
  }
  if (out.results.empty())
    throw ScaleDegenerate("every history was excluded by degenerate scaling");
  return out;
}

// GFEVD: per history, GIRFs for all d shocks; the contribution of shock j to
// variable i at horizon h is the cumulative squared GIRF share, averaged over
// histories. Transition-weight rows are defined for h >= 1 only and carry
// NaN at impact.
struct GfevdResult {
  // contributions[s] is (H+1) x d: series s (0..d-1 variables, then M
  // transition weights), columns are shocks.
  std::vector<MatrixXd> contributions;
  int d = 0, M = 0, H = 0;
};

inline GfevdResult gfevd(const ParameterVector& params,
                         const std::vector<History>& histories, int H, int R1,
                         std::uint64_t seed, DeltaMode mode = DeltaMode::data_shock,
                         double fixed_delta = 1.0, int threads = 0) {
  if (histories.empty()) throw EmptyHistorySet("no histories supplied");
  params.validate();
  const int d = params.order.d, M = params.order.M;
  const int n = static_cast<int>(histories.size());
  const int n_series = d + M;

  // per-history contribution stacks, combined in index order afterwards
  std::vector<std::vector<MatrixXd>> per_history(n);
  parallel_for(n, resolve_threads(threads), [&](int idx) {
    const History& h = histories[idx];
    const std::uint64_t hseed = derive_seed(seed, detail::history_stream(h, idx));
    std::vector<GirfResult> per_shock(d);
    for (int j = 0; j < d; ++j) {
      double delta = fixed_delta;
      if (mode == DeltaMode::data_shock) {
        if (!h.shock_at_origin)
          throw ValidationError("data_shock mode requires histories with recovered shocks");
        delta = (*h.shock_at_origin)(j);
      }
      per_shock[j] = girf(params, j, delta, h, H, R1, derive_seed(hseed, j));
    }
    std::vector<MatrixXd> contrib(n_series, MatrixXd::Zero(H + 1, d));
    for (int s = 0; s < n_series; ++s) {
      const bool is_weight = s >= d;
      VectorXd cum = VectorXd::Zero(d);
      for (int h_idx = 0; h_idx <= H; ++h_idx) {
        for (int j = 0; j < d; ++j) {
          const double val = is_weight
              ? per_shock[j].weight_paths(h_idx, s - d)
              : per_shock[j].variable_paths(h_idx, s);
          cum(j) += val * val;
        }
        if (is_weight && h_idx == 0) {
          contrib[s].row(0).setConstant(std::numeric_limits<double>::quiet_NaN());
          cum.setZero();  // weight sums start at h = 1
          continue;
        }
        const double total = cum.sum();
        if (total <= 0.0) {
          // weight responses can be structurally zero (e.g. one regime);
          // their decomposition is simply undefined
          if (is_weight) {
            contrib[s].row(h_idx).setConstant(std::numeric_limits<double>::quiet_NaN());
            continue;
          }
          throw ZeroDenominator("all shocks produce identically zero responses");
        }
        contrib[s].row(h_idx) = cum / total;
      }
    }
    per_history[idx] = std::move(contrib);
  });

  GfevdResult out;
  out.d = d;
  out.M = M;
  out.H = H;
  out.contributions.assign(n_series, MatrixXd::Zero(H + 1, d));
  for (int idx = 0; idx < n; ++idx)
    for (int s = 0; s < n_series; ++s)
      out.contributions[s] += per_history[idx][s];
  for (int s = 0; s < n_series; ++s) out.contributions[s] /= n;
  return out;
}

}  // namespace gstvar
