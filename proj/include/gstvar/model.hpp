#pragma once
// Model core: regime stationary moments, transition weights, conditional
// moments, Gaussian conditional log-likelihood and simulation.
//
// Conventions used throughout:
//  - Histories are p x d matrices ordered most-recent-first, so row 0 is
//    y_{t-1} and row p-1 is y_{t-p}. The flattened dp-vector stacks the rows.
//  - All densities go through lower Cholesky factors; no explicit inverses.

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "gstvar/errors.hpp"
#include "gstvar/rng.hpp"
#include "gstvar/stationarity.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

// mu_m = (I - sum_i A_{m,i})^{-1} phi_{m,0}
inline VectorXd regime_unconditional_mean(const RegimeParameters& regime) {
  const int d = static_cast<int>(regime.phi0.size());
  MatrixXd lhs = MatrixXd::Identity(d, d);
  for (const auto& a : regime.ar_mats) lhs -= a;
  Eigen::FullPivLU<MatrixXd> lu(lhs);
  // rcond gate: a near-unit-root regime has no usable unconditional mean
  if (!lu.isInvertible() || lu.rcond() < 1e-12)
    throw SingularMeanSystem("I - sum(A_i) is numerically singular (unit root)");
  return lu.solve(regime.phi0);
}

// Covariance of p consecutive observations under the regime's stationary
// distribution: the unique solution of S = C S C' + W with C the companion
// matrix and W the dp x dp matrix holding Omega_m in the top-left block
// (Lutkepohl 2005, eq. 2.1.39). Solved through the Kronecker linear system
// for dp <= 40 and by squared Smith iteration above that.
inline MatrixXd regime_stationary_covariance(const RegimeParameters& regime, int p) {
  const int d = static_cast<int>(regime.phi0.size());
  const int dp = d * p;
  const MatrixXd comp = companion_matrix(regime, p);
  if (spectral_radius(comp) >= 1.0 - 1e-10)
    throw NonstationaryRegime("companion spectral radius is not below one");
  MatrixXd wide = MatrixXd::Zero(dp, dp);
  wide.topLeftCorner(d, d) = regime.omega;
  MatrixXd sigma;
  if (dp <= 40) {
    const MatrixXd kron = Eigen::kroneckerProduct(comp, comp);
    const MatrixXd lhs = MatrixXd::Identity(dp * dp, dp * dp) - kron;
    const VectorXd vec_sigma = Eigen::PartialPivLU<MatrixXd>(lhs).solve(wide.reshaped());
    sigma = vec_sigma.reshaped(dp, dp);
  } else {
    sigma = wide;
    MatrixXd power = comp;
    for (int it = 0; it < 200; ++it) {
      const MatrixXd increment = power * sigma * power.transpose();
      sigma += increment;
      if (increment.cwiseAbs().maxCoeff() < 1e-12) break;
      power = power * power;
    }
  }
  return 0.5 * (sigma + sigma.transpose());
}

// log n_k(x; mean, cov) evaluated through the Cholesky factor of cov.
inline double mvn_log_density(const VectorXd& x, const VectorXd& mean,
                              const MatrixXd& cov) {
  const int k = static_cast<int>(x.size());
  if (mean.size() != k || cov.rows() != k || cov.cols() != k)
    throw DimensionMismatch("density arguments have inconsistent dimensions");
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("covariance does not admit a Cholesky factorization");
  VectorXd z = x - mean;
  llt.matrixL().solveInPlace(z);
  const double log_det = 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * (k * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

namespace detail {

// Normalized weights from log-space terms (max-subtracted softmax).
inline VectorXd softmax_weights(const VectorXd& log_terms) {
  const double mx = log_terms.maxCoeff();
  if (!(mx > -std::numeric_limits<double>::infinity()))
    throw AllDensitiesUnderflow("every regime log-density is -inf");
  VectorXd w = (log_terms.array() - mx).exp();
  w /= w.sum();
  return w;
}

// Per-regime quantities fixed for a given parameter vector, precomputed once
// and reused across every t.
struct RegimeMoments {
  VectorXd phi0;
  MatrixXd ar_stack;       // d x dp, [A_1 ... A_p]
  MatrixXd omega;
  VectorXd mean;           // unconditional mean mu_m
  VectorXd mean_stack;     // 1_p (x) mu_m
  MatrixXd stat_chol;      // lower Cholesky of Sigma_{m,p}
  double stat_log_det = 0.0;
  double companion_radius = 0.0;
};

struct ModelCache {
  ModelOrder order;
  std::vector<RegimeMoments> regimes;
  VectorXd log_alpha;

  explicit ModelCache(const ParameterVector& params) {
    params.validate();
    order = params.order;
    const int d = order.d, p = order.p, M = order.M;
    regimes.resize(M);
    log_alpha = params.alphas.array().log();
    for (int m = 0; m < M; ++m) {
      const auto& reg = params.regimes[m];
      auto& cache = regimes[m];
      cache.phi0 = reg.phi0;
      cache.ar_stack.resize(d, d * p);
      for (int i = 0; i < p; ++i) cache.ar_stack.middleCols(i * d, d) = reg.ar_mats[i];
      cache.omega = reg.omega;
      cache.companion_radius = spectral_radius(companion_matrix(reg, p));
      if (cache.companion_radius >= 1.0 - 1e-10)
        throw NonstationaryRegime("regime violates the necessary stability condition");
      cache.mean = regime_unconditional_mean(reg);
      cache.mean_stack.resize(d * p);
      for (int i = 0; i < p; ++i) cache.mean_stack.segment(i * d, d) = cache.mean;
      const MatrixXd sigma = regime_stationary_covariance(reg, p);
      Eigen::LLT<MatrixXd> llt(sigma);
      if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("stationary covariance is not positive definite");
      cache.stat_chol = llt.matrixL();
      cache.stat_log_det = 2.0 * cache.stat_chol.diagonal().array().log().sum();
    }
  }
};

// Reusable buffers for the per-t kernel; no allocation after construction.
struct StepWorkspace {
  VectorXd hist;       // dp, most-recent-first
  VectorXd z;          // dp scratch
  VectorXd log_terms;  // M
  VectorXd weights;    // M
  VectorXd mu;         // d
  MatrixXd omega_t;    // d x d
  VectorXd resid;      // d
  Eigen::LLT<MatrixXd> llt;

  StepWorkspace(int d, int p, int M)
      : hist(d * p), z(d * p), log_terms(M), weights(M), mu(d),
        omega_t(d, d), resid(d), llt(d) {}
};

inline void weights_at(const ModelCache& cache, const VectorXd& hist,
                       StepWorkspace& ws) {
  const int dp = cache.order.d * cache.order.p;
  const double cnorm = dp * std::log(2.0 * std::numbers::pi);
  for (int m = 0; m < cache.order.M; ++m) {
    const auto& reg = cache.regimes[m];
    ws.z = hist - reg.mean_stack;
    reg.stat_chol.triangularView<Eigen::Lower>().solveInPlace(ws.z);
    ws.log_terms(m) =
        cache.log_alpha(m) - 0.5 * (cnorm + reg.stat_log_det + ws.z.squaredNorm());
  }
  ws.weights = softmax_weights(ws.log_terms);
}

// mu_{y,t} and Omega_{y,t} for given weights; writes ws.mu and ws.omega_t.
inline void moments_at(const ModelCache& cache, const VectorXd& hist,
                       const VectorXd& weights, StepWorkspace& ws) {
  ws.mu.setZero();
  ws.omega_t.setZero();
  for (int m = 0; m < cache.order.M; ++m) {
    const auto& reg = cache.regimes[m];
    ws.mu.noalias() += weights(m) * reg.phi0;
    ws.mu.noalias() += weights(m) * (reg.ar_stack * hist);
    ws.omega_t.noalias() += weights(m) * reg.omega;
  }
}

// Shift the most-recent-first stacked history one step forward.
inline void push_history(VectorXd& hist, const VectorXd& y, int d) {
  const int dp = static_cast<int>(hist.size());
  for (int i = dp - 1; i >= d; --i) hist(i) = hist(i - d);
  hist.head(d) = y;
}

inline VectorXd stack_history(const MatrixXd& history_rows) {
  const int p = static_cast<int>(history_rows.rows());
  const int d = static_cast<int>(history_rows.cols());
  VectorXd hist(d * p);
  for (int k = 0; k < p; ++k) hist.segment(k * d, d) = history_rows.row(k);
  return hist;
}

}  // namespace detail

// Transition weights alpha_{m,t} given the p most recent observations:
// softmax over log alpha_m plus the regime's stationary log-density of the
// stacked history. Evaluated in log space; well-defined whenever at least
// one regime density is representable.
inline VectorXd transition_weights(const ParameterVector& params,
                                   const MatrixXd& history) {
  if (history.rows() != params.order.p || history.cols() != params.order.d)
    throw DimensionMismatch("history must be p x d, most-recent-first");
  detail::ModelCache cache(params);
  detail::StepWorkspace ws(params.order.d, params.order.p, params.order.M);
  detail::weights_at(cache, detail::stack_history(history), ws);
  return ws.weights;
}

// Conditional mean and covariance for given weights:
// mu_{y,t} = sum_m alpha_m (phi_{m,0} + sum_i A_{m,i} y_{t-i}),
// Omega_{y,t} = sum_m alpha_m Omega_m.
inline std::pair<VectorXd, MatrixXd> conditional_moments(
    const ParameterVector& params, const MatrixXd& history,
    const VectorXd& weights) {
  if (history.rows() != params.order.p || history.cols() != params.order.d)
    throw DimensionMismatch("history must be p x d, most-recent-first");
  if (weights.size() != params.order.M)
    throw DimensionMismatch("weight vector must have M entries");
  if ((weights.array() < -1e-12).any() || std::abs(weights.sum() - 1.0) > 1e-10)
    throw ValidationError("weights must lie on the unit simplex");
  detail::ModelCache cache(params);
  detail::StepWorkspace ws(params.order.d, params.order.p, params.order.M);
  detail::moments_at(cache, detail::stack_history(history), weights, ws);
  return {ws.mu, ws.omega_t};
}

// Optional per-t byproducts of a likelihood pass, reused by diagnostics and
// shock recovery.
struct LikelihoodTrace {
  TransitionWeightSeries weights;      // T x M
  MatrixXd cond_means;                 // T x d
  std::vector<MatrixXd> cond_cholesky; // T lower factors of Omega_{y,t}
};

// Conditional log-likelihood: sum_{t=1}^T log n_d(y_t; mu_{y,t}, Omega_{y,t}),
// with the first p rows of data acting as initial values only.
inline double log_likelihood(const ParameterVector& params,
                             const SeriesMatrix& data,
                             LikelihoodTrace* trace = nullptr) {
  params.validate();
  data.validate();
  const int d = params.order.d, p = params.order.p, M = params.order.M;
  if (data.values.cols() != d)
    throw DimensionMismatch("data column count does not match model dimension");
  const int total = static_cast<int>(data.values.rows());
  if (total < p + 1)
    throw ValidationError("need at least p+1 rows for one density term");
  const int T = total - p;

  detail::ModelCache cache(params);
  detail::StepWorkspace ws(d, p, M);
  if (trace) {
    trace->weights.weights.resize(T, M);
    trace->cond_means.resize(T, d);
    trace->cond_cholesky.assign(T, MatrixXd(d, d));
  }

  for (int k = 0; k < p; ++k)
    ws.hist.segment(k * d, d) = data.values.row(p - 1 - k);

  const double cnorm = d * std::log(2.0 * std::numbers::pi);
  double loglik = 0.0;
  for (int t = 0; t < T; ++t) {
    detail::weights_at(cache, ws.hist, ws);
    detail::moments_at(cache, ws.hist, ws.weights, ws);
    ws.llt.compute(ws.omega_t);
    if (ws.llt.info() != Eigen::Success)
      throw NotPositiveDefinite("conditional covariance failed Cholesky (NaN contamination?)");
    ws.resid = data.values.row(p + t).transpose() - ws.mu;
    if (trace) {
      trace->weights.weights.row(t) = ws.weights;
      trace->cond_means.row(t) = ws.mu;
      trace->cond_cholesky[t] = ws.llt.matrixL();
    }
    ws.llt.matrixL().solveInPlace(ws.resid);
    double log_det = 0.0;
    for (int i = 0; i < d; ++i) log_det += std::log(ws.llt.matrixL()(i, i));
    loglik += -0.5 * (cnorm + ws.resid.squaredNorm()) - log_det;
    detail::push_history(ws.hist, data.values.row(p + t).transpose(), d);
  }
  return loglik;
}

// Initial state for simulation: either explicit p x d rows (most-recent-first
// like a history) or a regime index whose stationary distribution seeds the
// first p observations.
using SimInit = std::variant<MatrixXd, int>;

struct SimulationResult {
  SeriesMatrix series;    // p + T rows in time order
  MatrixXd innovations;   // T x d standard-normal draws used
};

inline SimulationResult simulate_with_innovations(const ParameterVector& params,
                                                  int T, const SimInit& init,
                                                  std::uint64_t seed) {
  params.validate();
  if (T < 1) throw ValidationError("simulation length must be positive");
  const int d = params.order.d, p = params.order.p;
  detail::ModelCache cache(params);
  detail::StepWorkspace ws(d, p, params.order.M);
  Rng rng(seed);

  MatrixXd out(p + T, d);
  if (std::holds_alternative<int>(init)) {
    const int m = std::get<int>(init);
    if (m < 0 || m >= params.order.M) throw ValidationError("regime index out of range");
    // Most-recent-first stationary draw; segment k is the observation k steps back.
    const VectorXd z = rng.normal_vector(d * p);
    const VectorXd draw = cache.regimes[m].mean_stack +
                          cache.regimes[m].stat_chol.triangularView<Eigen::Lower>() * z;
    for (int k = 0; k < p; ++k) out.row(p - 1 - k) = draw.segment(k * d, d);
  } else {
    const MatrixXd& rows = std::get<MatrixXd>(init);
    if (rows.rows() != p || rows.cols() != d)
      throw DimensionMismatch("initial block must be p x d");
    if (!rows.allFinite()) throw ValidationError("initial block has non-finite entries");
    for (int k = 0; k < p; ++k) out.row(p - 1 - k) = rows.row(k);
  }

  for (int k = 0; k < p; ++k) ws.hist.segment(k * d, d) = out.row(p - 1 - k);

  MatrixXd innovations(T, d);
  VectorXd eps(d), y(d);
  for (int t = 0; t < T; ++t) {
    detail::weights_at(cache, ws.hist, ws);
    detail::moments_at(cache, ws.hist, ws.weights, ws);
    ws.llt.compute(ws.omega_t);
    if (ws.llt.info() != Eigen::Success)
      throw NotPositiveDefinite("conditional covariance failed Cholesky during simulation");
    for (int i = 0; i < d; ++i) eps(i) = rng.normal();
    innovations.row(t) = eps;
    y = ws.mu + ws.llt.matrixL() * eps;
    out.row(p + t) = y;
    detail::push_history(ws.hist, y, d);
  }

  SimulationResult result;
  result.series.values = std::move(out);
  result.innovations = std::move(innovations);
  return result;
}

// Data-generating process with Gaussian errors: y_t = mu_{y,t} + L_t eps_t.
// Identical seed and inputs give bit-identical output.
inline SeriesMatrix simulate(const ParameterVector& params, int T,
                             const SimInit& init, std::uint64_t seed) {
  return simulate_with_innovations(params, T, init, seed).series;
}

}  // namespace gstvar
