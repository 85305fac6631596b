#pragma once
// Two-phase maximum likelihood: a genetic algorithm proposes starting values,
// a quasi-Newton (BFGS) ascent with central-difference gradients refines
// them, and the best surviving local solution is selected across rounds.
// Estimation constrains only the cheap necessary stability condition; the
// joint-spectral-radius certificate is produced post hoc for the winner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "gstvar/errors.hpp"
#include "gstvar/model.hpp"
#include "gstvar/rng.hpp"
#include "gstvar/stationarity.hpp"
#include "gstvar/threading.hpp"
#include "gstvar/transform.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

struct EstimationConfig {
  int rounds = 16;
  int ga_generations = 50;
  int ga_population = 0;             // 0: twice the parameter count, capped at 400
  double mutation_rate = 0.10;       // per-coordinate mutation probability
  double stationarity_margin = 0.02;
  double min_regime_obs_fraction = 0.01;
  double gradient_step = 6e-6;       // relative central-difference step
  int max_refine_iterations = 400;
  std::uint64_t seed = 0;
  int threads = 0;                   // 0: GSTVAR_THREADS env or hardware
  double jsr_tolerance = 1e-2;
  long jsr_max_products = 1000000;

  void validate(const ModelOrder& order) const {
    if (rounds < 1 || ga_generations < 1 || max_refine_iterations < 0)
      throw ValidationError("estimation counts must be positive");
    if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
      throw ValidationError("mutation rate must lie in [0, 1]");
    if (!(stationarity_margin >= 0.0 && stationarity_margin < 1.0))
      throw ValidationError("stationarity margin must lie in [0, 1)");
    if (!(min_regime_obs_fraction >= 0.0) ||
        min_regime_obs_fraction * order.M >= 1.0)
      throw ValidationError("min_regime_obs_fraction * M must be below one");
    if (!(gradient_step > 0.0)) throw ValidationError("gradient step must be positive");
  }

  int population_size(const ModelOrder& order) const {
    if (ga_population > 0) return ga_population;
    return std::min(400, std::max(12, 2 * order.param_count()));
  }
};

struct RoundSummary {
  double loglik = -std::numeric_limits<double>::infinity();
  std::string status;
};

struct FittedModel {
  ParameterVector params;  // identified (alpha_1 > ... > alpha_M)
  double loglik = 0.0;
  int data_T = 0;          // effective sample size (rows minus p)
  std::optional<JsrCertificate> jsr;
  std::vector<RoundSummary> rounds_summary;
  std::optional<MatrixXd> hessian;
};

// ---------------------------------------------------------------------------
// Numerical optimization harness
// ---------------------------------------------------------------------------

// Central-difference gradient with per-coordinate relative step.
inline VectorXd central_gradient(const std::function<double(const VectorXd&)>& f,
                                 const VectorXd& x, double rel_step) {
  const int n = static_cast<int>(x.size());
  VectorXd g(n), probe = x;
  for (int i = 0; i < n; ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + h;
    const double fp = f(probe);
    probe(i) = x(i) - h;
    const double fm = f(probe);
    probe(i) = x(i);
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g(i) = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g(i) = (fp - f(x)) / h;
    } else if (std::isfinite(fm)) {
      g(i) = (f(x) - fm) / h;
    } else {
      g(i) = 0.0;
    }
  }
  return g;
}

struct BfgsOptions {
  double gradient_step = 6e-6;
  double grad_tol = 1e-4;          // sup-norm stopping rule
  double rel_improve_tol = 1e-10;
  int max_iterations = 400;
  // Optional projection applied to accepted iterates; returns true when the
  // point was modified (used for the stationarity-margin repair).
  std::function<bool(VectorXd&)> project;
};

struct BfgsResult {
  VectorXd x;
  double f = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool gradient_converged = false;
  bool improvement_converged = false;
  bool projected_final = false;
};

// Maximizes f by BFGS with backtracking line search. f may return -inf
// outside its domain; such trial points are rejected by the line search.
inline BfgsResult bfgs_maximize(const std::function<double(const VectorXd&)>& f,
                                VectorXd x0, const BfgsOptions& opts) {
  const int n = static_cast<int>(x0.size());
  BfgsResult res;
  if (opts.project) opts.project(x0);
  res.x = x0;
  res.f = f(x0);
  if (!std::isfinite(res.f))
    throw NumericalFailure("objective is not finite at the starting point");

  MatrixXd Hinv = MatrixXd::Identity(n, n);
  VectorXd g = central_gradient(f, res.x, opts.gradient_step);

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (g.cwiseAbs().maxCoeff() < opts.grad_tol) {
      res.gradient_converged = true;
      break;
    }
    res.iterations = it + 1;

    VectorXd dir = Hinv * g;
    double slope = g.dot(dir);
    if (!(slope > 0.0) || !dir.allFinite()) {   // fall back to steepest ascent
      Hinv.setIdentity();
      dir = g;
      slope = g.squaredNorm();
    }

    double step = 1.0;
    bool accepted = false, projected = false;
    VectorXd x_new;
    double f_new = res.f;
    while (step > 1e-14) {
      x_new = res.x + step * dir;
      bool proj = false;
      if (opts.project) proj = opts.project(x_new);
      const double ft = f(x_new);
      const bool armijo = std::isfinite(ft) && ft >= res.f + 1e-4 * step * slope;
      const bool improves = std::isfinite(ft) && ft > res.f;
      if (armijo || (proj && improves)) {
        accepted = true;
        projected = proj;
        f_new = ft;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no ascent direction left at this scale

    const VectorXd g_new = central_gradient(f, x_new, opts.gradient_step);
    const VectorXd s = x_new - res.x;
    const VectorXd y = g_new - g;  // gradient change (ascent convention)
    const double sy = -s.dot(y);   // curvature of -f
    if (sy > 1e-12 * s.norm() * y.norm()) {
      // BFGS update of the inverse Hessian of -f (gradients of -f are -g)
      const double rho = 1.0 / sy;
      const MatrixXd I = MatrixXd::Identity(n, n);
      const MatrixXd V = I - rho * s * (-y).transpose();
      Hinv = V * Hinv * V.transpose() + rho * s * s.transpose();
    }

    const double improvement = f_new - res.f;
    res.x = x_new;
    res.f = f_new;
    res.projected_final = projected;
    g = g_new;
    if (improvement < opts.rel_improve_tol * (1.0 + std::abs(res.f))) {
      res.improvement_converged = true;
      break;
    }
  }
  if (!res.gradient_converged)
    res.gradient_converged = g.cwiseAbs().maxCoeff() < opts.grad_tol;
  return res;
}

// ---------------------------------------------------------------------------
// Phase 1: genetic algorithm
// ---------------------------------------------------------------------------

namespace detail {

struct LinearVarFit {
  VectorXd phi0;
  std::vector<MatrixXd> ar;
  MatrixXd sigma;  // 1/T-scaled residual covariance
};

// Ordinary least squares VAR(p) with intercept, regressors most-recent-first.
inline LinearVarFit least_squares_var(const MatrixXd& values, int p) {
  const int d = static_cast<int>(values.cols());
  const int T = static_cast<int>(values.rows()) - p;
  if (T < d * p + 2) throw ValidationError("too few rows for a least-squares VAR fit");
  MatrixXd X(T, 1 + d * p), Y(T, d);
  for (int t = 0; t < T; ++t) {
    X(t, 0) = 1.0;
    for (int i = 0; i < p; ++i)
      X.block(t, 1 + i * d, 1, d) = values.row(p + t - 1 - i);
    Y.row(t) = values.row(p + t);
  }
  const MatrixXd B = X.colPivHouseholderQr().solve(Y);  // (1+dp) x d
  LinearVarFit fit;
  fit.phi0 = B.row(0);
  fit.ar.resize(p);
  for (int i = 0; i < p; ++i)
    fit.ar[i] = B.block(1 + i * d, 0, d, d).transpose();
  const MatrixXd resid = Y - X * B;
  fit.sigma = resid.transpose() * resid / static_cast<double>(T);
  fit.sigma = 0.5 * (fit.sigma + fit.sigma.transpose());
  return fit;
}

inline VectorXd random_decreasing_alphas(int M, Rng& rng) {
  VectorXd a(M);
  for (int m = 0; m < M; ++m) a(m) = -std::log(rng.uniform());
  a = (a.array().max(1e-3)).matrix();
  a /= a.sum();
  std::sort(a.data(), a.data() + M, std::greater<double>());
  // keep entries distinct so identification never ties exactly
  for (int m = 1; m < M; ++m)
    if (a(m - 1) - a(m) < 1e-6) a(m) = std::max(1e-4, a(m) - 1e-4 * (M - m));
  a /= a.sum();
  return a;
}

inline MatrixXd jittered_spd(const MatrixXd& base, double scale, Rng& rng, int d) {
  MatrixXd noise(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) noise(i, j) = rng.normal();
  MatrixXd omega = scale * base + 0.05 * scale * (noise * noise.transpose()) / d;
  omega = 0.5 * (omega + omega.transpose());
  omega += 1e-8 * MatrixXd::Identity(d, d);
  return omega;
}

// Heuristic initial individuals: one exact least-squares clone, regime means
// anchored at random observations, and small random AR draws. Everything is
// repaired to the stationarity margin before evaluation.
inline ParameterVector random_individual(const MatrixXd& values,
                                         const ModelOrder& order,
                                         const LinearVarFit& ls,
                                         const MatrixXd& sample_cov,
                                         double margin, int flavor, Rng& rng) {
  const int d = order.d, p = order.p, M = order.M;
  ParameterVector ind;
  ind.order = order;
  ind.regimes.resize(M);
  ind.alphas = random_decreasing_alphas(M, rng);

  for (int m = 0; m < M; ++m) {
    auto& reg = ind.regimes[m];
    reg.ar_mats.resize(p);
    if (flavor == 0) {
      // perturbed least-squares clone
      for (int i = 0; i < p; ++i) {
        reg.ar_mats[i] = ls.ar[i];
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            reg.ar_mats[i](r, c) += 0.05 * rng.normal();
      }
      reg.phi0 = ls.phi0;
      for (int r = 0; r < d; ++r)
        reg.phi0(r) += 0.1 * std::sqrt(std::max(sample_cov(r, r), 1e-12)) * rng.normal();
      reg.omega = jittered_spd(ls.sigma, 0.5 + rng.uniform(), rng, d);
    } else {
      // regime mean anchored at a random observation
      const int row = rng.below(static_cast<int>(values.rows()));
      VectorXd target = values.row(row);
      const double ar_scale = (flavor == 1) ? 0.4 : 0.15;
      MatrixXd total = MatrixXd::Zero(d, d);
      for (int i = 0; i < p; ++i) {
        reg.ar_mats[i].resize(d, d);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            reg.ar_mats[i](r, c) = ar_scale / std::sqrt(static_cast<double>(d * p)) * rng.normal();
        if (i == 0)
          for (int r = 0; r < d; ++r) reg.ar_mats[i](r, r) += 0.3 * rng.uniform();
        total += reg.ar_mats[i];
      }
      reg.phi0 = (MatrixXd::Identity(d, d) - total) * target;
      reg.omega = jittered_spd(sample_cov, 0.3 + rng.uniform(), rng, d);
    }
  }
  repair_stationarity(ind, margin);
  return ind;
}

struct Individual {
  ParameterVector params;
  double fitness = -std::numeric_limits<double>::infinity();
};

inline double safe_loglik(const ParameterVector& params, const SeriesMatrix& data) {
  try {
    const double value = log_likelihood(params, data);
    return std::isfinite(value) ? value
                                : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

// Genetic search for a starting value: tournament selection, regime-block
// crossover (whole regimes are exchanged), Gaussian mutation in unconstrained
// coordinates and elitism of two. Deterministic for a fixed round seed.
inline ParameterVector ga_search(const SeriesMatrix& data, const ModelOrder& order,
                                 const EstimationConfig& config,
                                 std::uint64_t round_seed,
                                 std::span<const ParameterVector> seeds = {},
                                 std::vector<double>* best_trace = nullptr) {
  order.validate();
  data.validate();
  config.validate(order);
  const int d = order.d, p = order.p, M = order.M;
  if (data.values.cols() != d) throw DimensionMismatch("data does not match model dimension");

  Rng rng(round_seed);
  const int pop_size = config.population_size(order);
  const double margin = config.stationarity_margin;

  const MatrixXd& values = data.values;
  MatrixXd centered = values.rowwise() - values.colwise().mean();
  MatrixXd sample_cov = centered.transpose() * centered / static_cast<double>(values.rows());
  sample_cov = 0.5 * (sample_cov + sample_cov.transpose());

  detail::LinearVarFit ls;
  try {
    ls = detail::least_squares_var(values, p);
  } catch (const Error&) {
    ls.phi0 = values.colwise().mean();
    ls.ar.assign(p, MatrixXd::Zero(d, d));
    ls.sigma = sample_cov + 1e-6 * MatrixXd::Identity(d, d);
  }

  std::vector<detail::Individual> pop(pop_size);
  int slot = 0;
  for (const auto& seed_params : seeds) {
    if (slot >= pop_size) break;
    ParameterVector s = seed_params;
    repair_stationarity(s, margin);
    pop[slot++].params = std::move(s);
  }
  if (slot < pop_size) {
    // exact least-squares clone as a baseline individual
    ParameterVector base;
    base.order = order;
    base.regimes.resize(M);
    for (int m = 0; m < M; ++m) {
      base.regimes[m].phi0 = ls.phi0;
      base.regimes[m].ar_mats = ls.ar;
      base.regimes[m].omega = ls.sigma + 1e-8 * MatrixXd::Identity(d, d);
    }
    base.alphas = VectorXd(M);
    for (int m = 0; m < M; ++m) base.alphas(m) = static_cast<double>(M - m);
    base.alphas /= base.alphas.sum();
    repair_stationarity(base, margin);
    pop[slot++].params = std::move(base);
  }
  for (; slot < pop_size; ++slot) {
    const int flavor = 1 + slot % 2;
    pop[slot].params = detail::random_individual(values, order, ls, sample_cov,
                                                 margin, slot % 3 == 0 ? 0 : flavor, rng);
  }
  for (auto& ind : pop) ind.fitness = detail::safe_loglik(ind.params, data);

  const int n_unc = order.param_count();
  VectorXd sigma_mut(n_unc);
  std::vector<VectorXd> zs(pop_size);

  auto tournament = [&]() -> const detail::Individual& {
    const detail::Individual* best = &pop[rng.below(pop_size)];
    for (int k = 1; k < 3; ++k) {
      const detail::Individual* cand = &pop[rng.below(pop_size)];
      if (cand->fitness > best->fitness) best = cand;
    }
    return *best;
  };

  for (int gen = 0; gen < config.ga_generations; ++gen) {
    std::sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
      return a.fitness > b.fitness;
    });
    if (best_trace) best_trace->push_back(pop.front().fitness);

    // population-scaled mutation steps in unconstrained coordinates
    int n_ok = 0;
    VectorXd mean = VectorXd::Zero(n_unc), sq = VectorXd::Zero(n_unc);
    for (int i = 0; i < pop_size; ++i) {
      if (!std::isfinite(pop[i].fitness)) continue;
      try {
        zs[i] = to_unconstrained(pop[i].params);
      } catch (const Error&) {
        continue;
      }
      mean += zs[i];
      sq += zs[i].cwiseAbs2();
      ++n_ok;
    }
    if (n_ok > 0) {
      mean /= n_ok;
      sigma_mut = (sq / n_ok - mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt() * 0.35;
      sigma_mut = sigma_mut.cwiseMax(1e-3);
    } else {
      sigma_mut.setConstant(0.1);
    }

    std::vector<detail::Individual> next(pop_size);
    next[0] = pop[0];  // elitism of two
    next[1] = pop[std::min(1, pop_size - 1)];
    for (int i = 2; i < pop_size; ++i) {
      const detail::Individual& p1 = tournament();
      const detail::Individual& p2 = tournament();
      ParameterVector child;
      child.order = order;
      child.regimes.resize(M);
      child.alphas = VectorXd(M);
      if (rng.uniform() < 0.9) {
        for (int m = 0; m < M; ++m) {
          const detail::Individual& src = (rng.uniform() < 0.5) ? p1 : p2;
          child.regimes[m] = src.params.regimes[m];
          child.alphas(m) = src.params.alphas(m);
        }
        child.alphas = child.alphas.cwiseMax(1e-4);
        child.alphas /= child.alphas.sum();
      } else {
        child = p1.params;
      }
      // Gaussian mutation in unconstrained coordinates
      try {
        VectorXd z = to_unconstrained(child);
        bool mutated = false;
        for (int c = 0; c < n_unc; ++c) {
          if (rng.uniform() < config.mutation_rate) {
            z(c) += sigma_mut(c) * rng.normal();
            mutated = true;
          }
        }
        if (mutated) child = from_unconstrained(z, order);
      } catch (const Error&) {
        // keep the unmutated child
      }
      repair_stationarity(child, margin);
      next[i].params = std::move(child);
      next[i].fitness = detail::safe_loglik(next[i].params, data);
    }
    pop = std::move(next);
  }

  std::sort(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
    return a.fitness > b.fitness;
  });
  if (best_trace) best_trace->push_back(pop.front().fitness);
  if (!std::isfinite(pop.front().fitness))
    throw NoFeasibleIndividual("entire final population failed evaluation");
  return pop.front().params;
}

// ---------------------------------------------------------------------------
// Phase 2: quasi-Newton refinement
// ---------------------------------------------------------------------------

enum class RefineStatus { converged, max_iter, boundary };

inline const char* to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::converged: return "converged";
    case RefineStatus::max_iter: return "max_iter";
    case RefineStatus::boundary: return "boundary";
  }
  return "unknown";
}

struct RefineResult {
  ParameterVector params;
  double loglik = -std::numeric_limits<double>::infinity();
  RefineStatus status = RefineStatus::max_iter;
};

inline RefineResult refine(const ParameterVector& start, const SeriesMatrix& data,
                           const EstimationConfig& config) {
  config.validate(start.order);
  const ModelOrder order = start.order;
  const double margin = config.stationarity_margin;

  ParameterVector start_repaired = start;
  repair_stationarity(start_repaired, margin);
  if (!std::isfinite(detail::safe_loglik(start_repaired, data)))
    throw NumericalFailure("log-likelihood is not finite at the refinement start");

  auto objective = [&](const VectorXd& z) -> double {
    try {
      return log_likelihood(from_unconstrained(z, order), data);
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  auto project = [&](VectorXd& z) -> bool {
    ParameterVector candidate = from_unconstrained(z, order);
    if (repair_stationarity(candidate, margin)) {
      z = to_unconstrained(candidate);
      return true;
    }
    return false;
  };

  BfgsOptions opts;
  opts.gradient_step = config.gradient_step;
  opts.grad_tol = 1e-4;
  opts.rel_improve_tol = 1e-10;
  opts.max_iterations = config.max_refine_iterations;
  opts.project = project;

  const BfgsResult res = bfgs_maximize(objective, to_unconstrained(start_repaired), opts);

  RefineResult out;
  out.params = from_unconstrained(res.x, order);
  out.loglik = res.f;
  if (res.projected_final)
    out.status = RefineStatus::boundary;
  else if (res.gradient_converged || res.improvement_converged)
    out.status = RefineStatus::converged;
  else
    out.status = RefineStatus::max_iter;
  return out;
}

// Central second differences of the log-likelihood on the packed (original)
// parameterization, symmetrized.
inline MatrixXd loglik_hessian_of(const ParameterVector& params,
                                  const SeriesMatrix& data,
                                  double rel_step = 1e-3) {
  const ModelOrder order = params.order;
  const VectorXd theta = params.flatten();
  const int n = static_cast<int>(theta.size());
  auto f = [&](const VectorXd& v) -> double {
    return log_likelihood(ParameterVector::from_flat(v, order), data);
  };
  VectorXd h(n);
  for (int i = 0; i < n; ++i) h(i) = rel_step * std::max(1.0, std::abs(theta(i)));
  MatrixXd H(n, n);
  try {
    const double f0 = f(theta);
    VectorXd probe = theta;
    for (int i = 0; i < n; ++i) {
      probe(i) = theta(i) + h(i);
      const double fp = f(probe);
      probe(i) = theta(i) - h(i);
      const double fm = f(probe);
      probe(i) = theta(i);
      H(i, i) = (fp - 2.0 * f0 + fm) / (h(i) * h(i));
      for (int j = i + 1; j < n; ++j) {
        probe(i) = theta(i) + h(i); probe(j) = theta(j) + h(j);
        const double fpp = f(probe);
        probe(j) = theta(j) - h(j);
        const double fpm = f(probe);
        probe(i) = theta(i) - h(i); probe(j) = theta(j) + h(j);
        const double fmp = f(probe);
        probe(j) = theta(j) - h(j);
        const double fmm = f(probe);
        probe(i) = theta(i); probe(j) = theta(j);
        H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
      }
    }
  } catch (const Error& e) {
    throw NumericalFailure(std::string("hessian evaluation failed: ") + e.what());
  }
  return 0.5 * (H + H.transpose());
}

// ---------------------------------------------------------------------------
// Multi-round orchestration
// ---------------------------------------------------------------------------

inline FittedModel fit(const SeriesMatrix& data, const ModelOrder& order,
                       const EstimationConfig& config, bool want_hessian = false,
                       std::span<const ParameterVector> ga_seeds = {},
                       std::ostream* progress = nullptr) {
  order.validate();
  data.validate();
  config.validate(order);
  if (data.values.cols() != order.d)
    throw DimensionMismatch("data does not match model dimension");
  const int total = static_cast<int>(data.values.rows());
  if (total < order.p + 1) throw ValidationError("too few rows");
  const int T = total - order.p;

  std::ostream& log = progress ? *progress : std::cerr;
  const int recommended = order.p + 10 * order.param_count() / order.d;
  if (total < recommended)
    log << "warning: " << total << " rows is short for "
        << order.param_count() << " parameters (recommended >= "
        << recommended << ")\n";

  struct RoundOutcome {
    std::optional<ParameterVector> params;
    double loglik = -std::numeric_limits<double>::infinity();
    std::string status;
  };
  std::vector<RoundOutcome> outcomes(config.rounds);

  const int threads = resolve_threads(config.threads);
  parallel_for(config.rounds, threads, [&](int r) {
    auto& out = outcomes[r];
    try {
      const std::uint64_t round_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
      const ParameterVector start = ga_search(data, order, config, round_seed, ga_seeds);
      RefineResult res = refine(start, data, config);
      out.params = std::move(res.params);
      out.loglik = res.loglik;
      out.status = to_string(res.status);
    } catch (const Error& e) {
      out.status = std::string("failed: ") + e.what();
    }
  });

  FittedModel model;
  model.data_T = T;
  bool any_round_produced = false;
  int best = -1;
  std::vector<std::optional<ParameterVector>> identified(config.rounds);
  for (int r = 0; r < config.rounds; ++r) {
    auto& out = outcomes[r];
    if (!out.params.has_value()) continue;
    any_round_produced = true;
    try {
      ParameterVector id = identify(*out.params);
      LikelihoodTrace trace;
      const double ll = log_likelihood(id, data, &trace);
      const VectorXd weight_sums = trace.weights.weights.colwise().sum();
      if ((weight_sums.array() < config.min_regime_obs_fraction * T).any()) {
        out.status += "; filtered: degenerate regime";
        continue;
      }
      out.loglik = ll;
      identified[r] = std::move(id);
      if (best < 0 || ll > outcomes[best].loglik) best = r;
    } catch (const TiedAlphas&) {
      out.status += "; filtered: tied alphas";
    } catch (const Error& e) {
      out.status += std::string("; filtered: ") + e.what();
    }
  }

  model.rounds_summary.resize(config.rounds);
  for (int r = 0; r < config.rounds; ++r) {
    model.rounds_summary[r] = {outcomes[r].loglik, outcomes[r].status};
    log << "round=" << r << " loglik=" << outcomes[r].loglik
        << " status=" << outcomes[r].status << "\n";
  }

  if (!any_round_produced)
    throw AllRoundsFailed("every estimation round failed");
  if (best < 0)
    throw NoAdequateSolution("every local optimum was filtered out");

  model.params = std::move(*identified[best]);
  model.loglik = outcomes[best].loglik;

  std::vector<MatrixXd> companions;
  companions.reserve(order.M);
  for (int m = 0; m < order.M; ++m)
    companions.push_back(companion_matrix(model.params.regimes[m], order.p));
  model.jsr = jsr_bounds(companions, config.jsr_tolerance, config.jsr_max_products);

  if (want_hessian) model.hessian = loglik_hessian_of(model.params, data, 1e-3);
  return model;
}

// ---------------------------------------------------------------------------
// Information criteria and Wald constancy tests
// ---------------------------------------------------------------------------

struct InformationCriteria {
  double aic = 0.0, bic = 0.0, hqic = 0.0;
};

inline InformationCriteria information_criteria_from(double loglik, int k, double T) {
  InformationCriteria ic;
  ic.aic = (-2.0 * loglik + 2.0 * k) / T;
  ic.bic = (-2.0 * loglik + k * std::log(T)) / T;
  ic.hqic = (-2.0 * loglik + 2.0 * k * std::log(std::log(T))) / T;
  return ic;
}

inline InformationCriteria information_criteria(const FittedModel& fit) {
  return information_criteria_from(fit.loglik, fit.params.order.param_count(),
                                   static_cast<double>(fit.data_T));
}

enum class WaldRestriction { intercepts_and_ar, ar_only };

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  WaldRestriction restriction = WaldRestriction::intercepts_and_ar;
};

// Wald test of equality across regimes of the intercepts and AR matrices
// (or AR matrices only): statistic = (R theta)' [R S R']^{-1} (R theta) with
// S the inverse of the negative log-likelihood Hessian.
inline WaldResult wald_constancy_test(const FittedModel& fit,
                                      const SeriesMatrix& data,
                                      WaldRestriction restriction) {
  const ModelOrder order = fit.params.order;
  if (order.M < 2)
    throw ValidationError("constancy test requires at least two regimes");
  const int d = order.d, p = order.p, M = order.M;
  const int n = order.param_count();

  MatrixXd H = fit.hessian.has_value() ? *fit.hessian
                                       : loglik_hessian_of(fit.params, data);
  Eigen::FullPivLU<MatrixXd> lu(-H);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw SingularHessian("negative Hessian is numerically singular");
  const MatrixXd cov = lu.solve(MatrixXd::Identity(n, n));

  const int phi_base = 0;
  const int ar_base = M * d;
  const int block_ar = d * d * p;
  const bool with_intercepts = restriction == WaldRestriction::intercepts_and_ar;
  const int rows_per_pair = (with_intercepts ? d : 0) + block_ar;
  MatrixXd R = MatrixXd::Zero((M - 1) * rows_per_pair, n);
  int row = 0;
  for (int m = 0; m + 1 < M; ++m) {
    if (with_intercepts)
      for (int c = 0; c < d; ++c) {
        R(row, phi_base + m * d + c) = 1.0;
        R(row, phi_base + (m + 1) * d + c) = -1.0;
        ++row;
      }
    for (int c = 0; c < block_ar; ++c) {
      R(row, ar_base + m * block_ar + c) = 1.0;
      R(row, ar_base + (m + 1) * block_ar + c) = -1.0;
      ++row;
    }
  }

  const VectorXd v = R * fit.params.flatten();
  const MatrixXd S = R * cov * R.transpose();
  Eigen::FullPivLU<MatrixXd> slu(S);
  if (!slu.isInvertible())
    throw SingularHessian("restricted covariance R S R' is singular");
  WaldResult out;
  out.restriction = restriction;
  out.df = static_cast<int>(R.rows());
  out.statistic = std::max(0.0, v.dot(slu.solve(v)));
  boost::math::chi_squared dist(out.df);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace gstvar
