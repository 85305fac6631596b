#pragma once
// Bijection between the constrained parameter space and an open Euclidean
// box, plus the identification permutation and the stability repair used by
// the optimizers.
//
// Unconstrained layout mirrors the packed theta layout: intercepts and AR
// entries pass through, each Omega_m is stored as its lower Cholesky factor
// with logged diagonal (vech order), and the transition weight parameters map
// to additive-log-ratio coordinates z_m = log(alpha_m / alpha_M).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "gstvar/errors.hpp"
#include "gstvar/stationarity.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

inline VectorXd to_unconstrained(const ParameterVector& params) {
  params.validate();
  const int d = params.order.d, p = params.order.p, M = params.order.M;
  const int s = params.order.vech_size();
  VectorXd out(params.order.param_count());
  int k = 0;
  for (int m = 0; m < M; ++m) out.segment(k + m * d, d) = params.regimes[m].phi0;
  k += M * d;
  for (int m = 0; m < M; ++m)
    for (int i = 0; i < p; ++i) {
      out.segment(k, d * d) = params.regimes[m].ar_mats[i].reshaped();
      k += d * d;
    }
  for (int m = 0; m < M; ++m) {
    Eigen::LLT<MatrixXd> llt(params.regimes[m].omega);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("covariance matrix is not positive definite");
    const MatrixXd L = llt.matrixL();
    for (int j = 0; j < d; ++j) {
      out(k++) = std::log(L(j, j));
      for (int i = j + 1; i < d; ++i) out(k++) = L(i, j);
    }
  }
  for (int m = 0; m + 1 < M; ++m)
    out(k++) = std::log(params.alphas(m) / params.alphas(M - 1));
  return out;
}

inline ParameterVector from_unconstrained(const VectorXd& z,
                                          const ModelOrder& order) {
  order.validate();
  if (z.size() != order.param_count())
    throw DimensionMismatch("unconstrained vector has wrong length");
  const int d = order.d, p = order.p, M = order.M;
  ParameterVector out;
  out.order = order;
  out.regimes.resize(M);
  int k = 0;
  for (int m = 0; m < M; ++m) out.regimes[m].phi0 = z.segment(k + m * d, d);
  k += M * d;
  for (int m = 0; m < M; ++m) {
    out.regimes[m].ar_mats.resize(p);
    for (int i = 0; i < p; ++i) {
      out.regimes[m].ar_mats[i] = z.segment(k, d * d).reshaped(d, d);
      k += d * d;
    }
  }
  for (int m = 0; m < M; ++m) {
    MatrixXd L = MatrixXd::Zero(d, d);
    for (int j = 0; j < d; ++j) {
      L(j, j) = std::exp(z(k++));
      for (int i = j + 1; i < d; ++i) L(i, j) = z(k++);
    }
    out.regimes[m].omega = L * L.transpose();
    out.regimes[m].omega = 0.5 * (out.regimes[m].omega + out.regimes[m].omega.transpose());
  }
  out.alphas = VectorXd(M);
  if (M == 1) {
    out.alphas(0) = 1.0;
  } else {
    VectorXd logits(M);
    for (int m = 0; m + 1 < M; ++m) logits(m) = z(k++);
    logits(M - 1) = 0.0;
    const double mx = logits.maxCoeff();
    VectorXd w = (logits.array() - mx).exp();
    out.alphas = w / w.sum();
  }
  return out;
}

// Permutes regime blocks jointly with the weight parameters so that
// alpha_1 > ... > alpha_M. The log-likelihood is invariant under this
// relabeling; the ordering pins a unique representative.
inline ParameterVector identify(const ParameterVector& params) {
  params.validate();
  const int M = params.order.M;
  for (int a = 0; a < M; ++a)
    for (int b = a + 1; b < M; ++b)
      if (std::abs(params.alphas(a) - params.alphas(b)) <= 1e-12)
        throw TiedAlphas("transition weight parameters coincide; point is unidentified");
  std::vector<int> perm(M);
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) {
    return params.alphas(a) > params.alphas(b);
  });
  ParameterVector out;
  out.order = params.order;
  out.regimes.resize(M);
  out.alphas = VectorXd(M);
  for (int m = 0; m < M; ++m) {
    out.regimes[m] = params.regimes[perm[m]];
    out.alphas(m) = params.alphas(perm[m]);
  }
  return out;
}

// Shrinks the AR matrices of any regime whose companion spectral radius
// reaches 1 - margin, rescaling toward zero until the necessary condition
// holds strictly. Returns true when anything was modified.
inline bool repair_stationarity(ParameterVector& params, double margin) {
  const double limit = 1.0 - margin;
  bool modified = false;
  for (auto& regime : params.regimes) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double radius =
          spectral_radius(companion_matrix(regime, params.order.p));
      if (radius < limit) break;
      const double scale = 0.98 * limit / radius;
      for (auto& a : regime.ar_mats) a *= scale;
      modified = true;
    }
  }
  return modified;
}

}  // namespace gstvar
