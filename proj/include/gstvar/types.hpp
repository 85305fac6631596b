#pragma once
// Model objects: order, per-regime parameters, the packed parameter vector
// and observation containers. All value types, freely copyable and shareable.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gstvar/errors.hpp"

namespace gstvar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct ModelOrder {
  int d = 1;  // number of variables
  int p = 1;  // autoregressive order
  int M = 1;  // number of regimes

  void validate() const {
    if (d < 1 || p < 1 || M < 1)
      throw ValidationError("model order requires d >= 1, p >= 1, M >= 1");
  }

  int vech_size() const { return d * (d + 1) / 2; }

  // Free parameters: M(d + d^2 p + d(d+1)/2) + (M-1).
  int param_count() const { return M * (d + d * d * p + vech_size()) + (M - 1); }
};

struct RegimeParameters {
  VectorXd phi0;                 // intercept, d
  std::vector<MatrixXd> ar_mats; // A_1..A_p, each d x d
  MatrixXd omega;                // error covariance, d x d SPD
};

// Column-major half-vectorization (lower triangle including the diagonal).
inline VectorXd vech(const MatrixXd& a) {
  const int d = static_cast<int>(a.rows());
  VectorXd out(d * (d + 1) / 2);
  int k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) out(k++) = a(i, j);
  return out;
}

inline MatrixXd unvech(const VectorXd& v, int d) {
  if (v.size() != d * (d + 1) / 2)
    throw DimensionMismatch("vech vector has wrong length");
  MatrixXd a(d, d);
  int k = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) {
      a(i, j) = v(k);
      a(j, i) = v(k);
      ++k;
    }
  return a;
}

// Full parameter vector theta. Packed layout, in order:
//   phi_{1,0},...,phi_{M,0} | per regime m: vec(A_{m,1}),...,vec(A_{m,p}) |
//   vech(Omega_1),...,vech(Omega_M) | alpha_1,...,alpha_{M-1}
// vec is column-major; alpha_M = 1 - sum of the rest.
struct ParameterVector {
  ModelOrder order;
  std::vector<RegimeParameters> regimes;
  VectorXd alphas;  // all M entries, strictly positive, summing to one

  void validate() const {
    order.validate();
    if (static_cast<int>(regimes.size()) != order.M)
      throw ValidationError("regime count does not match order.M");
    if (alphas.size() != order.M)
      throw ValidationError("alpha count does not match order.M");
    if ((alphas.array() <= 0.0).any())
      throw ValidationError("transition weight parameters must be strictly positive");
    if (std::abs(alphas.sum() - 1.0) > 1e-12)
      throw ValidationError("transition weight parameters must sum to one");
    for (const auto& reg : regimes) {
      if (reg.phi0.size() != order.d)
        throw ValidationError("intercept has wrong dimension");
      if (static_cast<int>(reg.ar_mats.size()) != order.p)
        throw ValidationError("regime must have exactly p AR matrices");
      for (const auto& a : reg.ar_mats)
        if (a.rows() != order.d || a.cols() != order.d)
          throw ValidationError("AR matrix has wrong dimension");
      if (reg.omega.rows() != order.d || reg.omega.cols() != order.d)
        throw ValidationError("covariance matrix has wrong dimension");
      if ((reg.omega - reg.omega.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ValidationError("covariance matrix is not symmetric");
      Eigen::LLT<MatrixXd> llt(reg.omega);
      if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("covariance matrix is not positive definite");
    }
  }

  VectorXd flatten() const {
    const int d = order.d, p = order.p, M = order.M, s = order.vech_size();
    VectorXd out(order.param_count());
    int k = 0;
    for (int m = 0; m < M; ++m) out.segment(k + m * d, d) = regimes[m].phi0;
    k += M * d;
    for (int m = 0; m < M; ++m)
      for (int i = 0; i < p; ++i) {
        out.segment(k, d * d) = regimes[m].ar_mats[i].reshaped();
        k += d * d;
      }
    for (int m = 0; m < M; ++m) {
      out.segment(k, s) = vech(regimes[m].omega);
      k += s;
    }
    for (int m = 0; m + 1 < M; ++m) out(k++) = alphas(m);
    return out;
  }

  static ParameterVector from_flat(const VectorXd& theta, const ModelOrder& order) {
    order.validate();
    if (theta.size() != order.param_count())
      throw DimensionMismatch("flattened parameter vector has wrong length");
    const int d = order.d, p = order.p, M = order.M, s = order.vech_size();
    ParameterVector out;
    out.order = order;
    out.regimes.resize(M);
    int k = 0;
    for (int m = 0; m < M; ++m) out.regimes[m].phi0 = theta.segment(k + m * d, d);
    k += M * d;
    for (int m = 0; m < M; ++m) {
      out.regimes[m].ar_mats.resize(p);
      for (int i = 0; i < p; ++i) {
        out.regimes[m].ar_mats[i] = theta.segment(k, d * d).reshaped(d, d);
        k += d * d;
      }
    }
    for (int m = 0; m < M; ++m) {
      out.regimes[m].omega = unvech(theta.segment(k, s), d);
      k += s;
    }
    out.alphas = VectorXd(M);
    double rest = 1.0;
    for (int m = 0; m + 1 < M; ++m) {
      out.alphas(m) = theta(k++);
      rest -= out.alphas(m);
    }
    out.alphas(M - 1) = rest;
    return out;
  }
};

// T_total x d block of observations; the first p rows of any estimation input
// act as initial values only.
struct SeriesMatrix {
  MatrixXd values;
  std::vector<std::string> timestamps;  // optional labels, empty or T_total

  void validate() const {
    if (!values.allFinite())
      throw ValidationError("series contains non-finite entries");
    if (!timestamps.empty() &&
        static_cast<int>(timestamps.size()) != values.rows())
      throw ValidationError("timestamp count does not match row count");
  }
};

// Row t holds (alpha_{1,t}, ..., alpha_{M,t}).
struct TransitionWeightSeries {
  MatrixXd weights;
};

}  // namespace gstvar
