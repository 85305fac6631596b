#pragma once
// Stability machinery: companion matrices, spectral radii, the per-regime
// necessary condition and certified joint-spectral-radius bounds via the
// branch-and-bound method of Gripenberg (1996).

#include <cmath>
#include <cstdint>
#include <queue>
#include <vector>

#include <Eigen/Dense>

#include "gstvar/errors.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

// Companion form of one regime: A_1..A_p across the top d rows, shifted
// identity blocks below.
inline MatrixXd companion_matrix(const RegimeParameters& regime, int p) {
  if (static_cast<int>(regime.ar_mats.size()) != p)
    throw DimensionMismatch("regime does not have exactly p AR matrices");
  const int d = static_cast<int>(regime.phi0.size());
  MatrixXd comp = MatrixXd::Zero(d * p, d * p);
  for (int i = 0; i < p; ++i) comp.block(0, i * d, d, d) = regime.ar_mats[i];
  for (int i = 1; i < p; ++i)
    comp.block(i * d, (i - 1) * d, d, d).setIdentity();
  return comp;
}

// Largest eigenvalue modulus of a general square matrix.
inline double spectral_radius(const MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols())
    throw DimensionMismatch("spectral radius requires a square matrix");
  if (!matrix.allFinite())
    throw ValidationError("spectral radius requires a finite matrix");
  if (matrix.rows() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> solver(matrix, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw EigenFailure("eigenvalue iteration did not converge");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

struct NecessaryCheck {
  bool ok = false;
  VectorXd radii;  // per-regime companion spectral radii
};

// Necessary stability condition: every regime's companion spectral radius is
// below 1 - margin.
inline NecessaryCheck check_necessary(const ParameterVector& params,
                                      double margin = 0.0) {
  params.validate();
  NecessaryCheck out;
  out.radii.resize(params.order.M);
  out.ok = true;
  for (int m = 0; m < params.order.M; ++m) {
    out.radii(m) = spectral_radius(companion_matrix(params.regimes[m], params.order.p));
    if (!(out.radii(m) < 1.0 - margin)) out.ok = false;
  }
  return out;
}

struct JsrCertificate {
  double lower = 0.0;
  double upper = 0.0;
  double tolerance_requested = 0.0;
  long iterations = 0;          // branch expansions performed
  long products_explored = 0;   // matrix products formed
  bool converged = false;
};

namespace detail {

inline double spectral_norm(const MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a.transpose() * a,
                                             Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

struct JsrNode {
  MatrixXd prod;
  double bound = 0.0;  // min over prefixes of ||prefix||^(1/len)
  int len = 0;
  std::uint64_t id = 0;  // insertion order; breaks ties deterministically
};

struct JsrNodeLess {
  bool operator()(const JsrNode& a, const JsrNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;  // best-first by bound
    return a.id > b.id;
  }
};

}  // namespace detail

// Certified bounds on the joint spectral radius of a finite matrix set.
// Lower bound: max over explored products P of rho(P)^(1/len). A branch is
// pruned once its averaged spectral-norm bound cannot exceed lower +
// tolerance; when the frontier empties every infinite product factors into
// pruned blocks, certifying upper = lower + tolerance. If the product budget
// runs out first, the certificate reports the best bound still covering the
// surviving branches with converged = false.
inline JsrCertificate jsr_bounds(const std::vector<MatrixXd>& matrices,
                                 double tolerance,
                                 long max_products = 1000000) {
  if (matrices.empty()) throw ValidationError("need at least one matrix");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  const int n = static_cast<int>(matrices.front().rows());
  for (const auto& a : matrices)
    if (a.rows() != n || a.cols() != n)
      throw DimensionMismatch("all matrices must share one square dimension");

  JsrCertificate cert;
  cert.tolerance_requested = tolerance;

  std::priority_queue<detail::JsrNode, std::vector<detail::JsrNode>,
                      detail::JsrNodeLess> frontier;
  std::uint64_t next_id = 0;
  double lower = 0.0;
  for (const auto& a : matrices) {
    lower = std::max(lower, spectral_radius(a));
    ++cert.products_explored;
  }
  for (const auto& a : matrices) {
    detail::JsrNode node{a, detail::spectral_norm(a), 1, next_id++};
    if (node.bound > lower + tolerance) frontier.push(std::move(node));
  }

  // A node is expanded completely or not at all, so the surviving frontier
  // always covers every branch not yet certified.
  while (!frontier.empty() && cert.products_explored < max_products) {
    detail::JsrNode node = frontier.top();
    frontier.pop();
    if (node.bound <= lower + tolerance) continue;  // pruned by a later lower bound
    ++cert.iterations;
    for (const auto& a : matrices) {
      detail::JsrNode child;
      child.prod = node.prod * a;
      child.len = node.len + 1;
      child.id = next_id++;
      ++cert.products_explored;
      lower = std::max(lower, std::pow(spectral_radius(child.prod),
                                       1.0 / child.len));
      child.bound = std::min(node.bound,
                             std::pow(detail::spectral_norm(child.prod),
                                      1.0 / child.len));
      if (child.bound > lower + tolerance) frontier.push(std::move(child));
    }
  }

  cert.lower = lower;
  double surviving = lower + tolerance;
  while (!frontier.empty()) {
    surviving = std::max(surviving, frontier.top().bound);
    frontier.pop();
  }
  cert.converged = (surviving <= lower + tolerance);
  cert.upper = cert.converged ? lower + tolerance : surviving;
  return cert;
}

}  // namespace gstvar
