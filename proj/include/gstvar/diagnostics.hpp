#pragma once
// Residual construction and the graphical-diagnostic statistics: ACF/CCF of
// residuals and squared standardized residuals, PACF of raw series and
// normal QQ data.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "gstvar/errors.hpp"
#include "gstvar/estimation.hpp"
#include "gstvar/model.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

struct ResidualSet {
  MatrixXd raw;           // T x d, u_t = y_t - mu_{y,t}
  MatrixXd standardized;  // T x d, B_t^{-1} u_t
};

inline ResidualSet residuals(const FittedModel& fit, const SeriesMatrix& data) {
  LikelihoodTrace trace;
  log_likelihood(fit.params, data, &trace);
  const int T = static_cast<int>(trace.cond_means.rows());
  const int d = fit.params.order.d, p = fit.params.order.p;
  ResidualSet out;
  out.raw.resize(T, d);
  out.standardized.resize(T, d);
  VectorXd u(d);
  for (int t = 0; t < T; ++t) {
    u = data.values.row(p + t).transpose() - trace.cond_means.row(t).transpose();
    out.raw.row(t) = u;
    trace.cond_cholesky[t].triangularView<Eigen::Lower>().solveInPlace(u);
    out.standardized.row(t) = u;
  }
  return out;
}

struct CorrelationResult {
  // corr[lag](i, j): sample correlation between series i at t and series j
  // at t - lag; lag-0 diagonal entries are one.
  std::vector<MatrixXd> corr;
  double band = 0.0;  // 1.96 / sqrt(T), the 95% IID bound
};

inline CorrelationResult acf_ccf(const MatrixXd& series, int max_lag) {
  const int T = static_cast<int>(series.rows());
  const int d = static_cast<int>(series.cols());
  if (max_lag < 0 || max_lag >= T)
    throw ValidationError("max_lag must lie in [0, T)");
  if (!series.allFinite()) throw ValidationError("series has non-finite entries");

  const Eigen::RowVectorXd mean = series.colwise().mean();
  const MatrixXd centered = series.rowwise() - mean;
  VectorXd gamma0(d);
  for (int i = 0; i < d; ++i) {
    gamma0(i) = centered.col(i).squaredNorm() / T;
    if (gamma0(i) <= 0.0)
      throw ZeroVariance("series column is constant");
  }

  CorrelationResult out;
  out.band = 1.96 / std::sqrt(static_cast<double>(T));
  out.corr.assign(max_lag + 1, MatrixXd(d, d));
  for (int lag = 0; lag <= max_lag; ++lag) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int t = lag; t < T; ++t) acc += centered(t, i) * centered(t - lag, j);
        out.corr[lag](i, j) = acc / (T * std::sqrt(gamma0(i) * gamma0(j)));
      }
  }
  return out;
}

inline CorrelationResult squared_std_residual_acf(const ResidualSet& resid,
                                                  int max_lag) {
  return acf_ccf(resid.standardized.array().square().matrix(), max_lag);
}

// Partial autocorrelations via the Durbin-Levinson recursion on the sample ACF.
inline VectorXd pacf(const VectorXd& series, int max_lag) {
  const int T = static_cast<int>(series.size());
  if (max_lag < 1 || max_lag >= T / 2)
    throw ValidationError("max_lag must lie in [1, T/2)");
  const CorrelationResult ac = acf_ccf(series, max_lag);
  VectorXd rho(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) rho(k) = ac.corr[k](0, 0);

  VectorXd out(max_lag);
  VectorXd phi_prev(max_lag), phi_cur(max_lag);
  out(0) = rho(1);
  phi_prev(0) = rho(1);
  for (int k = 2; k <= max_lag; ++k) {
    double num = rho(k), den = 1.0;
    for (int j = 1; j < k; ++j) {
      num -= phi_prev(j - 1) * rho(k - j);
      den -= phi_prev(j - 1) * rho(j);
    }
    const double phi_kk = num / den;
    out(k - 1) = phi_kk;
    for (int j = 1; j < k; ++j)
      phi_cur(j - 1) = phi_prev(j - 1) - phi_kk * phi_prev(k - j - 1);
    phi_cur(k - 1) = phi_kk;
    phi_prev = phi_cur;
  }
  return out;
}

// QQ data: column 0 holds standard-normal quantiles at plotting positions
// (k - 0.5)/T, column 1 the order statistics.
inline MatrixXd qq_points(const VectorXd& column) {
  const int T = static_cast<int>(column.size());
  if (T < 2) throw ValidationError("need at least two observations");
  std::vector<double> sorted(column.data(), column.data() + T);
  std::sort(sorted.begin(), sorted.end());
  boost::math::normal dist;
  MatrixXd out(T, 2);
  for (int k = 0; k < T; ++k) {
    out(k, 0) = boost::math::quantile(dist, (k + 0.5) / T);
    out(k, 1) = sorted[static_cast<size_t>(k)];
  }
  return out;
}

}  // namespace gstvar
