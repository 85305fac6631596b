#pragma once
// Shared helpers for the test suites: random stable parameter draws and
// small conversion utilities.

#include <random>

#include <Eigen/Dense>

#include "gstvar/model.hpp"
#include "gstvar/transform.hpp"
#include "gstvar/types.hpp"

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Random valid parameter vector with every regime's companion radius kept
// below max_radius.
inline gstvar::ParameterVector random_params(int d, int p, int M,
                                             std::mt19937& gen,
                                             double max_radius = 0.8) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  gstvar::ParameterVector params;
  params.order = gstvar::ModelOrder{d, p, M};
  params.regimes.resize(M);
  for (int m = 0; m < M; ++m) {
    auto& reg = params.regimes[m];
    reg.phi0 = VectorXd::NullaryExpr(d, [&](int) { return normal(gen); });
    reg.ar_mats.resize(p);
    for (int i = 0; i < p; ++i)
      reg.ar_mats[i] = MatrixXd::NullaryExpr(
          d, d, [&](int, int) { return 0.4 * normal(gen) / std::sqrt(double(d * p)); });
    MatrixXd w = MatrixXd::NullaryExpr(d, d, [&](int, int) { return normal(gen); });
    reg.omega = w * w.transpose() / d + 0.2 * MatrixXd::Identity(d, d);
    reg.omega = 0.5 * (reg.omega + reg.omega.transpose());
  }
  params.alphas = VectorXd(M);
  for (int m = 0; m < M; ++m) params.alphas(m) = 0.05 + unif(gen);
  params.alphas /= params.alphas.sum();
  std::sort(params.alphas.data(), params.alphas.data() + M,
            std::greater<double>());
  gstvar::repair_stationarity(params, 1.0 - max_radius);
  return params;
}

inline MatrixXd random_history(int p, int d, std::mt19937& gen, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  return MatrixXd::NullaryExpr(p, d, [&](int, int) { return normal(gen); });
}

inline gstvar::SeriesMatrix series_of(const MatrixXd& values) {
  gstvar::SeriesMatrix s;
  s.values = values;
  return s;
}

}  // namespace testutil
