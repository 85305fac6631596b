#pragma once
// Estimator study: simulate from one of two fixed bivariate two-regime
// first-order specifications, re-estimate, and aggregate the estimation
// errors per parameter and sample size. Replications run as independent
// seeded tasks; aggregation is order-independent.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gstvar/errors.hpp"
#include "gstvar/estimation.hpp"
#include "gstvar/model.hpp"
#include "gstvar/rng.hpp"
#include "gstvar/threading.hpp"
#include "gstvar/transform.hpp"
#include "gstvar/types.hpp"

namespace gstvar {

enum class StudyModel { model1 = 1, model2 = 2 };

// The two bivariate (d=2, p=1, M=2) study specifications. Both share
// vech(Omega_1) = (0.50, 0.20, 0.30), vech(Omega_2) = (0.80, -0.20, 0.50)
// and alpha_1 = 0.70; the intercepts and AR matrices differ.
inline ParameterVector study_model(StudyModel which) {
  ParameterVector params;
  params.order = ModelOrder{2, 1, 2};
  params.regimes.resize(2);
  params.alphas = VectorXd(2);
  params.alphas << 0.70, 0.30;

  auto& r1 = params.regimes[0];
  auto& r2 = params.regimes[1];
  r1.phi0 = VectorXd(2);
  r2.phi0 = VectorXd(2);
  r1.ar_mats.assign(1, MatrixXd(2, 2));
  r2.ar_mats.assign(1, MatrixXd(2, 2));
  r1.omega = unvech((VectorXd(3) << 0.50, 0.20, 0.30).finished(), 2);
  r2.omega = unvech((VectorXd(3) << 0.80, -0.20, 0.50).finished(), 2);

  if (which == StudyModel::model1) {
    r1.phi0 << 0.0, 1.0;
    r1.ar_mats[0] << 0.50, -0.30,
                     0.20,  0.70;
    r2.phi0 << 1.5, 2.0;
    r2.ar_mats[0] << -0.10, -0.20,
                      0.30,  0.50;
  } else {
    r1.phi0 << 0.0, 1.0;
    r1.ar_mats[0] << 0.80, -0.55,
                     0.40,  0.90;
    r2.phi0 << 0.5, 0.5;
    r2.ar_mats[0] << -0.99, -0.20,
                      0.30,  0.90;
  }
  return params;
}

// Flat-layout parameter labels, e.g. phi0_1_2, ar_1_l1_21, omega_2_v1, alpha_1.
inline std::vector<std::string> parameter_names(const ModelOrder& order) {
  std::vector<std::string> names;
  names.reserve(order.param_count());
  for (int m = 1; m <= order.M; ++m)
    for (int i = 1; i <= order.d; ++i)
      names.push_back("phi0_" + std::to_string(m) + "_" + std::to_string(i));
  for (int m = 1; m <= order.M; ++m)
    for (int lag = 1; lag <= order.p; ++lag)
      for (int c = 1; c <= order.d; ++c)      // column-major vec order
        for (int r = 1; r <= order.d; ++r)
          names.push_back("ar_" + std::to_string(m) + "_l" + std::to_string(lag) +
                          "_" + std::to_string(r) + std::to_string(c));
  for (int m = 1; m <= order.M; ++m)
    for (int v = 1; v <= order.vech_size(); ++v)
      names.push_back("omega_" + std::to_string(m) + "_v" + std::to_string(v));
  for (int m = 1; m < order.M; ++m) names.push_back("alpha_" + std::to_string(m));
  return names;
}

// theta_hat - theta under the admissible regime permutation that minimizes
// the error norm, so recorded errors never reflect a relabeled estimate.
inline VectorXd aligned_error(const ParameterVector& estimate,
                              const ParameterVector& truth) {
  const int M = truth.order.M;
  std::vector<int> perm(M);
  for (int m = 0; m < M; ++m) perm[m] = m;
  const VectorXd truth_flat = truth.flatten();
  VectorXd best;
  double best_norm = std::numeric_limits<double>::infinity();
  do {
    ParameterVector permuted;
    permuted.order = estimate.order;
    permuted.regimes.resize(M);
    permuted.alphas = VectorXd(M);
    for (int m = 0; m < M; ++m) {
      permuted.regimes[m] = estimate.regimes[perm[m]];
      permuted.alphas(m) = estimate.alphas(perm[m]);
    }
    const VectorXd err = permuted.flatten() - truth_flat;
    if (err.squaredNorm() < best_norm) {
      best_norm = err.squaredNorm();
      best = err;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct StudySpec {
  StudyModel model = StudyModel::model1;
  std::vector<int> sample_sizes = {500, 2000};
  int replications = 50;
  int rounds_per_fit = 8;
  std::uint64_t seed = 0;
  int threads = 0;
  int burn_in = 200;  // simulated rows discarded before the retained sample
  EstimationConfig fit_config;  // rounds/seed fields are overridden per fit

  void validate() const {
    if (replications < 1) throw ValidationError("need at least one replication");
    if (sample_sizes.empty()) throw ValidationError("need at least one sample size");
    for (int t : sample_sizes)
      if (t < 10) throw ValidationError("sample sizes must be positive");
    if (rounds_per_fit < 1) throw ValidationError("need at least one round per fit");
    if (burn_in < 0) throw ValidationError("burn-in must be nonnegative");
  }
};

struct StudyCell {
  VectorXd mean_error;
  VectorXd std_dev;
  int failures = 0;
  int successes = 0;
};

struct StudyResult {
  std::vector<int> sample_sizes;
  std::vector<StudyCell> cells;  // one per sample size
  std::vector<std::string> names;
};

// Optional estimator override for calibration tests: maps (data, seed) to an
// estimate in place of the two-phase fit.
using StudyFitter = std::function<ParameterVector(const SeriesMatrix&, std::uint64_t)>;

inline StudyResult run_study(const StudySpec& spec,
                             const StudyFitter* fitter_override = nullptr) {
  spec.validate();
  const ParameterVector truth = study_model(spec.model);
  const ModelOrder order = truth.order;
  const int n_params = order.param_count();

  StudyResult result;
  result.sample_sizes = spec.sample_sizes;
  result.names = parameter_names(order);
  result.cells.resize(spec.sample_sizes.size());

  for (size_t si = 0; si < spec.sample_sizes.size(); ++si) {
    const int T = spec.sample_sizes[si];
    std::vector<VectorXd> errors(spec.replications);
    std::vector<char> ok(spec.replications, 0);

    parallel_for(spec.replications, resolve_threads(spec.threads), [&](int rep) {
      const std::uint64_t rep_seed =
          derive_seed(derive_seed(spec.seed, si), static_cast<std::uint64_t>(rep));
      // initial values from Regime 1's stationary distribution, burn-in dropped
      const SeriesMatrix sim =
          simulate(truth, spec.burn_in + T, /*init=*/0, rep_seed);
      SeriesMatrix data;
      data.values = sim.values.bottomRows(T + order.p);
      try {
        ParameterVector estimate;
        if (fitter_override && *fitter_override) {
          estimate = (*fitter_override)(data, derive_seed(rep_seed, 1));
        } else {
          EstimationConfig config = spec.fit_config;
          config.rounds = spec.rounds_per_fit;
          config.seed = derive_seed(rep_seed, 1);
          config.threads = 1;  // parallelism lives at the replication level
          std::ostringstream sink;
          estimate = fit(data, order, config, false, {}, &sink).params;
        }
        errors[rep] = aligned_error(estimate, truth);
        ok[rep] = 1;
      } catch (const Error&) {
        ok[rep] = 0;
      }
    });

    StudyCell& cell = result.cells[si];
    cell.mean_error = VectorXd::Zero(n_params);
    cell.std_dev = VectorXd::Zero(n_params);
    for (int rep = 0; rep < spec.replications; ++rep) {
      if (!ok[rep]) {
        ++cell.failures;
        continue;
      }
      ++cell.successes;
      cell.mean_error += errors[rep];
    }
    if (cell.successes > 0) cell.mean_error /= cell.successes;
    if (cell.successes > 1) {
      VectorXd ss = VectorXd::Zero(n_params);
      for (int rep = 0; rep < spec.replications; ++rep)
        if (ok[rep]) ss += (errors[rep] - cell.mean_error).cwiseAbs2();
      cell.std_dev = (ss / (cell.successes - 1)).cwiseSqrt();
    }
  }
  return result;
}

}  // namespace gstvar
