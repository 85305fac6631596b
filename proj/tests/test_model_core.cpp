#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gstvar/model.hpp"
#include "gstvar/montecarlo.hpp"
#include "oracles.hpp"
#include "util.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using gstvar::ModelOrder;
using gstvar::ParameterVector;
using gstvar::RegimeParameters;
using gstvar::SeriesMatrix;
using gstvar::StudyModel;

namespace {

RegimeParameters regime2(VectorXd phi, MatrixXd a, MatrixXd omega) {
  RegimeParameters reg;
  reg.phi0 = std::move(phi);
  reg.ar_mats = {std::move(a)};
  reg.omega = std::move(omega);
  return reg;
}

}  // namespace

// ---------------------------------------------------------------------------
// regime_unconditional_mean
// ---------------------------------------------------------------------------

TEST(UnconditionalMean, StudyModel1Regime2) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const VectorXd mu = gstvar::regime_unconditional_mean(model.regimes[1]);
  EXPECT_NEAR(mu(0), 0.57, 0.01);
  EXPECT_NEAR(mu(1), 4.34, 0.01);
}

TEST(UnconditionalMean, ZeroInterceptGivesZeroMean) {
  std::mt19937 gen(7);
  auto params = testutil::random_params(3, 2, 1, gen);
  params.regimes[0].phi0.setZero();
  const VectorXd mu = gstvar::regime_unconditional_mean(params.regimes[0]);
  EXPECT_LT(mu.cwiseAbs().maxCoeff(), 1e-14);
}

// The printed table value for the second component of Regime 1's mean is
// 2.28, but the defining linear system gives 50/21 = 2.3809...; the oracle
// solve is authoritative here.
TEST(UnconditionalMean, StudyModel1Regime1MatchesSolveOracle) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const VectorXd mu = gstvar::regime_unconditional_mean(model.regimes[0]);
  const VectorXd ref = oracle::regime_mean_explicit(model.regimes[0]);
  EXPECT_NEAR(mu(0), ref(0), 1e-12);
  EXPECT_NEAR(mu(1), ref(1), 1e-12);
  EXPECT_NEAR(mu(0), -10.0 / 7.0, 1e-12);
  EXPECT_NEAR(mu(1), 50.0 / 21.0, 1e-12);
}

TEST(UnconditionalMean, UnitRootThrows) {
  RegimeParameters reg = regime2(VectorXd::Ones(1), MatrixXd::Identity(1, 1),
                                 MatrixXd::Identity(1, 1));
  EXPECT_THROW(gstvar::regime_unconditional_mean(reg), gstvar::SingularMeanSystem);
}

// ---------------------------------------------------------------------------
// regime_stationary_covariance
// ---------------------------------------------------------------------------

TEST(StationaryCovariance, WhiteNoiseRegime) {
  MatrixXd omega(2, 2);
  omega << 1.5, 0.3, 0.3, 0.9;
  RegimeParameters reg = regime2(VectorXd::Zero(2), MatrixXd::Zero(2, 2), omega);
  const MatrixXd sigma = gstvar::regime_stationary_covariance(reg, 1);
  EXPECT_LT((sigma - omega).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(StationaryCovariance, UnivariateAr1ClosedForm) {
  RegimeParameters reg = regime2(VectorXd::Zero(1),
                                 MatrixXd::Constant(1, 1, 0.5),
                                 MatrixXd::Identity(1, 1));
  const MatrixXd sigma = gstvar::regime_stationary_covariance(reg, 1);
  EXPECT_NEAR(sigma(0, 0), 4.0 / 3.0, 1e-12);
}

TEST(StationaryCovariance, MatchesLongSimulation) {
  // Regime 1 of study model 1 as a standalone linear VAR; sample covariance
  // over independent simulated batches, tolerance 3 MC standard errors.
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  ParameterVector linear;
  linear.order = ModelOrder{2, 1, 1};
  linear.regimes = {model.regimes[0]};
  linear.alphas = VectorXd::Ones(1);
  const MatrixXd sigma = gstvar::regime_stationary_covariance(model.regimes[0], 1);

  const int batches = 8, len = 125000;
  MatrixXd batch_vals(batches, 3);  // var1, var2, cov entries
  const VectorXd mu = gstvar::regime_unconditional_mean(model.regimes[0]);
  for (int b = 0; b < batches; ++b) {
    const SeriesMatrix sim = gstvar::simulate(linear, len, 0, 1000 + b);
    const MatrixXd centered = sim.values.rowwise() - mu.transpose();
    const MatrixXd cov = centered.transpose() * centered / centered.rows();
    batch_vals(b, 0) = cov(0, 0);
    batch_vals(b, 1) = cov(1, 1);
    batch_vals(b, 2) = cov(0, 1);
  }
  const double targets[3] = {sigma(0, 0), sigma(1, 1), sigma(0, 1)};
  for (int k = 0; k < 3; ++k) {
    const double mean = batch_vals.col(k).mean();
    const double sd = std::sqrt(
        (batch_vals.col(k).array() - mean).square().sum() / (batches - 1));
    const double se = sd / std::sqrt(double(batches));
    EXPECT_NEAR(mean, targets[k], 3.0 * se) << "entry " << k;
  }
}

TEST(StationaryCovariance, FixedPointInvariant) {
  std::mt19937 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + rep % 3, p = 1 + rep % 2;
    auto params = testutil::random_params(d, p, 1, gen, 0.9);
    const auto& reg = params.regimes[0];
    const MatrixXd sigma = gstvar::regime_stationary_covariance(reg, p);
    const MatrixXd comp = gstvar::companion_matrix(reg, p);
    MatrixXd wide = MatrixXd::Zero(d * p, d * p);
    wide.topLeftCorner(d, d) = reg.omega;
    const MatrixXd gap = sigma - comp * sigma * comp.transpose() - wide;
    EXPECT_LT(gap.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(StationaryCovariance, ExplosiveRegimeThrows) {
  RegimeParameters reg = regime2(VectorXd::Zero(1),
                                 MatrixXd::Constant(1, 1, 1.0),
                                 MatrixXd::Identity(1, 1));
  EXPECT_THROW(gstvar::regime_stationary_covariance(reg, 1),
               gstvar::NonstationaryRegime);
}

// ---------------------------------------------------------------------------
// mvn_log_density
// ---------------------------------------------------------------------------

TEST(MvnLogDensity, StandardNormalAtMode) {
  const VectorXd zero1 = VectorXd::Zero(1);
  EXPECT_NEAR(gstvar::mvn_log_density(zero1, zero1, MatrixXd::Identity(1, 1)),
              -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  const VectorXd zero2 = VectorXd::Zero(2);
  EXPECT_NEAR(gstvar::mvn_log_density(zero2, zero2, MatrixXd::Identity(2, 2)),
              -std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(MvnLogDensity, MatchesExplicitFormulaOracle) {
  VectorXd x(2), mean(2);
  x << 1.0, -1.0;
  mean << 0.0, 0.0;
  MatrixXd cov(2, 2);
  cov << 0.5, 0.2, 0.2, 0.3;
  const double got = gstvar::mvn_log_density(x, mean, cov);
  const double ref = oracle::mvn_log_density_explicit(x, mean, cov);
  EXPECT_NEAR(got, ref, 1e-10);
  EXPECT_NEAR(got, -6.1887850643599395, 1e-9);  // frozen from the oracle
}

TEST(MvnLogDensity, NotPositiveDefiniteThrows) {
  MatrixXd cov(2, 2);
  cov << 1.0, 2.0, 2.0, 1.0;  // indefinite
  EXPECT_THROW(gstvar::mvn_log_density(VectorXd::Zero(2), VectorXd::Zero(2), cov),
               gstvar::NotPositiveDefinite);
}

// ---------------------------------------------------------------------------
// transition_weights
// ---------------------------------------------------------------------------

TEST(TransitionWeights, SingleRegimeIsOne) {
  std::mt19937 gen(3);
  const auto params = testutil::random_params(2, 2, 1, gen);
  const MatrixXd history = testutil::random_history(2, 2, gen);
  const VectorXd w = gstvar::transition_weights(params, history);
  ASSERT_EQ(w.size(), 1);
  EXPECT_NEAR(w(0), 1.0, 1e-15);
}

TEST(TransitionWeights, IdenticalRegimesSplitEvenly) {
  std::mt19937 gen(4);
  auto params = testutil::random_params(2, 1, 2, gen);
  params.regimes[1] = params.regimes[0];
  params.alphas << 0.5, 0.5;  // violates identification but is evaluable
  const MatrixXd history = testutil::random_history(1, 2, gen);
  const VectorXd w = gstvar::transition_weights(params, history);
  EXPECT_NEAR(w(0), 0.5, 1e-12);
  EXPECT_NEAR(w(1), 0.5, 1e-12);
}

TEST(TransitionWeights, StudyModel1AtRegime1MeanMatchesLinearOracle) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const VectorXd mu1 = gstvar::regime_unconditional_mean(model.regimes[0]);
  MatrixXd history(1, 2);
  history.row(0) = mu1;
  const VectorXd got = gstvar::transition_weights(model, history);
  const VectorXd ref = oracle::weights_linear(model, history);
  EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TransitionWeights, SimplexProperty) {
  std::mt19937 gen(5);
  std::uniform_int_distribution<int> pick_d(1, 3), pick_p(1, 2), pick_m(1, 3);
  for (int rep = 0; rep < 10000; ++rep) {
    const int d = pick_d(gen), p = pick_p(gen), M = pick_m(gen);
    const auto params = testutil::random_params(d, p, M, gen);
    const MatrixXd history = testutil::random_history(p, d, gen, 2.0);
    const VectorXd w = gstvar::transition_weights(params, history);
    ASSERT_EQ(w.size(), M);
    EXPECT_GE(w.minCoeff(), 0.0);
    EXPECT_LE(w.maxCoeff(), 1.0);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  }
}

TEST(TransitionWeights, LogSpaceShiftInvariance) {
  // Adding a common constant to every log term leaves the softmax unchanged.
  std::mt19937 gen(6);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    VectorXd terms = VectorXd::NullaryExpr(3, [&](int) { return normal(gen); });
    const double c = normal(gen) * 40.0;
    const VectorXd base = gstvar::detail::softmax_weights(terms);
    const VectorXd shifted =
        gstvar::detail::softmax_weights((terms.array() + c).matrix());
    EXPECT_LT((base - shifted).cwiseAbs().maxCoeff(), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// conditional_moments
// ---------------------------------------------------------------------------

TEST(ConditionalMoments, SingleRegimeLinear) {
  std::mt19937 gen(8);
  const auto params = testutil::random_params(2, 1, 1, gen);
  const MatrixXd history = testutil::random_history(1, 2, gen);
  const auto [mu, omega] =
      gstvar::conditional_moments(params, history, VectorXd::Ones(1));
  const VectorXd expect =
      params.regimes[0].phi0 + params.regimes[0].ar_mats[0] * history.row(0).transpose();
  EXPECT_LT((mu - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((omega - params.regimes[0].omega).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ConditionalMoments, DegenerateWeightsPickRegimeOne) {
  std::mt19937 gen(9);
  const auto params = testutil::random_params(2, 2, 2, gen);
  const MatrixXd history = testutil::random_history(2, 2, gen);
  VectorXd w(2);
  w << 1.0, 0.0;
  const auto [mu, omega] = gstvar::conditional_moments(params, history, w);
  VectorXd expect = params.regimes[0].phi0;
  for (int i = 0; i < 2; ++i)
    expect += params.regimes[0].ar_mats[i] * history.row(i).transpose();
  EXPECT_LT((mu - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((omega - params.regimes[0].omega).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ConditionalMoments, TermByTermOracle) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  MatrixXd history = MatrixXd::Zero(1, 2);
  const VectorXd w = gstvar::transition_weights(model, history);
  const auto [mu, omega] = gstvar::conditional_moments(model, history, w);
  VectorXd mu_ref = VectorXd::Zero(2);
  MatrixXd om_ref = MatrixXd::Zero(2, 2);
  for (int m = 0; m < 2; ++m) {
    mu_ref += w(m) * (model.regimes[m].phi0 +
                      model.regimes[m].ar_mats[0] * history.row(0).transpose());
    om_ref += w(m) * model.regimes[m].omega;
  }
  EXPECT_LT((mu - mu_ref).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((omega - om_ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ConditionalMoments, ConvexityKeepsMinEigenvalue) {
  std::mt19937 gen(10);
  for (int rep = 0; rep < 50; ++rep) {
    const auto params = testutil::random_params(3, 1, 3, gen);
    const MatrixXd history = testutil::random_history(1, 3, gen);
    const VectorXd w = gstvar::transition_weights(params, history);
    const auto [mu, omega] = gstvar::conditional_moments(params, history, w);
    double min_regime = std::numeric_limits<double>::infinity();
    for (const auto& reg : params.regimes) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(reg.omega);
      min_regime = std::min(min_regime, es.eigenvalues().minCoeff());
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(omega);
    EXPECT_GE(es.eigenvalues().minCoeff(), min_regime - 1e-10);
  }
}

// ---------------------------------------------------------------------------
// log_likelihood
// ---------------------------------------------------------------------------

TEST(LogLikelihood, ScalarAr1ClosedForm) {
  const double phi = 0.4, a = 0.6, omega = 0.8;
  ParameterVector params;
  params.order = ModelOrder{1, 1, 1};
  params.regimes = {regime2(VectorXd::Constant(1, phi), MatrixXd::Constant(1, 1, a),
                            MatrixXd::Constant(1, 1, omega))};
  params.alphas = VectorXd::Ones(1);
  const SeriesMatrix sim = gstvar::simulate(params, 50, 0, 42);
  const double got = gstvar::log_likelihood(params, sim);
  const double ref = oracle::ar1_loglik(phi, a, omega, sim.values.col(0));
  EXPECT_NEAR(got, ref, 1e-12 * std::abs(ref));
}

TEST(LogLikelihood, SingleTermEqualsDensityCall) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  std::mt19937 gen(12);
  MatrixXd values = testutil::random_history(2, 2, gen);  // p+1 = 2 rows
  SeriesMatrix data = testutil::series_of(values);
  const double ll = gstvar::log_likelihood(model, data);
  MatrixXd history(1, 2);
  history.row(0) = values.row(0);
  const VectorXd w = gstvar::transition_weights(model, history);
  const auto [mu, omega] = gstvar::conditional_moments(model, history, w);
  EXPECT_NEAR(ll, gstvar::mvn_log_density(values.row(1).transpose(), mu, omega),
              1e-12);
}

TEST(LogLikelihood, BruteForceOracleOnStudyModel1) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const SeriesMatrix sim = gstvar::simulate(model, 200, 0, 77);
  const double got = gstvar::log_likelihood(model, sim);
  const double ref = oracle::brute_force_loglik(model, sim.values);
  EXPECT_NEAR(got, ref, 1e-8);
}

TEST(LogLikelihood, LinearReductionProperty) {
  std::mt19937 gen(13);
  for (int rep = 0; rep < 10; ++rep) {
    const int d = 1 + rep % 3, p = 1 + rep % 2;
    const auto params = testutil::random_params(d, p, 1, gen);
    const SeriesMatrix sim = gstvar::simulate(params, 60, 0, 100 + rep);
    const double got = gstvar::log_likelihood(params, sim);
    const double ref = oracle::brute_force_loglik(params, sim.values);
    EXPECT_NEAR(got, ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST(LogLikelihood, RelabelingInvariance) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const SeriesMatrix sim = gstvar::simulate(model, 100, 0, 21);
  ParameterVector swapped = model;
  std::swap(swapped.regimes[0], swapped.regimes[1]);
  swapped.alphas << model.alphas(1), model.alphas(0);
  EXPECT_NEAR(gstvar::log_likelihood(model, sim),
              gstvar::log_likelihood(swapped, sim), 1e-10);
}

TEST(LogLikelihood, TooFewRowsThrows) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  SeriesMatrix data = testutil::series_of(MatrixXd::Zero(1, 2));
  EXPECT_THROW(gstvar::log_likelihood(model, data), gstvar::ValidationError);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

TEST(Simulate, IidGaussianMoments) {
  ParameterVector params;
  params.order = ModelOrder{2, 1, 1};
  params.regimes = {regime2(VectorXd::Zero(2), MatrixXd::Zero(2, 2),
                            MatrixXd::Identity(2, 2))};
  params.alphas = VectorXd::Ones(1);
  const SeriesMatrix sim = gstvar::simulate(params, 100000, 0, 9);
  const Eigen::RowVectorXd mean = sim.values.colwise().mean();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 0.02);
  const MatrixXd centered = sim.values.rowwise() - mean;
  const MatrixXd cov = centered.transpose() * centered / centered.rows();
  EXPECT_LT((cov - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Simulate, DeterministicForFixedSeed) {
  const ParameterVector model = gstvar::study_model(StudyModel::model2);
  const SeriesMatrix a = gstvar::simulate(model, 500, 1, 31337);
  const SeriesMatrix b = gstvar::simulate(model, 500, 1, 31337);
  EXPECT_TRUE(a.values == b.values);  // bit-identical
}

TEST(Simulate, WeightOccupancyMatchesIndependentSimulator) {
  // Time average of the first transition weight, library vs an independently
  // coded simulator, each within 3 batch-means standard errors.
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  const int T = 100000;
  const SeriesMatrix sim = gstvar::simulate(model, T, 0, 2024);
  gstvar::LikelihoodTrace trace;
  gstvar::log_likelihood(model, sim, &trace);
  const VectorXd w_lib = trace.weights.weights.col(0);

  MatrixXd init(1, 2);
  init.row(0) = gstvar::regime_unconditional_mean(model.regimes[0]);
  const MatrixXd other = oracle::independent_simulate(model, T, init, 555);
  SeriesMatrix other_series = testutil::series_of(other);
  gstvar::LikelihoodTrace other_trace;
  gstvar::log_likelihood(model, other_series, &other_trace);
  const VectorXd w_other = other_trace.weights.weights.col(0);

  const double se_lib = oracle::batch_means_se(w_lib);
  const double se_other = oracle::batch_means_se(w_other);
  const double se = std::sqrt(se_lib * se_lib + se_other * se_other);
  EXPECT_NEAR(w_lib.mean(), w_other.mean(), 3.0 * se);
}

TEST(Simulate, ExplosiveRegimeInitThrows) {
  ParameterVector params;
  params.order = ModelOrder{1, 1, 1};
  params.regimes = {regime2(VectorXd::Zero(1), MatrixXd::Constant(1, 1, 1.2),
                            MatrixXd::Identity(1, 1))};
  params.alphas = VectorXd::Ones(1);
  EXPECT_THROW(gstvar::simulate(params, 10, 0, 1), gstvar::NonstationaryRegime);
}

TEST(Simulate, OutputHasInitRowsThenTRows) {
  const ParameterVector model = gstvar::study_model(StudyModel::model1);
  std::mt19937 gen(14);
  const MatrixXd init = testutil::random_history(1, 2, gen);
  const SeriesMatrix sim = gstvar::simulate(model, 7, init, 3);
  ASSERT_EQ(sim.values.rows(), 8);
  EXPECT_TRUE(sim.values.row(0) == init.row(0));
}
