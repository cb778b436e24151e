#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "expfam/loss.hpp"
#include "expfam/statistics.hpp"

namespace expfam {

/// Correlation matrix of vec(phibar) together with its smallest eigenvalue
/// (the positive-autocorrelation constant when taken at the population).
struct CorrelationEstimate {
    enum class Source { empirical, quadrature };

    Eigen::MatrixXd matrix;  // (k1 k2 k3)^2
    long n = 0;              // samples used; 0 for population quadrature
    double lambda_min = 0.0;
    Source source = Source::empirical;
};

/// (1/n) sum_t vec(phibar(x^(t))) vec(phibar(x^(t)))^T.
CorrelationEstimate empirical_correlation(const LossContext& ctx);

/// E_{f(.;Theta*)}[vec(phibar) vec(phibar)^T] by quadrature (p <= 3).
CorrelationEstimate population_correlation(const StatisticFamily& family,
                                           const CenteringTable& table,
                                           const Tensor3& theta_star);

/// KL(U_X || f(.; Theta* - Theta)) by quadrature; zero iff Theta = Theta*
/// for a minimal family. Computed as log Z(Theta* - Theta) - log vol(X)
/// - <<Theta* - Theta, E_U[Phi]>>.
double kl_uniform_vs_shifted(const StatisticFamily& family, const CenteringTable& table,
                             const Tensor3& theta_star, const Tensor3& theta);

/// Asymptotic covariance of the estimator: Sigma = B^{-1} A B^{-1} with
/// A the covariance of vec(phibar exp(-<<Theta*, phibar>>)) and B the
/// cross-covariance of vec(phibar) with that vector, both under f(.;Theta*).
struct SandwichCovariance {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::MatrixXd sigma;
    double b_condition = 0.0;
};

SandwichCovariance sandwich_covariance(const StatisticFamily& family, const CenteringTable& table,
                                       const Tensor3& theta_star);

/// Sample-size requirement of the finite-sample guarantee, as the maximum of
/// the correlation-concentration branch and the gradient-concentration
/// branch, plus the companion optimization tolerance
/// epsilon = alpha^2 lambda_min / (8 (1 + r^T d) exp(r^T d)).
struct FiniteSampleRequirement {
    long n = 0;
    double epsilon = 0.0;
    double branch_correlation = 0.0;
    double branch_gradient = 0.0;
};

FiniteSampleRequirement finite_sample_n(TensorShape shape, double alpha, double delta,
                                        double lambda_min, double phi_max,
                                        const Eigen::VectorXd& r, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& g);

/// Monte Carlo check of a Hoeffding-style concentration bound: the fraction
/// of independent trials whose deviation exceeds the bound-implied epsilon
/// must stay near the nominal delta = 0.05.
struct ConcentrationReport {
    long n = 0;
    int trials = 0;
    double epsilon_bound = 0.0;      // epsilon implied by n at delta = 0.05
    int violations = 0;
    double violation_fraction = 0.0;
    double max_deviation = 0.0;      // worst deviation across trials
    Eigen::VectorXd mean_gradient;   // gradient check only
    Eigen::VectorXd gradient_se;     // standard error of the mean, per entry
};

/// Deviation |H_hat - H| (entrywise max) of the empirical correlation from
/// the quadrature population correlation over independent grid-exact sample
/// sets (p <= 2).
ConcentrationReport concentration_check_correlation(const StatisticFamily& family,
                                                    const CenteringTable& table,
                                                    const Tensor3& theta_star, long n, int trials,
                                                    std::uint64_t seed, int max_threads = 0);

/// ||grad L_n(Theta*)||_max against the gradient concentration bound, which
/// needs the inner-product bound r^T d. Also reports the across-trial mean
/// gradient and its standard error for the zero-mean check.
ConcentrationReport concentration_check_gradient(const StatisticFamily& family,
                                                 const CenteringTable& table,
                                                 const Tensor3& theta_star, double r_dot_d,
                                                 long n, int trials, std::uint64_t seed,
                                                 int max_threads = 0);

/// Grid minimization of the population loss and of the KL divergence over a
/// 1-D parameter range, for single-statistic families (p = 1, shape 1x1x1).
/// Both objectives are evaluated with 128-node quadrature and cross-checked
/// against a 96-node rule. The two argmins coincide at the true parameter
/// up to the grid step.
struct GridScanResult {
    double argmin_population_loss = 0.0;
    double argmin_kl = 0.0;
    double kl_at_truth = 0.0;
    double step = 0.0;
};

GridScanResult scan_population_objectives_1d(const StatisticFamily& family,
                                             const CenteringTable& table, double theta_star,
                                             double lo, double hi, double step);

}  // namespace expfam
