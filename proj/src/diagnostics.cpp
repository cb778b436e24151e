#include "expfam/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "expfam/parallel.hpp"
#include "expfam/quadrature.hpp"
#include "expfam/rng.hpp"

namespace expfam {

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()[0];
}

/// Moments under f(.;Theta*) of the centered statistics and their
/// exponential weighting, all accumulated on one quadrature grid. The
/// density stays unnormalized; dividing by the grid mass normalizes every
/// expectation consistently.
struct PopulationMoments {
    Eigen::MatrixXd uu;      // E[u u^T]
    Eigen::MatrixXd uus;     // E[u (u s)^T]
    Eigen::MatrixXd usus;    // E[(u s)(u s)^T]
    Eigen::VectorXd u;       // E[u]
    Eigen::VectorXd us;      // E[u s]
};

PopulationMoments population_moments(const StatisticFamily& family, const CenteringTable& table,
                                     const Tensor3& theta_star, int nodes) {
    const long k = family.shape().size();
    PopulationMoments m;
    m.uu = Eigen::MatrixXd::Zero(k, k);
    m.uus = Eigen::MatrixXd::Zero(k, k);
    m.usus = Eigen::MatrixXd::Zero(k, k);
    m.u = Eigen::VectorXd::Zero(k);
    m.us = Eigen::VectorXd::Zero(k);
    double mass = 0.0;
    for (const auto& qp : tensor_grid(family.domain(), nodes)) {
        const Tensor3 raw = family.evaluate_raw_unchecked(qp.x);
        const Eigen::VectorXd u = raw.flat() - table.means.flat();
        const double centered_ip = theta_star.flat().dot(u);
        const double fw = qp.weight * std::exp(theta_star.flat().dot(raw.flat()));
        const double s = std::exp(-centered_ip);
        mass += fw;
        m.u += fw * u;
        m.us += (fw * s) * u;
        m.uu.noalias() += fw * u * u.transpose();
        m.uus.noalias() += (fw * s) * u * u.transpose();
        m.usus.noalias() += (fw * s * s) * u * u.transpose();
    }
    m.uu /= mass;
    m.uus /= mass;
    m.usus /= mass;
    m.u /= mass;
    m.us /= mass;
    return m;
}

void require_low_dimension(const StatisticFamily& family, int p_max, const char* where) {
    if (family.dimension() > p_max) {
        std::ostringstream msg;
        msg << where << ": quadrature-backed check limited to p <= " << p_max;
        throw UnsupportedConfigError(msg.str());
    }
}

}  // namespace

CorrelationEstimate empirical_correlation(const LossContext& ctx) {
    CorrelationEstimate est;
    est.source = CorrelationEstimate::Source::empirical;
    est.n = ctx.sample_count();
    est.matrix =
        ctx.centered().transpose() * ctx.centered() / static_cast<double>(ctx.sample_count());
    est.lambda_min = smallest_eigenvalue(est.matrix);
    return est;
}

CorrelationEstimate population_correlation(const StatisticFamily& family,
                                           const CenteringTable& table,
                                           const Tensor3& theta_star) {
    require_low_dimension(family, 3, "population_correlation");
    const PopulationMoments m128 = population_moments(family, table, theta_star, 128);
    const PopulationMoments m96 = population_moments(family, table, theta_star, 96);
    const double dev = (m128.uu - m96.uu).cwiseAbs().maxCoeff();
    if (dev > 1e-7)
        throw AccuracyError("population_correlation: quadrature cross-check failed");
    CorrelationEstimate est;
    est.source = CorrelationEstimate::Source::quadrature;
    est.n = 0;
    est.matrix = m128.uu;
    est.lambda_min = smallest_eigenvalue(est.matrix);
    return est;
}

double kl_uniform_vs_shifted(const StatisticFamily& family, const CenteringTable& table,
                             const Tensor3& theta_star, const Tensor3& theta) {
    require_low_dimension(family, 3, "kl_uniform_vs_shifted");
    const Tensor3 shift = theta_star - theta;
    const double log_z = std::log(partition_function(family, shift));
    const double log_vol = std::log(family.domain().volume());
    const double kl = log_z - log_vol - shift.flat().dot(table.means.flat());
    if (kl < -1e-9) throw AccuracyError("kl_uniform_vs_shifted: negative KL beyond round-off");
    return std::max(kl, 0.0);
}

SandwichCovariance sandwich_covariance(const StatisticFamily& family, const CenteringTable& table,
                                       const Tensor3& theta_star) {
    require_low_dimension(family, 3, "sandwich_covariance");
    const PopulationMoments m = population_moments(family, table, theta_star, 128);

    SandwichCovariance out;
    out.a = m.usus - m.us * m.us.transpose();
    const Eigen::MatrixXd b_raw = m.uus - m.u * m.us.transpose();
    out.b = 0.5 * (b_raw + b_raw.transpose());  // asymmetry is round-off: E[u s] = 0

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    out.b_condition = sv[0] / sv[sv.size() - 1];
    if (!(out.b_condition < 1e10)) {
        std::ostringstream msg;
        msg << "sandwich_covariance: B is numerically singular (condition " << out.b_condition
            << "); the asymptotic-normality result assumes invertible B";
        throw NumericalError(msg.str());
    }
    const Eigen::MatrixXd b_inv = svd.solve(Eigen::MatrixXd::Identity(out.b.rows(), out.b.cols()));
    const Eigen::MatrixXd sigma = b_inv * out.a * b_inv;
    out.sigma = 0.5 * (sigma + sigma.transpose());
    return out;
}

FiniteSampleRequirement finite_sample_n(TensorShape shape, double alpha, double delta,
                                        double lambda_min, double phi_max,
                                        const Eigen::VectorXd& r, const Eigen::VectorXd& d,
                                        const Eigen::VectorXd& g) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(delta > 0.0 && delta < 1.0))
        throw SchemaError("finite_sample_n: alpha and delta must lie in (0, 1)");
    if (!(lambda_min > 0.0) || !(phi_max > 0.0))
        throw SchemaError("finite_sample_n: lambda_min and phi_max must be positive");
    const double k123 = static_cast<double>(shape.size());
    const double k12 = static_cast<double>(shape.k1) * shape.k2;
    const double rd = r.dot(d);
    const double rg = r.dot(g);

    FiniteSampleRequirement req;
    req.branch_correlation = 8.0 * std::pow(phi_max, 4) * k123 * k123 /
                             (lambda_min * lambda_min) * std::log(4.0 * k123 * k123 / delta);
    req.branch_gradient = 512.0 * phi_max * phi_max * k12 * k12 * rg * rg * (1.0 + rd) *
                          (1.0 + rd) * std::exp(4.0 * rd) /
                          (std::pow(alpha, 4) * lambda_min * lambda_min) *
                          std::log(4.0 * k123 / delta);
    req.n = static_cast<long>(std::ceil(std::max(req.branch_correlation, req.branch_gradient)));
    req.epsilon = alpha * alpha * lambda_min / (8.0 * (1.0 + rd) * std::exp(rd));
    return req;
}

namespace {

constexpr double kConcentrationDelta = 0.05;

int resolution_for(int p) { return p == 1 ? 2048 : 256; }

}  // namespace

ConcentrationReport concentration_check_correlation(const StatisticFamily& family,
                                                    const CenteringTable& table,
                                                    const Tensor3& theta_star, long n, int trials,
                                                    std::uint64_t seed, int max_threads) {
    require_low_dimension(family, 2, "concentration_check_correlation");
    const double phi_max = phi_max_bound(family);
    const double k123 = static_cast<double>(family.shape().size());

    ConcentrationReport report;
    report.n = n;
    report.trials = trials;
    report.epsilon_bound = phi_max * phi_max *
                           std::sqrt(2.0 * std::log(2.0 * k123 * k123 / kConcentrationDelta) /
                                     static_cast<double>(n));

    const CorrelationEstimate population = population_correlation(family, table, theta_star);
    const int resolution = resolution_for(family.dimension());

    std::vector<double> deviations(static_cast<std::size_t>(trials));
    parallel_for_indexed(trials, max_threads, [&](long trial) {
        const SampleSet samples = grid_exact_sampler(
            family, theta_star, resolution, n, derive_seed(seed, static_cast<std::uint64_t>(trial)));
        const LossContext ctx(family, table, samples);
        const CorrelationEstimate empirical = empirical_correlation(ctx);
        deviations[static_cast<std::size_t>(trial)] =
            (empirical.matrix - population.matrix).cwiseAbs().maxCoeff();
    });

    for (double dev : deviations) {
        report.max_deviation = std::max(report.max_deviation, dev);
        if (dev >= report.epsilon_bound) ++report.violations;
    }
    report.violation_fraction = static_cast<double>(report.violations) / trials;
    return report;
}

ConcentrationReport concentration_check_gradient(const StatisticFamily& family,
                                                 const CenteringTable& table,
                                                 const Tensor3& theta_star, double r_dot_d,
                                                 long n, int trials, std::uint64_t seed,
                                                 int max_threads) {
    require_low_dimension(family, 2, "concentration_check_gradient");
    const double phi_max = phi_max_bound(family);
    const double k123 = static_cast<double>(family.shape().size());

    ConcentrationReport report;
    report.n = n;
    report.trials = trials;
    report.epsilon_bound =
        phi_max * std::exp(r_dot_d) *
        std::sqrt(2.0 * std::log(2.0 * k123 / kConcentrationDelta) / static_cast<double>(n));

    const int resolution = resolution_for(family.dimension());
    const long k = family.shape().size();
    Eigen::MatrixXd gradients(trials, k);
    parallel_for_indexed(trials, max_threads, [&](long trial) {
        const SampleSet samples = grid_exact_sampler(
            family, theta_star, resolution, n, derive_seed(seed, static_cast<std::uint64_t>(trial)));
        const LossContext ctx(family, table, samples);
        gradients.row(trial) = gradient(ctx, theta_star).flat().transpose();
    });

    for (int trial = 0; trial < trials; ++trial) {
        const double dev = gradients.row(trial).cwiseAbs().maxCoeff();
        report.max_deviation = std::max(report.max_deviation, dev);
        if (dev >= report.epsilon_bound) ++report.violations;
    }
    report.violation_fraction = static_cast<double>(report.violations) / trials;
    report.mean_gradient = gradients.colwise().mean().transpose();
    Eigen::VectorXd se(k);
    for (long c = 0; c < k; ++c) {
        const double mu = report.mean_gradient[c];
        const double var = (gradients.col(c).array() - mu).square().sum() / (trials - 1);
        se[c] = std::sqrt(var / trials);
    }
    report.gradient_se = se;
    return report;
}

namespace {

/// Cached 1-D quadrature view of a single-statistic family: node weights,
/// raw statistic values, and the centering constant.
struct Scan1dCache {
    Eigen::VectorXd density_weight;  // w_k exp(theta* Phi_k)
    Eigen::VectorXd raw;             // Phi_k
    Eigen::VectorXd centered;        // Phi_k - mu
    Eigen::VectorXd weight;          // plain quadrature weights
    double mu = 0.0;
    double volume = 0.0;

    double population_loss(double theta) const {
        return (density_weight.array() * (-theta * centered.array()).exp()).sum() /
               density_weight.sum();
    }

    double kl(double theta_star, double theta) const {
        const double shift = theta_star - theta;
        const double z = (weight.array() * (shift * raw.array()).exp()).sum();
        return std::log(z) - std::log(volume) - shift * mu;
    }
};

Scan1dCache build_scan_cache(const StatisticFamily& family, const CenteringTable& table,
                             double theta_star, int nodes) {
    const auto grid = tensor_grid(family.domain(), nodes);
    Scan1dCache cache;
    const long m = static_cast<long>(grid.size());
    cache.density_weight.resize(m);
    cache.raw.resize(m);
    cache.centered.resize(m);
    cache.weight.resize(m);
    cache.mu = table.means.flat()[0];
    cache.volume = family.domain().volume();
    for (long i = 0; i < m; ++i) {
        const double phi = family.evaluate_raw_unchecked(grid[static_cast<std::size_t>(i)].x).flat()[0];
        cache.raw[i] = phi;
        cache.centered[i] = phi - cache.mu;
        cache.weight[i] = grid[static_cast<std::size_t>(i)].weight;
        cache.density_weight[i] = cache.weight[i] * std::exp(theta_star * phi);
    }
    return cache;
}

}  // namespace

GridScanResult scan_population_objectives_1d(const StatisticFamily& family,
                                             const CenteringTable& table, double theta_star,
                                             double lo, double hi, double step) {
    if (family.dimension() != 1 || family.shape().size() != 1)
        throw UnsupportedConfigError("scan_population_objectives_1d: needs p = 1, shape 1x1x1");
    if (!(step > 0.0) || !(hi > lo)) throw SchemaError("scan_population_objectives_1d: bad grid");

    const Scan1dCache fine = build_scan_cache(family, table, theta_star, 128);
    const Scan1dCache coarse = build_scan_cache(family, table, theta_star, 96);

    GridScanResult result;
    result.step = step;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_kl = std::numeric_limits<double>::infinity();
    const long count = static_cast<long>(std::floor((hi - lo) / step + 0.5)) + 1;
    for (long i = 0; i < count; ++i) {
        const double theta = lo + static_cast<double>(i) * step;
        const double value = fine.population_loss(theta);
        const double kl = fine.kl(theta_star, theta);
        if (std::abs(value - coarse.population_loss(theta)) > 1e-7 * std::max(1.0, value) ||
            std::abs(kl - coarse.kl(theta_star, theta)) > 1e-7 * std::max(1.0, std::abs(kl)))
            throw AccuracyError("scan_population_objectives_1d: quadrature cross-check failed");
        if (value < best_loss) {
            best_loss = value;
            result.argmin_population_loss = theta;
        }
        if (kl < best_kl) {
            best_kl = kl;
            result.argmin_kl = theta;
        }
    }
    result.kl_at_truth = std::max(fine.kl(theta_star, theta_star), 0.0);
    return result;
}

}  // namespace expfam
