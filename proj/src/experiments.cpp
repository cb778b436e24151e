#include "expfam/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "expfam/parallel.hpp"
#include "expfam/rng.hpp"

namespace expfam {

double empirical_step_size(const LossContext& ctx, double r_dot_d) {
    if (ctx.entries() > 512)
        throw CapacityError("empirical_step_size: correlation eigendecomposition guard (k <= 512)");
    const Eigen::MatrixXd corr =
        ctx.centered().transpose() * ctx.centered() / static_cast<double>(ctx.sample_count());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    const double lambda_max = eig.eigenvalues()[eig.eigenvalues().size() - 1];
    if (!(lambda_max > 0.0)) throw NumericalError("empirical_step_size: degenerate correlation");
    return 1.0 / (std::exp(r_dot_d) * lambda_max);
}

std::vector<ReplicationOutcome> run_replications(const RecoverySetup& setup, long n,
                                                 int replications, std::uint64_t master_seed,
                                                 int max_threads) {
    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(replications));
    const double r_dot_d = setup.scale.inner_product_bound(setup.constraints);
    parallel_for_indexed(replications, max_threads, [&](long rep) {
        ReplicationOutcome& out = outcomes[static_cast<std::size_t>(rep)];
        try {
            const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(rep));
            const SampleSet samples = grid_exact_sampler(setup.family, setup.theta_star,
                                                         setup.grid_resolution, n, seed);
            LossContext ctx(setup.family, setup.table, samples);
            ctx.set_inner_product_bound(r_dot_d);
            FitConfig cfg = setup.fit_config;
            if (setup.empirical_step && !cfg.step_size)
                cfg.step_size = empirical_step_size(ctx, r_dot_d);
            const FitResult fit_result = fit(ctx, setup.constraints, setup.scale, cfg);
            out.ok = true;
            out.error = tensor_norm(fit_result.theta - setup.theta_star);
            out.iterations = fit_result.iterations;
        } catch (const std::exception& e) {
            out.ok = false;
            out.message = e.what();
        }
    });
    return outcomes;
}

SweepCell summarize_cell(long n, const std::vector<ReplicationOutcome>& outcomes) {
    SweepCell cell;
    cell.n = n;
    for (const auto& o : outcomes) {
        if (o.ok)
            cell.errors.push_back(o.error);
        else
            ++cell.failures;
    }
    std::sort(cell.errors.begin(), cell.errors.end());
    auto quantile = [&](double q) {
        if (cell.errors.empty()) return 0.0;
        const double pos = q * static_cast<double>(cell.errors.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, cell.errors.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return (1.0 - frac) * cell.errors[lo] + frac * cell.errors[hi];
    };
    cell.median_error = quantile(0.5);
    cell.q25 = quantile(0.25);
    cell.q75 = quantile(0.75);
    return cell;
}

std::vector<SweepCell> run_recovery_sweep(const RecoverySetup& setup, const std::vector<long>& ns,
                                          int replications, std::uint64_t master_seed,
                                          int max_threads) {
    std::vector<SweepCell> cells;
    cells.reserve(ns.size());
    for (std::size_t c = 0; c < ns.size(); ++c) {
        const std::uint64_t cell_seed = derive_seed(master_seed, 0x10000u + c);
        cells.push_back(summarize_cell(
            ns[c], run_replications(setup, ns[c], replications, cell_seed, max_threads)));
    }
    return cells;
}

double log_log_slope(const std::vector<SweepCell>& cells) {
    const int m = static_cast<int>(cells.size());
    if (m < 2) throw SchemaError("log_log_slope: need at least two sweep cells");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& cell : cells) {
        const double x = std::log(static_cast<double>(cell.n));
        const double y = std::log(cell.median_error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace expfam
