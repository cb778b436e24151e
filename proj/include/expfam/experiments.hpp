#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "expfam/optimizer.hpp"
#include "expfam/sampling.hpp"

namespace expfam {

/// A fully specified synthetic recovery problem: truth, sampler, constraint
/// set, and fit settings.
struct RecoverySetup {
    StatisticFamily family;
    CenteringTable table;
    ConstraintSpec constraints;
    ProblemScale scale;
    Tensor3 theta_star;
    int grid_resolution = 2048;
    FitConfig fit_config;
    /// Replace the worst-case Lemma step with 1 / (exp(r^T d) lambda_max(H_hat)),
    /// a valid smoothness bound computed from the sample at hand. Descent and
    /// epsilon-optimality guarantees are preserved; the certificate records
    /// the constant used.
    bool empirical_step = true;
};

/// Step size from the empirical correlation: the Hessian of the sample loss
/// is dominated (in the PSD order) by exp(r^T d) H_hat on the feasible set,
/// so the reciprocal of that bound's largest eigenvalue is a valid 1/L step.
double empirical_step_size(const LossContext& ctx, double r_dot_d);

struct ReplicationOutcome {
    bool ok = false;
    double error = 0.0;  // ||theta_hat - theta_star||_T
    long iterations = 0;
    std::string message;  // failure description when !ok
};

/// generate -> fit -> error for `replications` independent sample sets of
/// size n. Per-replication seeds derive from the master seed and the
/// replication index; replications run on a bounded worker pool and results
/// are indexed, so the output is independent of scheduling.
std::vector<ReplicationOutcome> run_replications(const RecoverySetup& setup, long n,
                                                 int replications, std::uint64_t master_seed,
                                                 int max_threads = 0);

struct SweepCell {
    long n = 0;
    std::vector<double> errors;  // successful replications, sorted
    int failures = 0;
    double median_error = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

SweepCell summarize_cell(long n, const std::vector<ReplicationOutcome>& outcomes);

/// Full error-vs-n sweep. Cell c uses seed stream (master_seed, c).
std::vector<SweepCell> run_recovery_sweep(const RecoverySetup& setup, const std::vector<long>& ns,
                                          int replications, std::uint64_t master_seed,
                                          int max_threads = 0);

/// Least-squares slope of log(median error) against log(n).
double log_log_slope(const std::vector<SweepCell>& cells);

}  // namespace expfam
