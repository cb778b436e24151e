#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "expfam/loss.hpp"
#include "expfam/parameter_space.hpp"

namespace expfam {

/// Boundedness constants of the problem: phi_max and the per-slice dual-norm
/// bounds d. Computed from the statistic family (phi_max_bound,
/// dual_norm_bound) or supplied manually for combinations without a proven
/// bound.
struct ProblemScale {
    double phi_max = 0.0;
    Eigen::VectorXd dual_bounds;  // d, length k3

    double inner_product_bound(const ConstraintSpec& constraints) const {
        return constraints.radii().dot(dual_bounds);
    }
};

struct FitConfig {
    double epsilon = 1e-3;                  // optimality-gap target
    std::optional<long> max_iterations;     // caps the theoretical budget
    std::optional<double> step_size;        // overrides 1/smoothness
    int trace_stride = 1;
};

struct TracePoint {
    long iteration = 0;
    double loss = 0.0;
    double gradient_mapping_norm = 0.0;  // ||Theta_t - Theta_{t+1}||_T / eta
};

struct FitCertificate {
    long tau_theoretical = 0;        // iteration budget for the epsilon target
    bool tau_is_conservative = true; // ||Theta_hat||_T replaced by the feasibility bound
    bool budget_met = false;         // ran the full budget (no early stop / cap)
    std::string stop_reason;         // "budget", "plateau", or "max_iterations"
    double plateau_gap = 0.0;        // last observed gradient-mapping norm
    double step_size = 0.0;
    double smoothness = 0.0;         // constant the step size was derived from
};

struct FitResult {
    Tensor3 theta;
    double final_loss = 0.0;
    long iterations = 0;
    std::vector<TracePoint> trace;
    FitCertificate certificate;
    double wall_seconds = 0.0;
};

/// Step size 1 / (k1 k2 k3 phi_max^2 exp(r^T d)).
double step_size(TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                 const Eigen::VectorXd& d);

/// Iteration budget ceil(2 k1 k2 k3 phi_max^2 exp(r^T d) / epsilon
/// * ||Theta_hat||_T^2). When theta_norm_bound <= 0 the feasibility bound
/// ||Theta_hat||_T^2 <= k1 k2 k3 max_i r_i^2 is substituted.
long iteration_budget(double epsilon, TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                      const Eigen::VectorXd& d, double theta_norm_bound = -1.0);

/// Projected gradient descent from the zero tensor:
///   Theta_{t+1} = project(Theta_t - eta grad L_n(Theta_t)).
/// Runs the theoretical budget for cfg.epsilon unless capped by
/// max_iterations or stopped by the plateau rule (gradient-mapping norm
/// below 1e-10 for 5 consecutive iterations). Deterministic given inputs.
///
/// Families with numerically zero lambda_min of the empirical correlation
/// (duplicated or constant statistic entries) are refused: they violate the
/// positive-autocorrelation assumption and are not identifiable.
FitResult fit(const LossContext& ctx, const ConstraintSpec& constraints,
              const ProblemScale& scale, const FitConfig& cfg = {});

}  // namespace expfam
