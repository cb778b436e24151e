#include "expfam/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace expfam {

namespace {

constexpr double kPlateauTolerance = 1e-10;
constexpr int kPlateauRuns = 5;
constexpr long kLambdaGateMaxDim = 512;

void gate_identifiability(const LossContext& ctx) {
    // Assumption-4 gate: a zero eigenvalue of the empirical correlation of
    // vec(phibar) means some direction of Theta never moves the loss
    // (duplicated entries, constant statistics). Skipped above the
    // eigendecomposition guard.
    const long k = ctx.entries();
    if (k > kLambdaGateMaxDim) return;
    const Eigen::MatrixXd corr =
        ctx.centered().transpose() * ctx.centered() / static_cast<double>(ctx.sample_count());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues()[0];
    const double hi = eig.eigenvalues()[k - 1];
    if (lo <= 1e-12 * std::max(hi, 1.0)) {
        std::ostringstream msg;
        msg << "fit: smallest eigenvalue of the statistic correlation is numerically zero ("
            << lo << "); the family is not identifiable (duplicated or constant entries "
            << "violate the positive-autocorrelation assumption)";
        throw UnsupportedConfigError(msg.str());
    }
}

}  // namespace

double step_size(TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                 const Eigen::VectorXd& d) {
    const double c = smoothness_constant(shape, phi_max, r, d);
    if (!(c > 0.0)) throw SchemaError("step_size: smoothness constant must be positive");
    return 1.0 / c;
}

long iteration_budget(double epsilon, TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                      const Eigen::VectorXd& d, double theta_norm_bound) {
    if (!(epsilon > 0.0)) throw SchemaError("iteration_budget: epsilon must be positive");
    const double c = smoothness_constant(shape, phi_max, r, d);
    const double norm_sq = theta_norm_bound > 0.0
                               ? theta_norm_bound * theta_norm_bound
                               : static_cast<double>(shape.size()) * std::pow(r.maxCoeff(), 2);
    return static_cast<long>(std::ceil(2.0 * c * norm_sq / epsilon));
}

FitResult fit(const LossContext& ctx, const ConstraintSpec& constraints,
              const ProblemScale& scale, const FitConfig& cfg) {
    if (constraints.k3() != ctx.shape().k3)
        throw SchemaError("fit: constraint spec k3 does not match the parameter shape");
    if (scale.dual_bounds.size() != constraints.k3())
        throw SchemaError("fit: dual-bound vector length does not match k3");
    if (!(cfg.epsilon > 0.0)) throw SchemaError("fit: epsilon must be positive");
    if (cfg.trace_stride < 1) throw SchemaError("fit: trace stride must be >= 1");

    gate_identifiability(ctx);

    const Eigen::VectorXd r = constraints.radii();
    const double eta =
        cfg.step_size ? *cfg.step_size : step_size(ctx.shape(), scale.phi_max, r, scale.dual_bounds);
    if (!(eta > 0.0)) throw SchemaError("fit: step size must be positive");

    // The epsilon-optimality budget from the smoothness constant behind the
    // step size actually in use, with the feasibility bound on ||Theta_hat||.
    const double smoothness = 1.0 / eta;
    const double norm_bound_sq = static_cast<double>(ctx.shape().size()) * std::pow(r.maxCoeff(), 2);
    const double tau_real = std::ceil(2.0 * smoothness * norm_bound_sq / cfg.epsilon);
    const long tau = tau_real < 9e18 ? static_cast<long>(tau_real) : std::numeric_limits<long>::max();
    const long iteration_cap = cfg.max_iterations ? std::min(*cfg.max_iterations, tau) : tau;

    FitResult result;
    result.certificate.tau_theoretical = tau;
    result.certificate.tau_is_conservative = true;
    result.certificate.step_size = eta;
    result.certificate.smoothness = smoothness;

    const auto t0 = std::chrono::steady_clock::now();

    Tensor3 theta = Tensor3::zero(ctx.shape());
    double gap = 0.0;
    int plateau_run = 0;
    long t = 0;
    std::string stop_reason = "budget";
    for (; t < iteration_cap; ++t) {
        const auto [value, grad] = loss_and_gradient(ctx, theta);
        if (!std::isfinite(value) || !grad.all_finite()) {
            std::ostringstream msg;
            msg << "fit: non-finite loss or gradient at iteration " << t;
            throw NumericalError(msg.str());
        }
        const Tensor3 next =
            constraints.project(Tensor3(ctx.shape(), theta.flat() - eta * grad.flat()));
        gap = tensor_norm(theta - next) / eta;
        if (t % cfg.trace_stride == 0) result.trace.push_back({t, value, gap});
        theta = next;

        plateau_run = gap < kPlateauTolerance ? plateau_run + 1 : 0;
        if (plateau_run >= kPlateauRuns) {
            stop_reason = "plateau";
            ++t;
            break;
        }
    }
    if (stop_reason == "budget" && iteration_cap < tau) stop_reason = "max_iterations";

    result.theta = theta;
    result.final_loss = loss(ctx, theta);
    result.iterations = t;
    result.trace.push_back({t, result.final_loss, gap});
    result.certificate.budget_met = (t >= tau);
    result.certificate.stop_reason = stop_reason;
    result.certificate.plateau_gap = gap;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!constraints.is_feasible(result.theta, 1e-9))
        throw InternalError("fit: final iterate violates the constraint set");
    return result;
}

}  // namespace expfam
