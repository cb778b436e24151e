#include "expfam/loss.hpp"

#include <cmath>
#include <sstream>

#include "expfam/quadrature.hpp"

namespace expfam {

namespace {

constexpr double kExponentClamp = 700.0;  // exp overflow guard
constexpr double kFeasibilitySlack = 1e-6;

void require_shape(const LossContext& ctx, const Tensor3& theta, const char* where) {
    if (!(theta.shape() == ctx.shape()))
        throw InternalError(std::string(where) + ": parameter shape does not match context");
}

/// Per-sample inner products s_t = <<Theta, phibar(x^(t))>> and their
/// exponential weights w_t = exp(-s_t), with the overflow clamp and the
/// feasibility check against the r^T d bound when one is attached.
struct Kernel {
    Eigen::VectorXd weights;
    bool feasibility_warning = false;
};

Kernel inner_kernel(const LossContext& ctx, const Tensor3& theta) {
    Kernel k;
    Eigen::VectorXd s = ctx.centered() * theta.flat();
    if (ctx.inner_product_bound() &&
        s.cwiseAbs().maxCoeff() > *ctx.inner_product_bound() + kFeasibilitySlack)
        k.feasibility_warning = true;
    k.weights = (-s.cwiseMin(kExponentClamp).cwiseMax(-kExponentClamp)).array().exp();
    return k;
}

}  // namespace

LossContext::LossContext(const StatisticFamily& family, const CenteringTable& table,
                         const SampleSet& samples) {
    if (!(table.means.shape() == family.shape()))
        throw InternalError("loss context: centering table shape mismatch");
    if (samples.dimension() != family.dimension())
        throw InternalError("loss context: sample dimension does not match family");
    shape_ = family.shape();
    const long n = samples.size();
    const long k = shape_.size();
    centered_.resize(n, k);
    const double bound = phi_max_bound(family);
    for (long t = 0; t < n; ++t) {
        const Tensor3 raw = family.evaluate_raw_unchecked(samples.row(t));
        centered_.row(t) = (raw.flat() - table.means.flat()).transpose();
    }
    const double observed = centered_.cwiseAbs().maxCoeff();
    if (observed > bound + 1e-9) {
        std::ostringstream msg;
        msg << "loss context: centered statistic " << observed << " exceeds phi_max bound "
            << bound;
        throw InternalError(msg.str());
    }
}

LossContext LossContext::from_centered(TensorShape shape, Eigen::MatrixXd centered) {
    if (centered.cols() != shape.size())
        throw InternalError("loss context: column count does not match shape");
    if (centered.rows() < 1) throw InternalError("loss context: need at least one sample");
    LossContext ctx;
    ctx.shape_ = shape;
    ctx.centered_ = std::move(centered);
    return ctx;
}

double loss(const LossContext& ctx, const Tensor3& theta) {
    return loss_checked(ctx, theta).value;
}

LossValue loss_checked(const LossContext& ctx, const Tensor3& theta) {
    require_shape(ctx, theta, "loss");
    const Kernel k = inner_kernel(ctx, theta);
    return LossValue{k.weights.mean(), k.feasibility_warning};
}

Tensor3 gradient(const LossContext& ctx, const Tensor3& theta) {
    return loss_and_gradient(ctx, theta).second;
}

std::pair<double, Tensor3> loss_and_gradient(const LossContext& ctx, const Tensor3& theta) {
    require_shape(ctx, theta, "gradient");
    const Kernel k = inner_kernel(ctx, theta);
    const double n = static_cast<double>(ctx.sample_count());
    Tensor3 grad(ctx.shape(), -(ctx.centered().transpose() * k.weights) / n);
    return {k.weights.sum() / n, std::move(grad)};
}

Eigen::MatrixXd hessian(const LossContext& ctx, const Tensor3& theta) {
    require_shape(ctx, theta, "hessian");
    const long k = ctx.entries();
    if (k > 4096) throw CapacityError("hessian: k1 k2 k3 exceeds the 4096 materialization guard");
    const Kernel kern = inner_kernel(ctx, theta);
    const double n = static_cast<double>(ctx.sample_count());
    // (1/n) Phi^T diag(w) Phi, symmetric PSD.
    return ctx.centered().transpose() * kern.weights.asDiagonal() * ctx.centered() / n;
}

double smoothness_constant(TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                           const Eigen::VectorXd& d) {
    if (phi_max < 0.0 || r.minCoeff() < 0.0 || d.minCoeff() < 0.0)
        throw SchemaError("smoothness_constant: inputs must be nonnegative");
    if (r.size() != d.size()) throw InternalError("smoothness_constant: r and d lengths differ");
    return static_cast<double>(shape.size()) * phi_max * phi_max * std::exp(r.dot(d));
}

double taylor_residual(const LossContext& ctx, const Tensor3& theta_star, const Tensor3& delta) {
    require_shape(ctx, theta_star, "taylor_residual");
    require_shape(ctx, delta, "taylor_residual");
    const auto [value_at_star, grad_at_star] = loss_and_gradient(ctx, theta_star);
    return loss(ctx, theta_star + delta) - value_at_star - tensor_inner(grad_at_star, delta);
}

namespace {

double population_loss_once(const StatisticFamily& family, const CenteringTable& table,
                            const Tensor3& theta_star, const Tensor3& theta, int nodes) {
    // Normalize the density on the same grid; the ratio of two same-rule
    // sums is what the cross-check validates.
    double mass = 0.0, value = 0.0;
    for (const auto& qp : tensor_grid(family.domain(), nodes)) {
        const Tensor3 raw = family.evaluate_raw_unchecked(qp.x);
        const Eigen::VectorXd centered = raw.flat() - table.means.flat();
        const double density_weight = qp.weight * std::exp(theta_star.flat().dot(raw.flat()));
        mass += density_weight;
        value += density_weight * std::exp(-theta.flat().dot(centered));
    }
    return value / mass;
}

}  // namespace

double population_loss(const StatisticFamily& family, const CenteringTable& table,
                       const Tensor3& theta_star, const Tensor3& theta) {
    if (family.dimension() > 3)
        throw UnsupportedConfigError("population_loss: quadrature oracle limited to p <= 3");
    const double v128 = population_loss_once(family, table, theta_star, theta, 128);
    const double v96 = population_loss_once(family, table, theta_star, theta, 96);
    if (std::abs(v128 - v96) > 1e-7 * std::max(1.0, std::abs(v128))) {
        std::ostringstream msg;
        msg << "population_loss: quadrature cross-check failed (" << v128 << " vs " << v96 << ")";
        throw AccuracyError(msg.str());
    }
    return v128;
}

}  // namespace expfam
