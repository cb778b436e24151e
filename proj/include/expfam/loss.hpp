#pragma once

#include <Eigen/Core>

#include <optional>
#include <utility>

#include "expfam/sampling.hpp"
#include "expfam/statistics.hpp"
#include "expfam/tensor.hpp"

namespace expfam {

/// Immutable per-sample cache of centered statistics. Row t of the matrix is
/// vec(phibar(x^(t))); the loss, gradient, and Hessian are all sums over
/// these rows. Building the cache validates every entry against the
/// family's phi_max bound.
class LossContext {
  public:
    LossContext(const StatisticFamily& family, const CenteringTable& table,
                const SampleSet& samples);

    /// Test-only entry point: supply the centered-statistic rows directly.
    static LossContext from_centered(TensorShape shape, Eigen::MatrixXd centered);

    long sample_count() const { return centered_.rows(); }
    const TensorShape& shape() const { return shape_; }
    long entries() const { return shape_.size(); }
    const Eigen::MatrixXd& centered() const { return centered_; }

    /// Known bound on |<<Theta, phibar(x)>>| for feasible Theta (r^T d).
    /// Optional; exceeding it by more than 1e-6 flags a feasibility warning.
    void set_inner_product_bound(double bound) { inner_bound_ = bound; }
    std::optional<double> inner_product_bound() const { return inner_bound_; }

  private:
    LossContext() = default;

    TensorShape shape_;
    Eigen::MatrixXd centered_;  // n x (k1 k2 k3)
    std::optional<double> inner_bound_;
};

struct LossValue {
    double value = 0.0;
    bool feasibility_warning = false;  // some |<<Theta, phibar>>| exceeded r^T d + 1e-6
};

/// L_n(Theta) = (1/n) sum_t exp(-<<Theta, phibar(x^(t))>>). Strictly positive.
double loss(const LossContext& ctx, const Tensor3& theta);
LossValue loss_checked(const LossContext& ctx, const Tensor3& theta);

/// Entry (u,v,w) = -(1/n) sum_t phibar_uvw(x^(t)) exp(-<<Theta, phibar(x^(t))>>).
Tensor3 gradient(const LossContext& ctx, const Tensor3& theta);

/// Loss and gradient from one pass over the per-sample inner products; this
/// is the optimizer's per-iteration kernel.
std::pair<double, Tensor3> loss_and_gradient(const LossContext& ctx, const Tensor3& theta);

/// Dense (k1 k2 k3)^2 Hessian; positive semidefinite by construction.
/// Materialized for diagnostics and tests only (dimension guard 4096).
Eigen::MatrixXd hessian(const LossContext& ctx, const Tensor3& theta);

/// Smoothness constant k1 k2 k3 phi_max^2 exp(r^T d); Lipschitz bound on the
/// loss gradient over the feasible set.
double smoothness_constant(TensorShape shape, double phi_max, const Eigen::VectorXd& r,
                           const Eigen::VectorXd& d);

/// First-order Taylor residual L_n(Theta* + Delta) - L_n(Theta*)
/// - <<grad L_n(Theta*), Delta>>. Nonnegative by convexity.
double taylor_residual(const LossContext& ctx, const Tensor3& theta_star, const Tensor3& delta);

/// Population loss E_{f(.;Theta*)}[exp(-<<Theta, phibar(x)>>)] by
/// tensor-product quadrature (128 nodes per dimension, 96-node cross-check
/// to 1e-7), p <= 3.
double population_loss(const StatisticFamily& family, const CenteringTable& table,
                       const Tensor3& theta_star, const Tensor3& theta);

}  // namespace expfam
