#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "expfam/tensor.hpp"

namespace expfam {

enum class NormKind { l11, nuclear };

/// Entry-wise L_{1,1} norm or nuclear norm of a matrix.
double slice_norm(const Eigen::MatrixXd& m, NormKind kind);

/// Dual norm: max norm for L11, spectral norm for nuclear.
double dual_norm(const Eigen::MatrixXd& m, NormKind kind);

/// Loop-operation counter for the projection-cost measurements.
struct ProjectionOps {
    std::uint64_t ops = 0;
};

/// Euclidean projection onto {N : ||N||_{1,1} <= r}. Sign-preserving simplex
/// projection of |vec(M)| with the sort-based O(m log m) threshold; identity
/// when M is already feasible.
Eigen::MatrixXd project_l11_ball(const Eigen::MatrixXd& m, double r,
                                 ProjectionOps* ops = nullptr);

/// Euclidean projection onto {N : ||N||_* <= r}: SVD, simplex projection of
/// the singular values, reconstruction. Identity when feasible. Singular
/// values are kept in descending order and each left singular vector is
/// signed so its largest-magnitude entry is positive, making the
/// reconstruction reproducible across runs.
Eigen::MatrixXd project_nuclear_ball(const Eigen::MatrixXd& m, double r,
                                     ProjectionOps* ops = nullptr);

struct SliceConstraint {
    NormKind norm = NormKind::l11;
    double radius = 1.0;
};

/// Per-slice norm constraints defining the feasible set. The feasible set is
/// a product of per-slice norm balls, so it is convex and the tensor-norm
/// projection decomposes into independent slice projections (the squared
/// tensor norm is a sum of squared slice Frobenius norms).
class ConstraintSpec {
  public:
    explicit ConstraintSpec(std::vector<SliceConstraint> slices);

    static ConstraintSpec uniform(NormKind kind, double radius, int k3 = 1);

    int k3() const { return static_cast<int>(slices_.size()); }
    const SliceConstraint& slice(int l) const { return slices_.at(static_cast<std::size_t>(l)); }
    const std::vector<SliceConstraint>& slices() const { return slices_; }

    Eigen::VectorXd radii() const;

    /// Norm-domination factors g (all 1 for the supported norm families).
    Eigen::VectorXd domination_factors() const;

    bool is_feasible(const Tensor3& theta, double slack = 1e-9) const;

    /// Exact Euclidean (tensor-norm) projection onto the feasible set.
    Tensor3 project(const Tensor3& theta, ProjectionOps* ops = nullptr) const;

  private:
    std::vector<SliceConstraint> slices_;
};

/// Norm families covered by the domination property R(M) <= g k1 k2 ||M||_max
/// with g = 1: entry-wise L_{p,q}, Schatten-p, and operator-p norms.
struct NormSpec {
    enum class Family { entrywise_lpq, schatten, operator_p };

    Family family = Family::entrywise_lpq;
    double p = 1.0;
    double q = 1.0;  // used by entrywise_lpq only
};

double evaluate_norm(const Eigen::MatrixXd& m, const NormSpec& spec);

struct DominationReport {
    int trials = 0;
    int violations = 0;
    double max_ratio = 0.0;  // max over trials of R(M) / (k1 k2 ||M||_max)
};

/// Asserts the g = 1 domination factor on random matrices and reports the
/// largest observed ratio. Violations indicate an implementation bug.
DominationReport check_norm_domination(const NormSpec& spec, int k1, int k2, int trials,
                                       std::uint64_t seed = 20240802);

}  // namespace expfam
