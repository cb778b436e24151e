#pragma once

#include <Eigen/Core>

#include <vector>

#include "expfam/domain.hpp"

namespace expfam {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

/// Rule of the given order, computed by Newton iteration on Legendre
/// polynomials and cached. Accurate to ~1e-15 for n <= 256.
const QuadratureRule& gauss_legendre(int n);

struct QuadPoint {
    Eigen::VectorXd x;
    double weight;
};

/// Tensor-product Gauss-Legendre grid over the domain. For a ball the grid
/// covers the bounding box and points outside the ball are dropped, i.e. the
/// integral is taken against the ball indicator; the smooth-integrand
/// accuracy of Gauss-Legendre does not apply there, which is why ball-backed
/// quadrature reports its error estimate instead of assuming one.
/// Throws CapacityError when nodes_per_dim^p exceeds 2^24 points.
std::vector<QuadPoint> tensor_grid(const SupportDomain& domain, int nodes_per_dim);

}  // namespace expfam
