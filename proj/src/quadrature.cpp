#include "expfam/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace expfam {

namespace {

QuadratureRule compute_gauss_legendre(int n) {
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev-based initial guess for the i-th root of P_n.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            // Evaluate P_n and P_n' by the three-term recurrence.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
    if (n < 1) throw InternalError("gauss_legendre: order must be positive");
    static std::map<int, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

std::vector<QuadPoint> tensor_grid(const SupportDomain& domain, int nodes_per_dim) {
    const int p = domain.dimension();
    double total = 1.0;
    for (int i = 0; i < p; ++i) {
        total *= nodes_per_dim;
        if (total > static_cast<double>(1 << 24))
            throw CapacityError("tensor_grid: nodes_per_dim^p exceeds 2^24 points");
    }

    const QuadratureRule& rule = gauss_legendre(nodes_per_dim);
    // Per-coordinate affine maps from [-1, 1] to [lo, hi].
    std::vector<Eigen::VectorXd> coord_nodes(p), coord_weights(p);
    for (int i = 0; i < p; ++i) {
        const double lo = domain.lower()[i];
        const double hi = domain.upper()[i];
        coord_nodes[i] = 0.5 * (hi - lo) * rule.nodes.array() + 0.5 * (hi + lo);
        coord_weights[i] = 0.5 * (hi - lo) * rule.weights;
    }

    std::vector<QuadPoint> grid;
    grid.reserve(static_cast<std::size_t>(total));
    std::vector<int> index(p, 0);
    Eigen::VectorXd x(p);
    while (true) {
        double w = 1.0;
        for (int i = 0; i < p; ++i) {
            x[i] = coord_nodes[i][index[i]];
            w *= coord_weights[i][index[i]];
        }
        if (domain.kind() == DomainKind::box || domain.contains(x)) grid.push_back({x, w});

        int i = p - 1;
        while (i >= 0 && ++index[i] == nodes_per_dim) index[i--] = 0;
        if (i < 0) break;
    }
    return grid;
}

}  // namespace expfam
