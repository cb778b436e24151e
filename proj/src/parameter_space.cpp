#include "expfam/parameter_space.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "expfam/rng.hpp"

namespace expfam {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* where) {
    if (!m.allFinite()) throw NumericalError(std::string(where) + ": non-finite input");
}

/// Projection of v onto the simplex-scaled L1 ball {u : ||u||_1 <= r},
/// assuming the caller passes |v| and applies signs afterwards. Sort-based
/// threshold (Duchi et al. style); counts loop operations when asked.
Eigen::VectorXd project_abs_to_l1(Eigen::VectorXd v, double r, ProjectionOps* ops) {
    const long m = v.size();
    std::uint64_t local_ops = 0;

    double total = 0.0;
    for (long i = 0; i < m; ++i) total += v[i];
    local_ops += static_cast<std::uint64_t>(m);

    if (total > r) {
        Eigen::VectorXd sorted = v;
        std::sort(sorted.data(), sorted.data() + m, [&](double a, double b) {
            ++local_ops;
            return a > b;
        });
        double cumulative = 0.0;
        double tau = 0.0;
        for (long i = 0; i < m; ++i) {
            cumulative += sorted[i];
            const double candidate = (cumulative - r) / static_cast<double>(i + 1);
            if (sorted[i] - candidate > 0.0) tau = candidate;
            ++local_ops;
        }
        for (long i = 0; i < m; ++i) v[i] = std::max(v[i] - tau, 0.0);
        local_ops += static_cast<std::uint64_t>(m);
    }
    if (ops) ops->ops += local_ops;
    return v;
}

}  // namespace

double slice_norm(const Eigen::MatrixXd& m, NormKind kind) {
    require_finite(m, "slice_norm");
    if (kind == NormKind::l11) return m.cwiseAbs().sum();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().sum();
}

double dual_norm(const Eigen::MatrixXd& m, NormKind kind) {
    require_finite(m, "dual_norm");
    if (kind == NormKind::l11) return m.cwiseAbs().maxCoeff();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()[0];
}

Eigen::MatrixXd project_l11_ball(const Eigen::MatrixXd& m, double r, ProjectionOps* ops) {
    if (!(r > 0.0)) throw SchemaError("project_l11_ball: radius must be positive");
    require_finite(m, "project_l11_ball");

    Eigen::VectorXd flat(m.size());
    long k = 0;
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j) flat[k++] = m(i, j);

    const Eigen::VectorXd projected = project_abs_to_l1(flat.cwiseAbs(), r, ops);
    Eigen::MatrixXd out(m.rows(), m.cols());
    k = 0;
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j, ++k)
            out(i, j) = flat[k] >= 0.0 ? projected[k] : -projected[k];
    return out;
}

Eigen::MatrixXd project_nuclear_ball(const Eigen::MatrixXd& m, double r, ProjectionOps* ops) {
    if (!(r > 0.0)) throw SchemaError("project_nuclear_ball: radius must be positive");
    require_finite(m, "project_nuclear_ball");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericalError("project_nuclear_ball: SVD did not converge");
    Eigen::VectorXd sigma = svd.singularValues();
    if (sigma.sum() <= r) return m;

    Eigen::MatrixXd u = svd.matrixU();
    Eigen::MatrixXd v = svd.matrixV();
    // Fix the sign of each singular pair: largest-magnitude entry of the left
    // vector positive.
    for (long c = 0; c < u.cols(); ++c) {
        long arg = 0;
        u.col(c).cwiseAbs().maxCoeff(&arg);
        if (u(arg, c) < 0.0) {
            u.col(c) = -u.col(c);
            v.col(c) = -v.col(c);
        }
    }

    const Eigen::VectorXd clipped = project_abs_to_l1(sigma, r, ops);
    if (ops) ops->ops += static_cast<std::uint64_t>(m.rows()) * m.cols() * sigma.size();
    return u * clipped.asDiagonal() * v.transpose();
}

ConstraintSpec::ConstraintSpec(std::vector<SliceConstraint> slices) : slices_(std::move(slices)) {
    if (slices_.empty()) throw SchemaError("constraint spec: at least one slice required");
    for (const auto& s : slices_)
        if (!(s.radius > 0.0)) throw SchemaError("constraint spec: radii must be positive");
}

ConstraintSpec ConstraintSpec::uniform(NormKind kind, double radius, int k3) {
    return ConstraintSpec(std::vector<SliceConstraint>(static_cast<std::size_t>(k3),
                                                       SliceConstraint{kind, radius}));
}

Eigen::VectorXd ConstraintSpec::radii() const {
    Eigen::VectorXd r(k3());
    for (int l = 0; l < k3(); ++l) r[l] = slices_[static_cast<std::size_t>(l)].radius;
    return r;
}

Eigen::VectorXd ConstraintSpec::domination_factors() const {
    return Eigen::VectorXd::Ones(k3());
}

bool ConstraintSpec::is_feasible(const Tensor3& theta, double slack) const {
    if (theta.shape().k3 != k3()) throw InternalError("is_feasible: k3 mismatch");
    for (int l = 0; l < k3(); ++l) {
        const auto& c = slices_[static_cast<std::size_t>(l)];
        if (slice_norm(theta.slice(l), c.norm) > c.radius + slack) return false;
    }
    return true;
}

Tensor3 ConstraintSpec::project(const Tensor3& theta, ProjectionOps* ops) const {
    if (theta.shape().k3 != k3()) throw InternalError("project: k3 mismatch");
    Tensor3 out = theta;
    for (int l = 0; l < k3(); ++l) {
        const auto& c = slices_[static_cast<std::size_t>(l)];
        const Eigen::MatrixXd slice = theta.slice(l);
        out.set_slice(l, c.norm == NormKind::l11 ? project_l11_ball(slice, c.radius, ops)
                                                 : project_nuclear_ball(slice, c.radius, ops));
    }
    return out;
}

double evaluate_norm(const Eigen::MatrixXd& m, const NormSpec& spec) {
    require_finite(m, "evaluate_norm");
    switch (spec.family) {
        case NormSpec::Family::entrywise_lpq: {
            if (spec.p < 1.0 || spec.q < 1.0)
                throw SchemaError("entrywise L_{p,q} norm requires p, q >= 1");
            double outer = 0.0;
            for (long j = 0; j < m.cols(); ++j) {
                double inner = 0.0;
                for (long i = 0; i < m.rows(); ++i) inner += std::pow(std::abs(m(i, j)), spec.p);
                outer += std::pow(inner, spec.q / spec.p);
            }
            return std::pow(outer, 1.0 / spec.q);
        }
        case NormSpec::Family::schatten: {
            if (spec.p < 1.0) throw SchemaError("Schatten norm requires p >= 1");
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
            double sum = 0.0;
            for (long i = 0; i < svd.singularValues().size(); ++i)
                sum += std::pow(svd.singularValues()[i], spec.p);
            return std::pow(sum, 1.0 / spec.p);
        }
        case NormSpec::Family::operator_p: {
            // Computable cases: p = 1 (max column sum), p = 2 (spectral),
            // p = inf (max row sum).
            if (spec.p == 1.0) return m.cwiseAbs().colwise().sum().maxCoeff();
            if (spec.p == 2.0) {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
                return svd.singularValues()[0];
            }
            if (std::isinf(spec.p)) return m.cwiseAbs().rowwise().sum().maxCoeff();
            throw UnsupportedConfigError("operator-p norm implemented for p in {1, 2, inf}");
        }
    }
    throw InternalError("evaluate_norm: unreachable");
}

DominationReport check_norm_domination(const NormSpec& spec, int k1, int k2, int trials,
                                       std::uint64_t seed) {
    DominationReport report;
    report.trials = trials;
    Rng rng(seed);
    for (int t = 0; t < trials; ++t) {
        Eigen::MatrixXd m(k1, k2);
        for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
        const double bound = static_cast<double>(k1) * k2 * m.cwiseAbs().maxCoeff();
        const double ratio = evaluate_norm(m, spec) / bound;
        report.max_ratio = std::max(report.max_ratio, ratio);
        if (ratio > 1.0 + 1e-12) ++report.violations;
    }
    return report;
}

}  // namespace expfam
