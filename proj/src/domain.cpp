#include "expfam/domain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace expfam {

SupportDomain SupportDomain::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
        throw SchemaError("box domain: lower/upper must be non-empty and equal length");
    for (int i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i])) {
            std::ostringstream msg;
            msg << "box domain: need lower < upper in coordinate " << i << " (got [" << lower[i]
                << ", " << upper[i] << "])";
            throw SchemaError(msg.str());
        }
    }
    SupportDomain d;
    d.kind_ = DomainKind::box;
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    return d;
}

SupportDomain SupportDomain::cube(int p, double lo, double hi) {
    return box(Eigen::VectorXd::Constant(p, lo), Eigen::VectorXd::Constant(p, hi));
}

SupportDomain SupportDomain::ball(Eigen::VectorXd center, double radius) {
    if (center.size() == 0) throw SchemaError("ball domain: empty center");
    if (!(radius > 0.0)) throw SchemaError("ball domain: radius must be positive");
    SupportDomain d;
    d.kind_ = DomainKind::ball;
    d.center_ = std::move(center);
    d.radius_ = radius;
    d.lower_ = d.center_.array() - radius;
    d.upper_ = d.center_.array() + radius;
    return d;
}

double SupportDomain::volume() const {
    if (kind_ == DomainKind::box) return (upper_ - lower_).prod();
    // Unit-ball volume pi^{p/2} / Gamma(p/2 + 1), scaled by radius^p.
    const double p = static_cast<double>(dimension());
    const double unit = std::pow(std::numbers::pi, p / 2.0) / std::tgamma(p / 2.0 + 1.0);
    return unit * std::pow(radius_, p);
}

bool SupportDomain::contains(const Eigen::VectorXd& x, double slack) const {
    if (x.size() != lower_.size()) return false;
    if (kind_ == DomainKind::box) {
        return (x.array() >= lower_.array() - slack).all() &&
               (x.array() <= upper_.array() + slack).all();
    }
    return (x - center_).norm() <= radius_ + slack;
}

void SupportDomain::require_contains(const Eigen::VectorXd& x, double slack) const {
    if (!contains(x, slack)) throw DomainViolationError("point lies outside the support domain");
}

bool SupportDomain::operator==(const SupportDomain& other) const {
    if (kind_ != other.kind_ || dimension() != other.dimension()) return false;
    if (kind_ == DomainKind::box) return lower_ == other.lower_ && upper_ == other.upper_;
    return center_ == other.center_ && radius_ == other.radius_;
}

}  // namespace expfam
