#pragma once

#include <Eigen/Core>

#include "expfam/errors.hpp"

namespace expfam {

enum class DomainKind { box, ball };

/// Bounded support of the random vector: an axis-aligned box of per-coordinate
/// intervals, or a Euclidean ball. Both have strictly positive, closed-form
/// volume.
class SupportDomain {
  public:
    static SupportDomain box(Eigen::VectorXd lower, Eigen::VectorXd upper);

    /// Box [lo, hi]^p.
    static SupportDomain cube(int p, double lo, double hi);

    static SupportDomain ball(Eigen::VectorXd center, double radius);

    DomainKind kind() const { return kind_; }
    int dimension() const { return static_cast<int>(lower_.size()); }

    // Box accessors (also the bounding box of a ball).
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }

    // Ball accessors; only valid when kind() == ball.
    const Eigen::VectorXd& center() const { return center_; }
    double radius() const { return radius_; }

    double volume() const;
    bool contains(const Eigen::VectorXd& x, double slack = 0.0) const;
    void require_contains(const Eigen::VectorXd& x, double slack = 0.0) const;

    double shortest_side() const { return (upper_ - lower_).minCoeff(); }

    bool operator==(const SupportDomain& other) const;

  private:
    SupportDomain() = default;

    DomainKind kind_ = DomainKind::box;
    Eigen::VectorXd lower_, upper_;  // bounding box in both cases
    Eigen::VectorXd center_;
    double radius_ = 0.0;
};

}  // namespace expfam
