#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "expfam/domain.hpp"
#include "expfam/tensor.hpp"

namespace expfam {

enum class FamilyKind { polynomial, trigonometric, mixed };

enum class TermLayout { graded_lex, quadratic_matrix };

/// One entry of the natural statistic tensor: a monomial prod_i x_i^{e_i},
/// or sin/cos of an integer frequency combination sum_i f_i x_i.
struct Term {
    enum class Kind { monomial, sine, cosine };

    Kind kind = Kind::monomial;
    Eigen::VectorXi index;  // exponents (monomial) or frequencies (trig), length p

    double evaluate(const Eigen::VectorXd& x) const;
    int total_degree() const { return index.sum(); }

    /// sup_{x in domain} |value|; used for the phi_max bound.
    double sup_abs(const SupportDomain& domain) const;

    bool operator==(const Term&) const = default;
};

/// A natural statistic family: the term map from tensor positions (i, j, l)
/// to monomial / trigonometric terms, together with the support the family
/// is declared on. Immutable after construction; safe for concurrent reads.
class StatisticFamily {
  public:
    /// All monomials with total degree in [1, degree] (or [0, degree] with
    /// include_constant), in graded lexicographic order, filled row-major
    /// into slices. Default shape is (#terms, 1, 1).
    static StatisticFamily polynomial(SupportDomain domain, int degree,
                                      std::optional<TensorShape> shape = std::nullopt,
                                      bool include_constant = false);

    /// sin and cos of every nonzero frequency vector with entries in
    /// [0, max_frequency], ordered by graded-lex frequency vector with the
    /// sine listed before the cosine.
    static StatisticFamily trigonometric(SupportDomain domain, int max_frequency,
                                         std::optional<TensorShape> shape = std::nullopt);

    /// Polynomial terms followed by trigonometric terms in the same slice.
    static StatisticFamily mixed(SupportDomain domain, int degree, int max_frequency,
                                 std::optional<TensorShape> shape = std::nullopt);

    /// The (p+1) x (p+1) symmetric layout Phi(x) = xt xt^T with
    /// xt = (1, x_1, ..., x_p). This is the layout nuclear-norm slice bounds
    /// are proven for; it is not minimal as a flat term list (constant entry
    /// and symmetric duplicates), so it is rejected by the fit gate and used
    /// for bound verification.
    static StatisticFamily quadratic_matrix(SupportDomain domain);

    /// Replicates the slice structure k3 times with identical terms
    /// (shared statistics, e.g. sparse-plus-low-rank). Minimality for such
    /// families is asserted at the summed-slice level.
    StatisticFamily with_shared_slices(int k3) const;

    FamilyKind kind() const { return kind_; }
    TermLayout layout() const { return layout_; }
    int degree() const { return degree_; }
    int max_frequency() const { return max_frequency_; }
    const TensorShape& shape() const { return shape_; }
    const SupportDomain& domain() const { return domain_; }
    int dimension() const { return domain_.dimension(); }
    bool include_constant() const { return include_constant_; }
    bool has_shared_slices() const { return shared_slices_; }

    const std::vector<Term>& terms() const { return terms_; }
    const Term& term_at(int i, int j, int l) const;

    /// Raw statistic tensor Phi(x). The point must lie on the declared
    /// support (1e-12 slack); evaluate_raw_unchecked skips the test for
    /// hot loops whose inputs are generated inside the domain.
    Tensor3 evaluate_raw(const Eigen::VectorXd& x) const;
    Tensor3 evaluate_raw_unchecked(const Eigen::VectorXd& x) const;

  private:
    StatisticFamily(FamilyKind kind, TermLayout layout, SupportDomain domain, int degree,
                    int max_frequency, TensorShape shape, std::vector<Term> terms,
                    bool include_constant);

    FamilyKind kind_;
    TermLayout layout_;
    SupportDomain domain_;
    int degree_ = 0;
    int max_frequency_ = 0;
    TensorShape shape_;
    std::vector<Term> terms_;  // flat order, one per tensor position
    bool include_constant_ = false;
    bool shared_slices_ = false;
};

/// Uniform-distribution means of the raw statistics over the support.
struct CenteringTable {
    enum class Method { closed_form, quadrature };

    Tensor3 means;
    Method method = Method::closed_form;
    double quadrature_error = 0.0;  // 0 when closed form
};

/// Closed-form per-coordinate moments for polynomial/trig terms on boxes;
/// tensor-product Gauss-Legendre (64 nodes per dimension, 96-node error
/// estimate) elsewhere. Ball centering is limited to p <= 3 and quadrature
/// in general to p <= 4.
CenteringTable centering_constants(const StatisticFamily& family);

/// phibar(x) = Phi(x) - means, entrywise.
Tensor3 evaluate_centered(const StatisticFamily& family, const CenteringTable& table,
                          const Eigen::VectorXd& x);

/// Bound on ||phibar(x)||_max over the support: twice the largest per-term
/// sup. Equals 2 b^l for degree-l polynomials on [0, b]^p with b >= 1, 2 for
/// trigonometric families, and max{2, 2 b^l} for mixed families.
double phi_max_bound(const StatisticFamily& family);

enum class NormKind;  // parameter_space.hpp
class ConstraintSpec;

/// Per-slice dual-norm bounds d_i of the centered statistics, matching the
/// constraint norms: the max-norm bound phi_max for L11 slices, and the
/// spectral bound 2(1 + b^2) for nuclear slices with the quadratic-matrix
/// layout on a centered ball of radius b. Combinations without a proven
/// bound raise UnsupportedConfigError; callers may override manually.
Eigen::VectorXd dual_norm_bound(const StatisticFamily& family, const ConstraintSpec& constraints);

struct MinimalityReport {
    bool minimal = false;
    bool summed_slice_level = false;  // shared-slice families
    double singular_ratio = 0.0;      // sigma_min / sigma_max of the probe matrix
};

/// Numerical minimality probe: no nonzero tensor U may make <<U, Phi(x)>>
/// constant on the support. Samples random points and checks that the term
/// values together with the constant function are linearly independent.
/// Shared-slice families are probed at the summed-slice level.
MinimalityReport check_minimality(const StatisticFamily& family, int num_points = 0,
                                  std::uint64_t seed = 20240801);

}  // namespace expfam
