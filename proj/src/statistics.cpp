#include "expfam/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>

#include <Eigen/SVD>

#include "expfam/parameter_space.hpp"
#include "expfam/quadrature.hpp"
#include "expfam/rng.hpp"

namespace expfam {

double Term::evaluate(const Eigen::VectorXd& x) const {
    if (kind == Kind::monomial) {
        double v = 1.0;
        for (int i = 0; i < index.size(); ++i)
            for (int e = 0; e < index[i]; ++e) v *= x[i];
        return v;
    }
    double arg = 0.0;
    for (int i = 0; i < index.size(); ++i) arg += index[i] * x[i];
    return kind == Kind::sine ? std::sin(arg) : std::cos(arg);
}

double Term::sup_abs(const SupportDomain& domain) const {
    if (kind != Kind::monomial) return 1.0;
    double v = 1.0;
    for (int i = 0; i < index.size(); ++i) {
        if (index[i] == 0) continue;
        // |x_i| <= max(|lo_i|, |hi_i|) on the bounding box of either domain kind.
        const double m = std::max(std::abs(domain.lower()[i]), std::abs(domain.upper()[i]));
        v *= std::pow(m, index[i]);
    }
    return v;
}

namespace {

/// Exponent vectors with total degree in [min_degree, max_degree], graded
/// lexicographic: ascending total degree, lexicographically descending
/// within a degree (x1^2 before x1 x2 before x2^2).
std::vector<Eigen::VectorXi> graded_lex_exponents(int p, int min_degree, int max_degree) {
    std::vector<Eigen::VectorXi> out;
    for (int deg = min_degree; deg <= max_degree; ++deg) {
        // Compositions of deg into p parts in lex-descending order.
        Eigen::VectorXi e = Eigen::VectorXi::Zero(p);
        std::function<void(int, int)> rec = [&](int coord, int remaining) {
            if (coord == p - 1) {
                e[coord] = remaining;
                out.push_back(e);
                return;
            }
            for (int v = remaining; v >= 0; --v) {
                e[coord] = v;
                rec(coord + 1, remaining - v);
            }
        };
        rec(0, deg);
    }
    return out;
}

std::vector<Eigen::VectorXi> nonzero_frequency_vectors(int p, int max_frequency) {
    // All vectors in {0..max_frequency}^p except zero, graded-lex like the
    // monomials. Each will carry a sine and a cosine term.
    std::vector<Eigen::VectorXi> out;
    for (int deg = 1; deg <= p * max_frequency; ++deg) {
        std::function<void(int, int, Eigen::VectorXi&)> rec = [&](int coord, int remaining,
                                                                  Eigen::VectorXi& e) {
            if (coord == p - 1) {
                if (remaining <= max_frequency) {
                    e[coord] = remaining;
                    out.push_back(e);
                }
                return;
            }
            for (int v = std::min(remaining, max_frequency); v >= 0; --v) {
                e[coord] = v;
                rec(coord + 1, remaining - v, e);
            }
        };
        Eigen::VectorXi e = Eigen::VectorXi::Zero(p);
        rec(0, deg, e);
    }
    return out;
}

TensorShape resolve_shape(std::optional<TensorShape> requested, long num_terms,
                          const char* what) {
    if (!requested) return TensorShape{static_cast<int>(num_terms), 1, 1};
    if (requested->size() != num_terms) {
        std::ostringstream msg;
        msg << what << ": shape " << requested->k1 << "x" << requested->k2 << "x" << requested->k3
            << " does not hold " << num_terms << " terms";
        throw SchemaError(msg.str());
    }
    return *requested;
}

}  // namespace

StatisticFamily::StatisticFamily(FamilyKind kind, TermLayout layout, SupportDomain domain,
                                 int degree, int max_frequency, TensorShape shape,
                                 std::vector<Term> terms, bool include_constant)
    : kind_(kind),
      layout_(layout),
      domain_(std::move(domain)),
      degree_(degree),
      max_frequency_(max_frequency),
      shape_(shape),
      terms_(std::move(terms)),
      include_constant_(include_constant) {
    if (shape_.k1 < 1 || shape_.k2 < 1 || shape_.k3 < 1)
        throw SchemaError("statistic family: shape entries must be positive");
    if (shape_.k3 > 2)
        throw UnsupportedConfigError("statistic family: only k3 in {1, 2} is supported");
    if (static_cast<long>(terms_.size()) != shape_.size())
        throw InternalError("statistic family: term map is not a bijection with the shape");
}

StatisticFamily StatisticFamily::polynomial(SupportDomain domain, int degree,
                                            std::optional<TensorShape> shape,
                                            bool include_constant) {
    if (degree < 0) throw SchemaError("polynomial family: degree must be >= 0");
    const int min_degree = include_constant ? 0 : 1;
    auto exponents = graded_lex_exponents(domain.dimension(), min_degree, degree);
    if (exponents.empty()) throw SchemaError("polynomial family: no terms (degree 0 without constant)");
    std::vector<Term> terms;
    terms.reserve(exponents.size());
    for (auto& e : exponents) terms.push_back(Term{Term::Kind::monomial, std::move(e)});
    TensorShape s = resolve_shape(shape, static_cast<long>(terms.size()), "polynomial family");
    return StatisticFamily(FamilyKind::polynomial, TermLayout::graded_lex, std::move(domain),
                           degree, 0, s, std::move(terms), include_constant);
}

StatisticFamily StatisticFamily::trigonometric(SupportDomain domain, int max_frequency,
                                               std::optional<TensorShape> shape) {
    if (max_frequency < 1) throw SchemaError("trigonometric family: max frequency must be >= 1");
    auto freqs = nonzero_frequency_vectors(domain.dimension(), max_frequency);
    std::vector<Term> terms;
    terms.reserve(2 * freqs.size());
    for (auto& f : freqs) {
        terms.push_back(Term{Term::Kind::sine, f});
        terms.push_back(Term{Term::Kind::cosine, f});
    }
    TensorShape s = resolve_shape(shape, static_cast<long>(terms.size()), "trigonometric family");
    return StatisticFamily(FamilyKind::trigonometric, TermLayout::graded_lex, std::move(domain), 0,
                           max_frequency, s, std::move(terms), false);
}

StatisticFamily StatisticFamily::mixed(SupportDomain domain, int degree, int max_frequency,
                                       std::optional<TensorShape> shape) {
    auto poly = polynomial(domain, degree);
    auto trig = trigonometric(domain, max_frequency);
    std::vector<Term> terms = poly.terms();
    terms.insert(terms.end(), trig.terms().begin(), trig.terms().end());
    TensorShape s = resolve_shape(shape, static_cast<long>(terms.size()), "mixed family");
    return StatisticFamily(FamilyKind::mixed, TermLayout::graded_lex, std::move(domain), degree,
                           max_frequency, s, std::move(terms), false);
}

StatisticFamily StatisticFamily::quadratic_matrix(SupportDomain domain) {
    const int p = domain.dimension();
    std::vector<Term> terms;
    terms.reserve(static_cast<std::size_t>(p + 1) * (p + 1));
    for (int i = 0; i <= p; ++i) {
        for (int j = 0; j <= p; ++j) {
            Eigen::VectorXi e = Eigen::VectorXi::Zero(p);
            if (i > 0) e[i - 1] += 1;
            if (j > 0) e[j - 1] += 1;
            terms.push_back(Term{Term::Kind::monomial, std::move(e)});
        }
    }
    return StatisticFamily(FamilyKind::polynomial, TermLayout::quadratic_matrix, std::move(domain),
                           2, 0, TensorShape{p + 1, p + 1, 1}, std::move(terms), true);
}

StatisticFamily StatisticFamily::with_shared_slices(int k3) const {
    if (shape_.k3 != 1) throw SchemaError("with_shared_slices: base family must have k3 = 1");
    if (k3 < 2 || k3 > 2) throw UnsupportedConfigError("with_shared_slices: only k3 = 2 supported");
    std::vector<Term> terms = terms_;
    for (int l = 1; l < k3; ++l) terms.insert(terms.end(), terms_.begin(), terms_.end());
    StatisticFamily out(kind_, layout_, domain_, degree_, max_frequency_,
                        TensorShape{shape_.k1, shape_.k2, k3}, std::move(terms),
                        include_constant_);
    out.shared_slices_ = true;
    return out;
}

const Term& StatisticFamily::term_at(int i, int j, int l) const {
    const long flat = (static_cast<long>(l) * shape_.k1 + i) * shape_.k2 + j;
    return terms_[static_cast<std::size_t>(flat)];
}

Tensor3 StatisticFamily::evaluate_raw(const Eigen::VectorXd& x) const {
    domain_.require_contains(x, 1e-12);
    return evaluate_raw_unchecked(x);
}

Tensor3 StatisticFamily::evaluate_raw_unchecked(const Eigen::VectorXd& x) const {
    Tensor3 out(shape_);
    for (std::size_t t = 0; t < terms_.size(); ++t)
        out.flat()[static_cast<long>(t)] = terms_[t].evaluate(x);
    return out;
}

namespace {

/// E_U[x^e] over [lo, hi] = (hi^{e+1} - lo^{e+1}) / ((e+1)(hi - lo)).
double uniform_monomial_moment(double lo, double hi, int e) {
    if (e == 0) return 1.0;
    return (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / ((e + 1) * (hi - lo));
}

/// E_U[e^{i f x}] over [lo, hi].
std::complex<double> uniform_phase_moment(double lo, double hi, int f) {
    if (f == 0) return {1.0, 0.0};
    const std::complex<double> i(0.0, 1.0);
    return (std::exp(i * (f * hi)) - std::exp(i * (f * lo))) / (i * (f * (hi - lo)));
}

double closed_form_mean(const Term& term, const SupportDomain& box) {
    if (term.kind == Term::Kind::monomial) {
        double m = 1.0;
        for (int c = 0; c < term.index.size(); ++c)
            m *= uniform_monomial_moment(box.lower()[c], box.upper()[c], term.index[c]);
        return m;
    }
    std::complex<double> phase(1.0, 0.0);
    for (int c = 0; c < term.index.size(); ++c)
        phase *= uniform_phase_moment(box.lower()[c], box.upper()[c], term.index[c]);
    return term.kind == Term::Kind::sine ? phase.imag() : phase.real();
}

Tensor3 quadrature_means(const StatisticFamily& family, int nodes_per_dim) {
    const auto grid = tensor_grid(family.domain(), nodes_per_dim);
    Tensor3 sum(family.shape());
    double mass = 0.0;
    for (const auto& qp : grid) {
        const Tensor3 raw = family.evaluate_raw_unchecked(qp.x);
        sum.flat() += qp.weight * raw.flat();
        mass += qp.weight;
    }
    return Tensor3(family.shape(), sum.flat() / mass);
}

}  // namespace

CenteringTable centering_constants(const StatisticFamily& family) {
    CenteringTable table;
    if (family.domain().kind() == DomainKind::box) {
        table.method = CenteringTable::Method::closed_form;
        table.quadrature_error = 0.0;
        table.means = Tensor3(family.shape());
        for (std::size_t t = 0; t < family.terms().size(); ++t)
            table.means.flat()[static_cast<long>(t)] =
                closed_form_mean(family.terms()[t], family.domain());
        return table;
    }

    const int p = family.dimension();
    if (p > 3)
        throw UnsupportedConfigError("centering_constants: ball domains supported for p <= 3 only");
    table.method = CenteringTable::Method::quadrature;
    table.means = quadrature_means(family, 64);
    const Tensor3 check = quadrature_means(family, 96);
    table.quadrature_error = (table.means.flat() - check.flat()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, table.means.flat().cwiseAbs().maxCoeff());
    if (table.quadrature_error > 1e-2 * scale) {
        std::ostringstream msg;
        msg << "centering_constants: quadrature error estimate " << table.quadrature_error
            << " misses the accuracy target " << 1e-2 * scale;
        throw AccuracyError(msg.str());
    }
    return table;
}

Tensor3 evaluate_centered(const StatisticFamily& family, const CenteringTable& table,
                          const Eigen::VectorXd& x) {
    if (!(table.means.shape() == family.shape()))
        throw InternalError("evaluate_centered: centering table shape mismatch");
    Tensor3 raw = family.evaluate_raw(x);
    raw.flat() -= table.means.flat();
    return raw;
}

double phi_max_bound(const StatisticFamily& family) {
    double sup = 0.0;
    for (const auto& term : family.terms()) sup = std::max(sup, term.sup_abs(family.domain()));
    if (!(sup > 0.0)) throw UnsupportedConfigError("phi_max_bound: degenerate statistic family");
    return 2.0 * sup;
}

Eigen::VectorXd dual_norm_bound(const StatisticFamily& family, const ConstraintSpec& constraints) {
    if (constraints.k3() != family.shape().k3)
        throw SchemaError("dual_norm_bound: constraint count does not match k3");
    Eigen::VectorXd d(constraints.k3());
    for (int l = 0; l < constraints.k3(); ++l) {
        switch (constraints.slice(l).norm) {
            case NormKind::l11:
                // Dual of L11 is the max norm, bounded by phi_max.
                d[l] = phi_max_bound(family);
                break;
            case NormKind::nuclear: {
                // Spectral bound proven for Phi = xt xt^T on a centered ball.
                if (family.layout() != TermLayout::quadratic_matrix ||
                    family.domain().kind() != DomainKind::ball ||
                    family.domain().center().cwiseAbs().maxCoeff() != 0.0)
                    throw UnsupportedConfigError(
                        "dual_norm_bound: no proven spectral bound for this nuclear slice; "
                        "override the bound manually if one is known");
                const double b = family.domain().radius();
                d[l] = 2.0 * (1.0 + b * b);
                break;
            }
        }
    }
    return d;
}

MinimalityReport check_minimality(const StatisticFamily& family, int num_points,
                                  std::uint64_t seed) {
    MinimalityReport report;
    report.summed_slice_level = family.has_shared_slices();

    // Shared-slice families are probed on the distinct (slice-1) terms.
    const long k12 = static_cast<long>(family.shape().k1) * family.shape().k2;
    const long cols = (report.summed_slice_level ? k12 : family.shape().size()) + 1;
    const int rows = num_points > 0 ? num_points : static_cast<int>(4 * cols + 16);

    Rng rng(seed);
    const auto& dom = family.domain();
    Eigen::MatrixXd probe(rows, cols);
    Eigen::VectorXd x(dom.dimension());
    for (int r = 0; r < rows; ++r) {
        do {
            for (int c = 0; c < x.size(); ++c) x[c] = rng.uniform(dom.lower()[c], dom.upper()[c]);
        } while (!dom.contains(x));
        const Tensor3 raw = family.evaluate_raw_unchecked(x);
        probe.row(r).head(cols - 1) = raw.flat().head(cols - 1);
        probe(r, cols - 1) = 1.0;  // the constant function
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(probe);
    const auto& sv = svd.singularValues();
    report.singular_ratio = sv[sv.size() - 1] / sv[0];
    report.minimal = report.singular_ratio > 1e-8;
    return report;
}

}  // namespace expfam
