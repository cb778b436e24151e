#include "expfam/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "expfam/quadrature.hpp"
#include "expfam/rng.hpp"

namespace expfam {

SampleSet::SampleSet(Eigen::MatrixXd data, SupportDomain domain, Provenance provenance)
    : data_(std::move(data)), domain_(std::move(domain)), provenance_(provenance) {
    if (data_.rows() < 1) throw SchemaError("sample set: need n >= 1");
    if (data_.cols() != domain_.dimension())
        throw SchemaError("sample set: column count does not match domain dimension");
    for (long t = 0; t < data_.rows(); ++t) {
        if (!domain_.contains(data_.row(t).transpose(), 1e-12)) {
            std::ostringstream msg;
            msg << "sample set: row " << t << " lies outside the domain";
            throw DomainViolationError(msg.str());
        }
    }
}

double log_unnormalized_density(const StatisticFamily& family, const Tensor3& theta,
                                const Eigen::VectorXd& x) {
    family.domain().require_contains(x, 1e-12);
    if (!(theta.shape() == family.shape()))
        throw InternalError("log_unnormalized_density: shape mismatch");
    return theta.flat().dot(family.evaluate_raw_unchecked(x).flat());
}

namespace {

double quadrature_partition(const StatisticFamily& family, const Tensor3& theta,
                            int nodes_per_dim) {
    double z = 0.0;
    for (const auto& qp : tensor_grid(family.domain(), nodes_per_dim))
        z += qp.weight * std::exp(theta.flat().dot(family.evaluate_raw_unchecked(qp.x).flat()));
    return z;
}

}  // namespace

double partition_function(const StatisticFamily& family, const Tensor3& theta) {
    if (family.dimension() > 3)
        throw UnsupportedConfigError("partition_function: quadrature oracle limited to p <= 3");
    const double z128 = quadrature_partition(family, theta, 128);
    const double z96 = quadrature_partition(family, theta, 96);
    const double rel = std::abs(z128 - z96) / std::max(std::abs(z128), 1e-300);
    if (rel > 1e-7) {
        std::ostringstream msg;
        msg << "partition_function: 128- and 96-node rules disagree (relative " << rel << ")";
        throw AccuracyError(msg.str());
    }
    return z128;
}

SampleSet grid_exact_sampler(const StatisticFamily& family, const Tensor3& theta, int resolution,
                             long n, std::uint64_t seed) {
    const SupportDomain& dom = family.domain();
    const int p = dom.dimension();
    if (p > 2) throw UnsupportedConfigError("grid_exact_sampler: p <= 2 only");
    if (resolution < 64) throw SchemaError("grid_exact_sampler: resolution must be >= 64");
    if (n < 1) throw SchemaError("grid_exact_sampler: need n >= 1");
    double cells_d = 1.0;
    for (int i = 0; i < p; ++i) cells_d *= resolution;
    if (cells_d > static_cast<double>(1 << 24))
        throw CapacityError("grid_exact_sampler: resolution^p exceeds 2^24 cells");
    const long cells = static_cast<long>(cells_d);

    const Eigen::VectorXd side = (dom.upper() - dom.lower()) / resolution;

    // Unnormalized log masses at cell centers; exp-shifted by the maximum
    // for overflow safety. Centers outside a ball get zero mass.
    std::vector<double> log_mass(static_cast<std::size_t>(cells), -std::numeric_limits<double>::infinity());
    Eigen::VectorXd center(p);
    double max_log = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < cells; ++c) {
        long rem = c;
        for (int i = p - 1; i >= 0; --i) {
            center[i] = dom.lower()[i] + (rem % resolution + 0.5) * side[i];
            rem /= resolution;
        }
        if (dom.kind() == DomainKind::ball && !dom.contains(center)) continue;
        const double lw = theta.flat().dot(family.evaluate_raw_unchecked(center).flat());
        log_mass[static_cast<std::size_t>(c)] = lw;
        max_log = std::max(max_log, lw);
    }

    std::vector<double> cumulative(static_cast<std::size_t>(cells));
    double total = 0.0;
    for (long c = 0; c < cells; ++c) {
        const double lw = log_mass[static_cast<std::size_t>(c)];
        total += std::isfinite(lw) ? std::exp(lw - max_log) : 0.0;
        cumulative[static_cast<std::size_t>(c)] = total;
    }
    if (!(total > 0.0)) throw NumericalError("grid_exact_sampler: zero total mass");

    Rng rng(seed);
    Eigen::MatrixXd data(n, p);
    Eigen::VectorXd x(p);
    for (long t = 0; t < n; ++t) {
        const double u = rng.uniform01() * total;
        const long cell =
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
        const long c = std::min(cell, cells - 1);
        long rem = c;
        long idx[2] = {0, 0};
        for (int i = p - 1; i >= 0; --i) {
            idx[i] = rem % resolution;
            rem /= resolution;
        }
        do {
            for (int i = 0; i < p; ++i)
                x[i] = dom.lower()[i] + (idx[i] + rng.uniform01()) * side[i];
        } while (!dom.contains(x));
        data.row(t) = x.transpose();
    }

    Provenance prov;
    prov.source = SampleSource::grid_exact;
    prov.seed = seed;
    prov.resolution = resolution;
    return SampleSet(std::move(data), dom, prov);
}

namespace {

/// Folds v into [lo, hi] by reflection at the boundaries.
double reflect_into(double v, double lo, double hi) {
    const double span = hi - lo;
    double y = std::fmod(v - lo, 2.0 * span);
    if (y < 0.0) y += 2.0 * span;
    return lo + (y <= span ? y : 2.0 * span - y);
}

}  // namespace

SampleSet metropolis_sampler(const StatisticFamily& family, const Tensor3& theta, long n,
                             const MetropolisConfig& config, std::uint64_t seed) {
    const SupportDomain& dom = family.domain();
    const int p = dom.dimension();
    if (n < 1) throw SchemaError("metropolis_sampler: need n >= 1");
    if (config.burn_in < 0 || config.thinning < 1)
        throw SchemaError("metropolis_sampler: burn_in >= 0 and thinning >= 1 required");

    const double scale =
        config.proposal_scale > 0.0 ? config.proposal_scale : 0.25 * dom.shortest_side();

    Rng rng(seed);
    Eigen::VectorXd state = 0.5 * (dom.lower() + dom.upper());
    if (dom.kind() == DomainKind::ball) state = dom.center();
    double state_logf = theta.flat().dot(family.evaluate_raw_unchecked(state).flat());

    Eigen::MatrixXd data(n, p);
    long kept = 0, proposals = 0, accepted = 0;
    const long total_steps = config.burn_in + n * config.thinning;
    Eigen::VectorXd proposal(p);
    for (long step = 1; step <= total_steps; ++step) {
        bool in_domain = true;
        for (int i = 0; i < p; ++i) proposal[i] = state[i] + scale * rng.normal();
        if (dom.kind() == DomainKind::box) {
            for (int i = 0; i < p; ++i)
                proposal[i] = reflect_into(proposal[i], dom.lower()[i], dom.upper()[i]);
        } else {
            in_domain = dom.contains(proposal);
        }
        ++proposals;
        if (in_domain) {
            const double logf = theta.flat().dot(family.evaluate_raw_unchecked(proposal).flat());
            if (logf >= state_logf || rng.uniform01() < std::exp(logf - state_logf)) {
                state = proposal;
                state_logf = logf;
                ++accepted;
            }
        }
        if (step > config.burn_in && (step - config.burn_in) % config.thinning == 0)
            data.row(kept++) = state.transpose();
    }

    Provenance prov;
    prov.source = SampleSource::metropolis;
    prov.seed = seed;
    prov.burn_in = config.burn_in;
    prov.thinning = config.thinning;
    prov.proposal_scale = scale;
    prov.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposals);
    if (prov.acceptance_rate < 0.05 || prov.acceptance_rate > 0.95) {
        std::ostringstream msg;
        msg << "acceptance rate " << prov.acceptance_rate
            << " outside [0.05, 0.95]; adjust proposal_scale";
        prov.warning = msg.str();
    }
    return SampleSet(std::move(data), dom, prov);
}

}  // namespace expfam
