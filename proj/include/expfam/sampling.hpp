#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>

#include "expfam/statistics.hpp"

namespace expfam {

enum class SampleSource { grid_exact, metropolis, file };

/// Generator parameters recorded alongside every sample set so runs can be
/// reproduced from the sidecar file alone.
struct Provenance {
    SampleSource source = SampleSource::file;
    std::uint64_t seed = 0;
    int resolution = 0;        // grid sampler
    long burn_in = 0;          // metropolis
    long thinning = 1;         // metropolis
    double proposal_scale = 0.0;
    double acceptance_rate = 0.0;
    std::string warning;       // tuning warnings, empty when clean
};

/// n samples in R^p together with the support they live on. Immutable.
class SampleSet {
  public:
    SampleSet(Eigen::MatrixXd data, SupportDomain domain, Provenance provenance);

    long size() const { return data_.rows(); }
    int dimension() const { return static_cast<int>(data_.cols()); }
    const Eigen::MatrixXd& data() const { return data_; }
    Eigen::VectorXd row(long t) const { return data_.row(t).transpose(); }
    const SupportDomain& domain() const { return domain_; }
    const Provenance& provenance() const { return provenance_; }

  private:
    Eigen::MatrixXd data_;
    SupportDomain domain_;
    Provenance provenance_;
};

/// log of the unnormalized density: <<Theta, Phi(x)>> with raw statistics.
/// Centering shifts this by a Theta-dependent constant only, so density
/// ratios agree between raw and centered statistics.
double log_unnormalized_density(const StatisticFamily& family, const Tensor3& theta,
                                const Eigen::VectorXd& x);

/// Normalizing integral Z(Theta) over the support by tensor-product
/// quadrature, self-validated with 128- and 96-node rules (p <= 3).
/// Relative disagreement above 1e-7 raises AccuracyError.
double partition_function(const StatisticFamily& family, const Tensor3& theta);

/// Ground-truth i.i.d. sampler for p <= 2: discretizes the domain into
/// resolution^p cells, computes cell masses from the unnormalized density at
/// cell centers, draws cells by inverse CDF, and jitters uniformly within
/// the cell (re-drawn until inside a ball domain). Deterministic per seed.
SampleSet grid_exact_sampler(const StatisticFamily& family, const Tensor3& theta, int resolution,
                             long n, std::uint64_t seed);

struct MetropolisConfig {
    long burn_in = 10000;
    long thinning = 10;
    double proposal_scale = 0.0;  // <= 0: 0.25 x shortest bounding-box side
};

/// Random-walk Metropolis with Gaussian proposals, reflected at box
/// boundaries and rejected outside ball domains. Keeps every thinning-th
/// state after burn-in. An acceptance rate outside [0.05, 0.95] attaches a
/// tuning warning to the provenance; it is not fatal.
SampleSet metropolis_sampler(const StatisticFamily& family, const Tensor3& theta, long n,
                             const MetropolisConfig& config, std::uint64_t seed);

}  // namespace expfam
