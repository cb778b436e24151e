#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "expfam/experiments.hpp"
#include "expfam/optimizer.hpp"
#include "expfam/sampling.hpp"

namespace expfam {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Descriptors
// ---------------------------------------------------------------------------

json domain_to_json(const SupportDomain& domain);
SupportDomain domain_from_json(const json& j, const std::string& path);

/// {"kind","degree","frequencies","shape":[k1,k2,k3],"domain":{...}}, plus
/// "layout" and "include_constant" for the non-default layouts.
json family_to_json(const StatisticFamily& family);
StatisticFamily family_from_json(const json& j, const std::string& path);

/// [{"norm":"l11","radius":1.5}, ...]
json constraints_to_json(const ConstraintSpec& spec);
ConstraintSpec constraints_from_json(const json& j, const std::string& path);

/// Flat row-major-within-slice entry list (the Tensor3 flat layout).
json tensor_to_json(const Tensor3& t);
Tensor3 tensor_from_json(const json& j, TensorShape shape, const std::string& path);

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct GenerateConfig {
    std::string sampler = "grid";  // "grid" | "metropolis"
    long n = 0;
    int resolution = 2048;
    MetropolisConfig metropolis;
};

struct SampleSourceConfig {
    std::optional<GenerateConfig> generate;
    std::optional<std::string> file;  // CSV with sidecar JSON
};

struct FitSection {
    FitConfig config;
    std::string step_rule = "lemma";  // "lemma" | "empirical"
    bool epsilon_explicit = false;    // config carried an epsilon of its own
};

struct DiagnoseSection {
    std::vector<std::string> checks;  // default: all applicable
    long concentration_n = 20000;
    int concentration_trials = 50;
};

struct SweepSection {
    std::vector<long> ns;
    int replications = 1;
    std::vector<double> alphas;  // evaluated through the finite-sample bound
};

struct ExperimentConfig {
    StatisticFamily family;
    ConstraintSpec constraints;
    std::optional<Tensor3> truth;
    SampleSourceConfig samples;
    FitSection fit;
    DiagnoseSection diagnose;
    SweepSection sweep;
    std::optional<double> phi_max_override;
    std::optional<Eigen::VectorXd> dual_bound_override;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    /// Bound constants, honoring manual overrides.
    ProblemScale scale() const;
};

ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a 64 hash of the canonical (parsed, key-sorted) config dump,
/// embedded in every output document.
std::string config_hash(const json& j);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// CSV with header "x1,...,xp", one sample per row, %.17g doubles, plus a
/// sidecar JSON (same stem, .json) recording domain, generator, and seed.
/// Extra fields (config hash, ...) are merged into the sidecar.
void save_samples(const SampleSet& samples, const std::string& csv_path,
                  const json& extra = json::object());
SampleSet load_samples(const std::string& csv_path);

json fit_result_to_json(const FitResult& result);
void write_text_file(const std::string& path, const std::string& contents);
std::string trace_to_csv(const FitResult& result);

json sweep_to_json(const std::vector<SweepCell>& cells,
                   const std::vector<std::vector<ReplicationOutcome>>& outcomes);
std::string sweep_to_csv(const std::vector<SweepCell>& cells);

}  // namespace expfam
