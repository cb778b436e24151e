// Command-line front end: config-driven sample generation, fitting,
// diagnostics, and error-vs-n sweeps. See README.md for the config schema.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "expfam/diagnostics.hpp"
#include "expfam/experiments.hpp"
#include "expfam/rng.hpp"
#include "expfam/serialization.hpp"

namespace fs = std::filesystem;
using namespace expfam;

namespace {

struct CliOverrides {
    std::optional<double> epsilon;
    std::optional<long> max_iters;
    std::optional<double> step_size;
    std::optional<int> trace_stride;
    std::optional<std::string> output_dir;
    std::optional<long> seed;
};

struct LoadedConfig {
    ExperimentConfig config;
    json raw;
    std::string hash;
};

LoadedConfig load(const std::string& path, const CliOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw SchemaError("config: cannot open " + path);
    json raw = json::parse(in, nullptr, false);
    if (raw.is_discarded()) throw SchemaError("config: " + path + " is not valid JSON");

    LoadedConfig loaded{config_from_json(raw), std::move(raw), ""};
    loaded.hash = config_hash(loaded.raw);

    if (overrides.epsilon) loaded.config.fit.config.epsilon = *overrides.epsilon;
    if (overrides.max_iters) loaded.config.fit.config.max_iterations = *overrides.max_iters;
    if (overrides.step_size) loaded.config.fit.config.step_size = *overrides.step_size;
    if (overrides.trace_stride) loaded.config.fit.config.trace_stride = *overrides.trace_stride;
    if (overrides.output_dir) loaded.config.output_dir = *overrides.output_dir;
    if (overrides.seed) loaded.config.seed = static_cast<std::uint64_t>(*overrides.seed);
    return loaded;
}

void stamp(json& j, const LoadedConfig& loaded) {
    j["schema_version"] = kSchemaVersion;
    j["config_hash"] = loaded.hash;
}

fs::path ensure_output_dir(const ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

SampleSet generate_samples(const ExperimentConfig& cfg, std::uint64_t seed) {
    const GenerateConfig& gen = *cfg.samples.generate;
    if (gen.sampler == "grid")
        return grid_exact_sampler(cfg.family, *cfg.truth, gen.resolution, gen.n, seed);
    return metropolis_sampler(cfg.family, *cfg.truth, gen.n, gen.metropolis, seed);
}

SampleSet obtain_samples(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.samples.generate) return generate_samples(cfg, seed);
    SampleSet samples = load_samples(*cfg.samples.file);
    if (!(samples.domain() == cfg.family.domain()))
        throw SchemaError("samples: sidecar domain does not match config.family.domain");
    return samples;
}

int cmd_sample(const LoadedConfig& loaded) {
    const ExperimentConfig& cfg = loaded.config;
    if (!cfg.samples.generate)
        throw SchemaError("config.samples: sample command needs a \"generate\" source");
    const SampleSet samples = generate_samples(cfg, derive_seed(cfg.seed, 0));
    const fs::path dir = ensure_output_dir(cfg);
    save_samples(samples, (dir / "samples.csv").string(), {{"config_hash", loaded.hash}});
    if (!samples.provenance().warning.empty())
        std::cerr << "warning: " << samples.provenance().warning << "\n";
    std::cout << "wrote " << samples.size() << " samples to " << (dir / "samples.csv").string()
              << "\n";
    return 0;
}

FitResult run_fit(const ExperimentConfig& cfg, const SampleSet& samples) {
    const CenteringTable table = centering_constants(cfg.family);
    const ProblemScale scale = cfg.scale();
    LossContext ctx(cfg.family, table, samples);
    ctx.set_inner_product_bound(scale.inner_product_bound(cfg.constraints));
    FitConfig fit_cfg = cfg.fit.config;
    if (cfg.fit.step_rule == "empirical" && !fit_cfg.step_size)
        fit_cfg.step_size = empirical_step_size(ctx, scale.inner_product_bound(cfg.constraints));
    return fit(ctx, cfg.constraints, scale, fit_cfg);
}

int cmd_fit(const LoadedConfig& loaded) {
    const ExperimentConfig& cfg = loaded.config;
    const SampleSet samples = obtain_samples(cfg, derive_seed(cfg.seed, 0));
    const FitResult result = run_fit(cfg, samples);

    json out = fit_result_to_json(result);
    stamp(out, loaded);
    if (cfg.truth) out["error_to_truth"] = tensor_norm(result.theta - *cfg.truth);

    const fs::path dir = ensure_output_dir(cfg);
    write_text_file((dir / "fit_result.json").string(), out.dump(2) + "\n");
    write_text_file((dir / "fit_trace.csv").string(), trace_to_csv(result));
    std::cout << "fit: loss " << result.final_loss << " after " << result.iterations
              << " iterations (" << result.certificate.stop_reason << ")\n";
    return 0;
}

int cmd_diagnose(const LoadedConfig& loaded) {
    const ExperimentConfig& cfg = loaded.config;
    const int p = cfg.family.dimension();
    std::vector<std::string> checks = cfg.diagnose.checks;
    if (checks.empty()) checks = {"correlation", "kl_grid", "sandwich"};
    auto selected = [&](const std::string& name) {
        return std::find(checks.begin(), checks.end(), name) != checks.end();
    };

    const CenteringTable table = centering_constants(cfg.family);
    json report;
    stamp(report, loaded);

    if (selected("correlation")) {
        json section;
        const SampleSet samples = obtain_samples(cfg, derive_seed(cfg.seed, 1));
        const LossContext ctx(cfg.family, table, samples);
        const CorrelationEstimate emp = empirical_correlation(ctx);
        section["empirical_lambda_min"] = emp.lambda_min;
        section["n"] = emp.n;
        if (cfg.truth && p <= 3) {
            const CorrelationEstimate pop = population_correlation(cfg.family, table, *cfg.truth);
            section["population_lambda_min"] = pop.lambda_min;
        } else if (cfg.truth) {
            section["population_lambda_min_skipped"] = "dimension";
        }
        report["correlation"] = section;
    }

    if (selected("kl_grid")) {
        if (cfg.truth && p == 1 && cfg.family.shape().size() == 1) {
            const GridScanResult scan = scan_population_objectives_1d(
                cfg.family, table, cfg.truth->flat()[0], -3.0, 3.0, 1e-3);
            report["kl_grid"] = {{"argmin_population_loss", scan.argmin_population_loss},
                                 {"argmin_kl", scan.argmin_kl},
                                 {"kl_at_truth", scan.kl_at_truth},
                                 {"step", scan.step}};
        } else {
            report["kl_grid"] = {{"skipped", cfg.truth ? "dimension" : "no truth"}};
        }
    }

    if (selected("sandwich")) {
        if (cfg.truth && p <= 3) {
            const SandwichCovariance sw = sandwich_covariance(cfg.family, table, *cfg.truth);
            json section;
            section["b_condition"] = sw.b_condition;
            section["sigma"] = json::array();
            for (long i = 0; i < sw.sigma.rows(); ++i) {
                json row = json::array();
                for (long j = 0; j < sw.sigma.cols(); ++j) row.push_back(sw.sigma(i, j));
                section["sigma"].push_back(row);
            }
            report["sandwich"] = section;
        } else {
            report["sandwich"] = {{"skipped", cfg.truth ? "dimension" : "no truth"}};
        }
    }

    if (selected("concentration_correlation")) {
        if (cfg.truth && p <= 2) {
            const ConcentrationReport r = concentration_check_correlation(
                cfg.family, table, *cfg.truth, cfg.diagnose.concentration_n,
                cfg.diagnose.concentration_trials, derive_seed(cfg.seed, 2));
            report["concentration_correlation"] = {{"n", r.n},
                                                   {"trials", r.trials},
                                                   {"epsilon_bound", r.epsilon_bound},
                                                   {"violations", r.violations},
                                                   {"violation_fraction", r.violation_fraction},
                                                   {"max_deviation", r.max_deviation}};
        } else {
            report["concentration_correlation"] = {{"skipped", cfg.truth ? "dimension" : "no truth"}};
        }
    }

    if (selected("concentration_gradient")) {
        if (cfg.truth && p <= 2) {
            const ProblemScale scale = cfg.scale();
            const ConcentrationReport r = concentration_check_gradient(
                cfg.family, table, *cfg.truth, scale.inner_product_bound(cfg.constraints),
                cfg.diagnose.concentration_n, cfg.diagnose.concentration_trials,
                derive_seed(cfg.seed, 3));
            json section = {{"n", r.n},
                            {"trials", r.trials},
                            {"epsilon_bound", r.epsilon_bound},
                            {"violations", r.violations},
                            {"violation_fraction", r.violation_fraction},
                            {"max_deviation", r.max_deviation}};
            section["mean_gradient"] =
                std::vector<double>(r.mean_gradient.begin(), r.mean_gradient.end());
            section["gradient_se"] =
                std::vector<double>(r.gradient_se.begin(), r.gradient_se.end());
            report["concentration_gradient"] = section;
        } else {
            report["concentration_gradient"] = {{"skipped", cfg.truth ? "dimension" : "no truth"}};
        }
    }

    const fs::path dir = ensure_output_dir(cfg);
    write_text_file((dir / "diagnose.json").string(), report.dump(2) + "\n");
    std::cout << "wrote " << (dir / "diagnose.json").string() << "\n";
    return 0;
}

int cmd_experiment(const LoadedConfig& loaded) {
    const ExperimentConfig& cfg = loaded.config;
    if (cfg.sweep.ns.empty()) throw SchemaError("config.sweep.n: sweep axis must be non-empty");
    if (!cfg.samples.generate || cfg.samples.generate->sampler != "grid")
        throw SchemaError("config.samples: experiment sweeps use the grid sampler");
    if (!cfg.truth) throw SchemaError("config.truth: required for experiment sweeps");

    RecoverySetup setup{cfg.family,
                        centering_constants(cfg.family),
                        cfg.constraints,
                        cfg.scale(),
                        *cfg.truth,
                        cfg.samples.generate->resolution,
                        cfg.fit.config,
                        cfg.fit.step_rule == "empirical"};

    // lambda_min plug-in from a dedicated empirical correlation at the
    // largest n, floored at 1e-6; drives the alpha-indexed bound report and
    // the derived epsilon when none was given explicitly.
    double lambda_plugin = 0.0;
    if (!cfg.sweep.alphas.empty()) {
        const long n_max = *std::max_element(cfg.sweep.ns.begin(), cfg.sweep.ns.end());
        const SampleSet probe = grid_exact_sampler(cfg.family, *cfg.truth,
                                                   cfg.samples.generate->resolution, n_max,
                                                   derive_seed(cfg.seed, 0xA1F));
        const LossContext ctx(cfg.family, setup.table, probe);
        lambda_plugin = std::max(empirical_correlation(ctx).lambda_min, 1e-6);
        if (!cfg.fit.epsilon_explicit) {
            const double rd = setup.scale.inner_product_bound(cfg.constraints);
            const double alpha = cfg.sweep.alphas.front();
            setup.fit_config.epsilon =
                alpha * alpha * lambda_plugin / (8.0 * (1.0 + rd) * std::exp(rd));
        }
    }

    std::vector<std::vector<ReplicationOutcome>> outcomes;
    std::vector<SweepCell> cells;
    for (std::size_t c = 0; c < cfg.sweep.ns.size(); ++c) {
        const std::uint64_t cell_seed = derive_seed(cfg.seed, 0x10000u + c);
        outcomes.push_back(
            run_replications(setup, cfg.sweep.ns[c], cfg.sweep.replications, cell_seed));
        cells.push_back(summarize_cell(cfg.sweep.ns[c], outcomes.back()));
    }

    json out = sweep_to_json(cells, outcomes);
    stamp(out, loaded);
    if (!cfg.sweep.alphas.empty()) {
        const ProblemScale scale = setup.scale;
        json bounds = json::array();
        for (double alpha : cfg.sweep.alphas) {
            const FiniteSampleRequirement req = finite_sample_n(
                cfg.family.shape(), alpha, 0.05, lambda_plugin, scale.phi_max,
                cfg.constraints.radii(), scale.dual_bounds, cfg.constraints.domination_factors());
            bounds.push_back({{"alpha", alpha},
                              {"n_required", req.n},
                              {"epsilon", req.epsilon},
                              {"lambda_min_plugin", lambda_plugin}});
        }
        out["finite_sample_bounds"] = bounds;
    }

    const fs::path dir = ensure_output_dir(cfg);
    write_text_file((dir / "experiment.json").string(), out.dump(2) + "\n");
    write_text_file((dir / "summary.csv").string(), sweep_to_csv(cells));
    std::cout << "wrote " << (dir / "summary.csv").string() << "\n";
    for (const auto& cell : cells)
        std::cout << "n=" << cell.n << " median=" << cell.median_error << " q25=" << cell.q25
                  << " q75=" << cell.q75 << " failures=" << cell.failures << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained exponential-loss estimation for truncated exponential families"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides overrides;
    auto add_common = [&](CLI::App* sub, bool fit_flags) {
        sub->add_option("config", config_path, "experiment config JSON")->required();
        sub->add_option("--output-dir", overrides.output_dir, "override config output_dir");
        sub->add_option("--seed", overrides.seed, "override config seed");
        if (fit_flags) {
            sub->add_option("--epsilon", overrides.epsilon, "optimality-gap target");
            sub->add_option("--max-iters", overrides.max_iters, "iteration cap");
            sub->add_option("--step-size", overrides.step_size, "step-size override");
            sub->add_option("--trace-stride", overrides.trace_stride, "trace sampling stride");
        }
    };

    CLI::App* sample = app.add_subcommand("sample", "generate a sample set");
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit the natural parameter");
    CLI::App* diagnose = app.add_subcommand("diagnose", "run diagnostic reports");
    CLI::App* experiment = app.add_subcommand("experiment", "error-vs-n sweep");
    add_common(sample, false);
    add_common(fit_cmd, true);
    add_common(diagnose, false);
    add_common(experiment, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems share the schema exit code
    }

    try {
        const LoadedConfig loaded = load(config_path, overrides);
        if (app.got_subcommand(sample)) return cmd_sample(loaded);
        if (app.got_subcommand(fit_cmd)) return cmd_fit(loaded);
        if (app.got_subcommand(diagnose)) return cmd_diagnose(loaded);
        if (app.got_subcommand(experiment)) return cmd_experiment(loaded);
        return 1;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedConfigError& e) {
        std::cerr << "unsupported configuration: " << e.what() << "\n";
        return 2;
    } catch (const CapacityError& e) {
        std::cerr << "capacity guard: " << e.what() << "\n";
        return 4;
    } catch (const AccuracyError& e) {
        std::cerr << "accuracy failure: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DomainViolationError& e) {
        std::cerr << "domain violation: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
