#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(EXPFAM_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    char buffer[4096];
    while (std::size_t got = fread(buffer, 1, sizeof(buffer), pipe))
        result.output.append(buffer, got);
    const int status = pclose(pipe);
    result.exit_code = WEXITSTATUS(status);
    return result;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("expfam_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    REQUIRE(out.good());
    out << j.dump(2) << "\n";
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json benchmark_config(const fs::path& out_dir, long n) {
    json cfg;
    cfg["family"] = {{"kind", "polynomial"},
                     {"degree", 1},
                     {"frequencies", 0},
                     {"shape", {1, 1, 1}},
                     {"domain", {{"kind", "box"}, {"lower", {0.0}}, {"upper", {1.0}}}}};
    cfg["constraints"] = json::array({{{"norm", "l11"}, {"radius", 1.5}}});
    cfg["truth"] = {{"theta", {1.0}}};
    cfg["samples"] = {{"generate", {{"sampler", "grid"}, {"resolution", 2048}, {"n", n}}}};
    cfg["fit"] = {{"epsilon", 1e-6}, {"step_rule", "empirical"}, {"trace_stride", 50}};
    cfg["output_dir"] = out_dir.string();
    cfg["seed"] = 42;
    return cfg;
}

}  // namespace

TEST_CASE("sample: writes the CSV with the declared row count") {
    const fs::path dir = fresh_dir("sample");
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, benchmark_config(dir / "out", 1000));
    const RunResult r = run("sample " + cfg_path.string());
    CHECK(r.exit_code == 0);

    const std::string csv = slurp(dir / "out" / "samples.csv");
    long rows = -1;  // header
    for (char c : csv) rows += (c == '\n');
    CHECK(rows == 1000);
    CHECK(csv.substr(0, 3) == "x1\n");

    const json meta = json::parse(slurp(dir / "out" / "samples.json"));
    CHECK(meta["generator"] == "grid");
    CHECK(meta["n"] == 1000);
    CHECK(meta.contains("config_hash"));
    CHECK(meta.contains("seed"));
}

TEST_CASE("sample: identical seed gives byte-identical output") {
    const fs::path dir = fresh_dir("sample_det");
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, benchmark_config(dir / "out", 500));
    CHECK(run("sample " + cfg_path.string()).exit_code == 0);
    const std::string first = slurp(dir / "out" / "samples.csv");
    CHECK(run("sample " + cfg_path.string()).exit_code == 0);
    CHECK(slurp(dir / "out" / "samples.csv") == first);
}

TEST_CASE("sample: 2-D grid stays inside the box") {
    const fs::path dir = fresh_dir("sample_2d");
    json cfg = benchmark_config(dir / "out", 2000);
    cfg["family"] = {{"kind", "polynomial"},
                     {"degree", 2},
                     {"frequencies", 0},
                     {"shape", {5, 1, 1}},
                     {"domain", {{"kind", "box"}, {"lower", {-1.0, -1.0}}, {"upper", {1.0, 1.0}}}}};
    cfg["truth"] = {{"theta", {0.3, 0.3, 0.0, 0.3, 0.0}}};
    cfg["samples"]["generate"]["resolution"] = 256;
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    CHECK(run("sample " + cfg_path.string()).exit_code == 0);

    std::ifstream in(dir / "out" / "samples.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "x1,x2");
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            const double v = std::stod(field);
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("fit: recovers the benchmark and writes result + trace") {
    const fs::path dir = fresh_dir("fit");
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, benchmark_config(dir / "out", 100000));
    const RunResult r = run("fit " + cfg_path.string());
    CHECK(r.exit_code == 0);

    const json result = json::parse(slurp(dir / "out" / "fit_result.json"));
    CHECK(result["schema_version"] == 1);
    CHECK(result.contains("config_hash"));
    CHECK(std::abs(result["theta"][0].get<double>() - 1.0) <= 0.05);
    CHECK(result["error_to_truth"].get<double>() <= 0.05);

    const std::string trace = slurp(dir / "out" / "fit_trace.csv");
    CHECK(trace.rfind("iteration,loss,gradient_mapping_norm", 0) == 0);
}

TEST_CASE("fit: missing sample file exits with the schema code") {
    const fs::path dir = fresh_dir("fit_missing");
    json cfg = benchmark_config(dir / "out", 100);
    cfg["samples"] = {{"file", (dir / "does_not_exist.csv").string()}};
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    const RunResult r = run("fit " + cfg_path.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("schema error") != std::string::npos);
}

TEST_CASE("fit: file-backed samples round-trip through sample") {
    const fs::path dir = fresh_dir("fit_file");
    json gen_cfg = benchmark_config(dir / "out", 20000);
    const fs::path gen_path = dir / "gen.json";
    write_json(gen_path, gen_cfg);
    REQUIRE(run("sample " + gen_path.string()).exit_code == 0);

    json fit_cfg = benchmark_config(dir / "out2", 0);
    fit_cfg["samples"] = {{"file", (dir / "out" / "samples.csv").string()}};
    const fs::path fit_path = dir / "fit.json";
    write_json(fit_path, fit_cfg);
    const RunResult r = run("fit " + fit_path.string());
    CHECK(r.exit_code == 0);
    const json result = json::parse(slurp(dir / "out2" / "fit_result.json"));
    CHECK(std::abs(result["theta"][0].get<double>() - 1.0) <= 0.15);
}

TEST_CASE("diagnose: benchmark report carries lambda_min and a zero KL at truth") {
    const fs::path dir = fresh_dir("diagnose");
    json cfg = benchmark_config(dir / "out", 100000);
    cfg["truth"] = {{"theta", {0.0}}};
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    const RunResult r = run("diagnose " + cfg_path.string());
    CHECK(r.exit_code == 0);

    const json report = json::parse(slurp(dir / "out" / "diagnose.json"));
    CHECK(std::abs(report["correlation"]["empirical_lambda_min"].get<double>() - 1.0 / 12.0) <
          0.005);
    CHECK(std::abs(report["correlation"]["population_lambda_min"].get<double>() - 1.0 / 12.0) <
          1e-9);
    CHECK(report["kl_grid"]["kl_at_truth"].get<double>() <= 1e-7);
    CHECK(std::abs(report["kl_grid"]["argmin_kl"].get<double>()) <= 1e-3 + 1e-12);
    CHECK(std::abs(report["sandwich"]["sigma"][0][0].get<double>() - 12.0) < 1e-6);
}

TEST_CASE("diagnose: high-dimensional config marks quadrature checks skipped") {
    const fs::path dir = fresh_dir("diagnose_p5");
    json cfg;
    cfg["family"] = {{"kind", "polynomial"},
                     {"degree", 1},
                     {"frequencies", 0},
                     {"shape", {5, 1, 1}},
                     {"domain",
                      {{"kind", "box"},
                       {"lower", {0.0, 0.0, 0.0, 0.0, 0.0}},
                       {"upper", {1.0, 1.0, 1.0, 1.0, 1.0}}}}};
    cfg["constraints"] = json::array({{{"norm", "l11"}, {"radius", 1.0}}});
    cfg["truth"] = {{"theta", {0.2, 0.2, 0.2, 0.2, 0.2}}};
    cfg["samples"] = {{"generate",
                       {{"sampler", "metropolis"}, {"n", 2000}, {"burn_in", 1000}, {"thinning", 2}}}};
    cfg["output_dir"] = (dir / "out").string();
    cfg["seed"] = 7;
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    const RunResult r = run("diagnose " + cfg_path.string());
    CHECK(r.exit_code == 0);
    const json report = json::parse(slurp(dir / "out" / "diagnose.json"));
    CHECK(report["sandwich"]["skipped"] == "dimension");
    CHECK(report["kl_grid"]["skipped"] == "dimension");
    CHECK(report["correlation"].contains("empirical_lambda_min"));
}

TEST_CASE("experiment: median error decreases over a small sweep") {
    const fs::path dir = fresh_dir("experiment");
    json cfg = benchmark_config(dir / "out", 0);
    cfg["samples"] = {{"generate", {{"sampler", "grid"}, {"resolution", 512}, {"n", 1}}}};
    cfg["sweep"] = {{"n", {500, 20000}}, {"replications", 5}, {"alpha", {0.5}}};
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    const RunResult r = run("experiment " + cfg_path.string());
    CHECK(r.exit_code == 0);

    const json result = json::parse(slurp(dir / "out" / "experiment.json"));
    REQUIRE(result["cells"].size() == 2);
    CHECK(result["cells"][0]["n"] == 500);
    CHECK(result["cells"][1]["median_error"].get<double>() <
          result["cells"][0]["median_error"].get<double>());
    REQUIRE(result["finite_sample_bounds"].size() == 1);
    CHECK(result["finite_sample_bounds"][0]["alpha"].get<double>() == 0.5);
    CHECK(result["finite_sample_bounds"][0]["n_required"].get<long>() > 0);
    const std::string csv = slurp(dir / "out" / "summary.csv");
    CHECK(csv.rfind("n,median_error,q25,q75,failures", 0) == 0);
}

TEST_CASE("experiment: empty sweep axis is a schema error") {
    const fs::path dir = fresh_dir("experiment_empty");
    json cfg = benchmark_config(dir / "out", 100);
    cfg["sweep"] = {{"n", json::array()}};
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    CHECK(run("experiment " + cfg_path.string()).exit_code == 2);
}

TEST_CASE("capacity guard maps to exit code 4") {
    const fs::path dir = fresh_dir("capacity");
    json cfg = benchmark_config(dir / "out", 100);
    cfg["family"]["domain"] = {{"kind", "box"}, {"lower", {0.0, 0.0}}, {"upper", {1.0, 1.0}}};
    cfg["family"]["shape"] = {2, 1, 1};
    cfg["truth"] = {{"theta", {0.1, 0.1}}};
    cfg["samples"]["generate"]["resolution"] = 8192;  // 8192^2 cells > 2^24
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    CHECK(run("sample " + cfg_path.string()).exit_code == 4);
}

TEST_CASE("fit: command-line flags override the config") {
    const fs::path dir = fresh_dir("fit_flags");
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, benchmark_config(dir / "out", 2000));
    const RunResult r = run("fit " + cfg_path.string() + " --max-iters 5 --trace-stride 1");
    CHECK(r.exit_code == 0);
    const json result = json::parse(slurp(dir / "out" / "fit_result.json"));
    CHECK(result["iterations"] == 5);
    CHECK(result["certificate"]["stop_reason"] == "max_iterations");
}

TEST_CASE("experiment outputs are reproducible byte for byte") {
    const fs::path dir = fresh_dir("exp_repro");
    json cfg = benchmark_config(dir / "out", 0);
    cfg["samples"] = {{"generate", {{"sampler", "grid"}, {"resolution", 512}, {"n", 1}}}};
    cfg["sweep"] = {{"n", {500, 1000}}, {"replications", 4}};
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, cfg);
    REQUIRE(run("experiment " + cfg_path.string()).exit_code == 0);
    const std::string first = slurp(dir / "out" / "experiment.json");
    const std::string first_csv = slurp(dir / "out" / "summary.csv");
    REQUIRE(run("experiment " + cfg_path.string()).exit_code == 0);
    CHECK(slurp(dir / "out" / "experiment.json") == first);
    CHECK(slurp(dir / "out" / "summary.csv") == first_csv);
}

TEST_CASE("fit outputs are reproducible byte for byte") {
    const fs::path dir = fresh_dir("fit_repro");
    const fs::path cfg_path = dir / "config.json";
    write_json(cfg_path, benchmark_config(dir / "out", 5000));
    REQUIRE(run("fit " + cfg_path.string()).exit_code == 0);
    const std::string first = slurp(dir / "out" / "fit_result.json");
    const std::string first_trace = slurp(dir / "out" / "fit_trace.csv");
    REQUIRE(run("fit " + cfg_path.string()).exit_code == 0);
    CHECK(slurp(dir / "out" / "fit_result.json") == first);
    CHECK(slurp(dir / "out" / "fit_trace.csv") == first_trace);
}
