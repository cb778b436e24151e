#include "expfam/serialization.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace expfam {

namespace {

[[noreturn]] void schema_fail(const std::string& path, const std::string& what) {
    throw SchemaError(path + ": " + what);
}

const json& require_field(const json& j, const char* key, const std::string& path) {
    if (!j.is_object()) schema_fail(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) schema_fail(path + "." + key, "missing required field");
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_fail(path, "expected a number");
    return j.get<double>();
}

long as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) schema_fail(path, "expected an integer");
    return j.get<long>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) schema_fail(path, "expected a string");
    return j.get<std::string>();
}

Eigen::VectorXd as_vector(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) schema_fail(path, "expected a non-empty array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<long>(i)] = as_number(j[i], path);
    return v;
}

std::string format_double(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", v);
    return buffer;
}

}  // namespace

json domain_to_json(const SupportDomain& domain) {
    json j;
    if (domain.kind() == DomainKind::box) {
        j["kind"] = "box";
        j["lower"] = std::vector<double>(domain.lower().begin(), domain.lower().end());
        j["upper"] = std::vector<double>(domain.upper().begin(), domain.upper().end());
    } else {
        j["kind"] = "ball";
        j["center"] = std::vector<double>(domain.center().begin(), domain.center().end());
        j["radius"] = domain.radius();
    }
    return j;
}

SupportDomain domain_from_json(const json& j, const std::string& path) {
    const std::string kind = as_string(require_field(j, "kind", path), path + ".kind");
    if (kind == "box") {
        return SupportDomain::box(as_vector(require_field(j, "lower", path), path + ".lower"),
                                  as_vector(require_field(j, "upper", path), path + ".upper"));
    }
    if (kind == "ball") {
        return SupportDomain::ball(as_vector(require_field(j, "center", path), path + ".center"),
                                   as_number(require_field(j, "radius", path), path + ".radius"));
    }
    schema_fail(path + ".kind", "expected \"box\" or \"ball\"");
}

json family_to_json(const StatisticFamily& family) {
    json j;
    switch (family.kind()) {
        case FamilyKind::polynomial: j["kind"] = "polynomial"; break;
        case FamilyKind::trigonometric: j["kind"] = "trigonometric"; break;
        case FamilyKind::mixed: j["kind"] = "mixed"; break;
    }
    j["degree"] = family.degree();
    j["frequencies"] = family.max_frequency();
    j["shape"] = {family.shape().k1, family.shape().k2, family.shape().k3};
    j["domain"] = domain_to_json(family.domain());
    j["layout"] =
        family.layout() == TermLayout::quadratic_matrix ? "quadratic_matrix" : "graded_lex";
    j["include_constant"] = family.include_constant();
    j["shared_slices"] = family.has_shared_slices();
    return j;
}

StatisticFamily family_from_json(const json& j, const std::string& path) {
    SupportDomain domain = domain_from_json(require_field(j, "domain", path), path + ".domain");
    const std::string kind = as_string(require_field(j, "kind", path), path + ".kind");

    std::optional<TensorShape> shape;
    if (j.contains("shape")) {
        const json& s = j["shape"];
        if (!s.is_array() || s.size() != 3) schema_fail(path + ".shape", "expected [k1,k2,k3]");
        shape = TensorShape{static_cast<int>(as_integer(s[0], path + ".shape")),
                            static_cast<int>(as_integer(s[1], path + ".shape")),
                            static_cast<int>(as_integer(s[2], path + ".shape"))};
    }
    const bool shared = j.value("shared_slices", false);
    std::optional<TensorShape> base_shape = shape;
    if (shared && shape) base_shape = TensorShape{shape->k1, shape->k2, 1};

    const std::string layout = j.value("layout", std::string("graded_lex"));
    StatisticFamily family = [&] {
        if (layout == "quadratic_matrix") {
            if (kind != "polynomial")
                schema_fail(path + ".layout", "quadratic_matrix requires polynomial statistics");
            return StatisticFamily::quadratic_matrix(domain);
        }
        if (layout != "graded_lex") schema_fail(path + ".layout", "unknown layout");
        if (kind == "polynomial")
            return StatisticFamily::polynomial(
                domain, static_cast<int>(as_integer(require_field(j, "degree", path), path + ".degree")),
                base_shape, j.value("include_constant", false));
        if (kind == "trigonometric")
            return StatisticFamily::trigonometric(
                domain,
                static_cast<int>(as_integer(require_field(j, "frequencies", path), path + ".frequencies")),
                base_shape);
        if (kind == "mixed")
            return StatisticFamily::mixed(
                domain, static_cast<int>(as_integer(require_field(j, "degree", path), path + ".degree")),
                static_cast<int>(as_integer(require_field(j, "frequencies", path), path + ".frequencies")),
                base_shape);
        schema_fail(path + ".kind", "expected polynomial, trigonometric, or mixed");
    }();
    if (shared) family = family.with_shared_slices(shape ? shape->k3 : 2);
    return family;
}

json constraints_to_json(const ConstraintSpec& spec) {
    json j = json::array();
    for (const auto& s : spec.slices()) {
        j.push_back({{"norm", s.norm == NormKind::l11 ? "l11" : "nuclear"}, {"radius", s.radius}});
    }
    return j;
}

ConstraintSpec constraints_from_json(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) schema_fail(path, "expected a non-empty array");
    std::vector<SliceConstraint> slices;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string sub = path + "[" + std::to_string(i) + "]";
        const std::string norm = as_string(require_field(j[i], "norm", sub), sub + ".norm");
        SliceConstraint c;
        if (norm == "l11")
            c.norm = NormKind::l11;
        else if (norm == "nuclear")
            c.norm = NormKind::nuclear;
        else
            schema_fail(sub + ".norm", "expected \"l11\" or \"nuclear\"");
        c.radius = as_number(require_field(j[i], "radius", sub), sub + ".radius");
        if (!(c.radius > 0.0)) schema_fail(sub + ".radius", "must be positive");
        slices.push_back(c);
    }
    return ConstraintSpec(std::move(slices));
}

json tensor_to_json(const Tensor3& t) {
    return json(std::vector<double>(t.flat().begin(), t.flat().end()));
}

Tensor3 tensor_from_json(const json& j, TensorShape shape, const std::string& path) {
    const Eigen::VectorXd flat = as_vector(j, path);
    if (flat.size() != shape.size())
        schema_fail(path, "expected " + std::to_string(shape.size()) + " entries");
    return Tensor3(shape, flat);
}

ProblemScale ExperimentConfig::scale() const {
    ProblemScale s;
    s.phi_max = phi_max_override ? *phi_max_override : phi_max_bound(family);
    s.dual_bounds =
        dual_bound_override ? *dual_bound_override : dual_norm_bound(family, constraints);
    if (s.dual_bounds.size() != constraints.k3())
        throw SchemaError("dual bound override length does not match the constraint count");
    return s;
}

ExperimentConfig config_from_json(const json& j) {
    const std::string root = "config";
    StatisticFamily family =
        family_from_json(require_field(j, "family", root), root + ".family");
    ConstraintSpec constraints =
        constraints_from_json(require_field(j, "constraints", root), root + ".constraints");
    if (constraints.k3() != family.shape().k3)
        schema_fail(root + ".constraints", "constraint count must equal the family's k3");

    ExperimentConfig cfg{std::move(family), std::move(constraints)};

    if (j.contains("truth")) {
        const json& truth = j["truth"];
        if (truth.contains("theta")) {
            cfg.truth = tensor_from_json(truth["theta"], cfg.family.shape(), root + ".truth.theta");
        } else if (truth.contains("theta_file")) {
            const std::string file = as_string(truth["theta_file"], root + ".truth.theta_file");
            std::ifstream in(file);
            if (!in) schema_fail(root + ".truth.theta_file", "cannot open " + file);
            json content = json::parse(in, nullptr, false);
            if (content.is_discarded())
                schema_fail(root + ".truth.theta_file", "invalid JSON in " + file);
            cfg.truth = tensor_from_json(content, cfg.family.shape(), root + ".truth.theta_file");
        } else {
            schema_fail(root + ".truth", "expected \"theta\" or \"theta_file\"");
        }
        if (!cfg.truth->all_finite()) schema_fail(root + ".truth", "non-finite entries");
    }

    const json& samples = require_field(j, "samples", root);
    const bool has_generate = samples.contains("generate");
    const bool has_file = samples.contains("file");
    if (has_generate == has_file)
        schema_fail(root + ".samples", "exactly one of \"generate\" or \"file\" required");
    if (has_generate) {
        const json& g = samples["generate"];
        const std::string sub = root + ".samples.generate";
        GenerateConfig gen;
        gen.sampler = as_string(require_field(g, "sampler", sub), sub + ".sampler");
        if (gen.sampler != "grid" && gen.sampler != "metropolis")
            schema_fail(sub + ".sampler", "expected \"grid\" or \"metropolis\"");
        gen.n = as_integer(require_field(g, "n", sub), sub + ".n");
        if (gen.n < 1) schema_fail(sub + ".n", "must be >= 1");
        if (g.contains("resolution"))
            gen.resolution = static_cast<int>(as_integer(g["resolution"], sub + ".resolution"));
        if (g.contains("burn_in"))
            gen.metropolis.burn_in = as_integer(g["burn_in"], sub + ".burn_in");
        if (g.contains("thinning"))
            gen.metropolis.thinning = as_integer(g["thinning"], sub + ".thinning");
        if (g.contains("proposal_scale"))
            gen.metropolis.proposal_scale = as_number(g["proposal_scale"], sub + ".proposal_scale");
        cfg.samples.generate = gen;
        if (!cfg.truth) schema_fail(root + ".truth", "required when samples are generated");
    } else {
        cfg.samples.file = as_string(samples["file"], root + ".samples.file");
        std::ifstream probe(*cfg.samples.file);
        if (!probe)
            schema_fail(root + ".samples.file", "file does not exist: " + *cfg.samples.file);
    }

    if (j.contains("fit")) {
        const json& f = j["fit"];
        const std::string sub = root + ".fit";
        if (f.contains("epsilon")) {
            cfg.fit.config.epsilon = as_number(f["epsilon"], sub + ".epsilon");
            if (!(cfg.fit.config.epsilon > 0.0)) schema_fail(sub + ".epsilon", "must be positive");
            cfg.fit.epsilon_explicit = true;
        }
        if (f.contains("max_iters")) {
            cfg.fit.config.max_iterations = as_integer(f["max_iters"], sub + ".max_iters");
            if (*cfg.fit.config.max_iterations < 1) schema_fail(sub + ".max_iters", "must be >= 1");
        }
        if (f.contains("step_size")) {
            cfg.fit.config.step_size = as_number(f["step_size"], sub + ".step_size");
            if (!(*cfg.fit.config.step_size > 0.0)) schema_fail(sub + ".step_size", "must be positive");
        }
        if (f.contains("trace_stride")) {
            cfg.fit.config.trace_stride =
                static_cast<int>(as_integer(f["trace_stride"], sub + ".trace_stride"));
            if (cfg.fit.config.trace_stride < 1) schema_fail(sub + ".trace_stride", "must be >= 1");
        }
        if (f.contains("step_rule")) {
            cfg.fit.step_rule = as_string(f["step_rule"], sub + ".step_rule");
            if (cfg.fit.step_rule != "lemma" && cfg.fit.step_rule != "empirical")
                schema_fail(sub + ".step_rule", "expected \"lemma\" or \"empirical\"");
        }
    }

    if (j.contains("diagnose")) {
        const json& d = j["diagnose"];
        const std::string sub = root + ".diagnose";
        if (d.contains("checks")) {
            if (!d["checks"].is_array()) schema_fail(sub + ".checks", "expected an array");
            for (const auto& c : d["checks"])
                cfg.diagnose.checks.push_back(as_string(c, sub + ".checks"));
        }
        if (d.contains("concentration_n"))
            cfg.diagnose.concentration_n = as_integer(d["concentration_n"], sub + ".concentration_n");
        if (d.contains("concentration_trials"))
            cfg.diagnose.concentration_trials =
                static_cast<int>(as_integer(d["concentration_trials"], sub + ".concentration_trials"));
    }

    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        const std::string sub = root + ".sweep";
        if (s.contains("n")) {
            if (!s["n"].is_array() || s["n"].empty())
                schema_fail(sub + ".n", "expected a non-empty array");
            for (const auto& v : s["n"]) {
                const long n = as_integer(v, sub + ".n");
                if (n < 1) schema_fail(sub + ".n", "entries must be >= 1");
                cfg.sweep.ns.push_back(n);
            }
        }
        if (s.contains("replications")) {
            cfg.sweep.replications =
                static_cast<int>(as_integer(s["replications"], sub + ".replications"));
            if (cfg.sweep.replications < 1) schema_fail(sub + ".replications", "must be >= 1");
        }
        if (s.contains("alpha")) {
            if (!s["alpha"].is_array()) schema_fail(sub + ".alpha", "expected an array");
            for (const auto& v : s["alpha"]) {
                const double a = as_number(v, sub + ".alpha");
                if (!(a > 0.0 && a < 1.0)) schema_fail(sub + ".alpha", "entries must lie in (0,1)");
                cfg.sweep.alphas.push_back(a);
            }
        }
    }

    if (j.contains("phi_max_override"))
        cfg.phi_max_override = as_number(j["phi_max_override"], root + ".phi_max_override");
    if (j.contains("dual_bound_override"))
        cfg.dual_bound_override =
            as_vector(j["dual_bound_override"], root + ".dual_bound_override");

    if (j.contains("output_dir")) cfg.output_dir = as_string(j["output_dir"], root + ".output_dir");
    if (j.contains("seed")) {
        const long seed = as_integer(j["seed"], root + ".seed");
        if (seed < 0) schema_fail(root + ".seed", "must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("config: cannot open " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw SchemaError("config: " + path + " is not valid JSON");
    return config_from_json(j);
}

std::string config_hash(const json& j) {
    const std::string canonical = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%016" PRIx64, h);
    return buffer;
}

void save_samples(const SampleSet& samples, const std::string& csv_path, const json& extra) {
    std::ostringstream csv;
    for (int c = 0; c < samples.dimension(); ++c) csv << (c ? "," : "") << "x" << (c + 1);
    csv << "\n";
    for (long t = 0; t < samples.size(); ++t) {
        for (int c = 0; c < samples.dimension(); ++c) {
            if (c) csv << ",";
            csv << format_double(samples.data()(t, c));
        }
        csv << "\n";
    }
    write_text_file(csv_path, csv.str());

    const Provenance& prov = samples.provenance();
    json meta;
    meta["schema_version"] = kSchemaVersion;
    meta["domain"] = domain_to_json(samples.domain());
    meta["n"] = samples.size();
    meta["p"] = samples.dimension();
    switch (prov.source) {
        case SampleSource::grid_exact: meta["generator"] = "grid"; break;
        case SampleSource::metropolis: meta["generator"] = "metropolis"; break;
        case SampleSource::file: meta["generator"] = "file"; break;
    }
    meta["seed"] = prov.seed;
    if (prov.source == SampleSource::grid_exact) meta["resolution"] = prov.resolution;
    if (prov.source == SampleSource::metropolis) {
        meta["burn_in"] = prov.burn_in;
        meta["thinning"] = prov.thinning;
        meta["proposal_scale"] = prov.proposal_scale;
        meta["acceptance_rate"] = prov.acceptance_rate;
    }
    if (!prov.warning.empty()) meta["warning"] = prov.warning;
    for (const auto& [key, value] : extra.items()) meta[key] = value;

    std::string sidecar = csv_path;
    const auto dot = sidecar.find_last_of('.');
    if (dot != std::string::npos) sidecar.resize(dot);
    write_text_file(sidecar + ".json", meta.dump(2) + "\n");
}

SampleSet load_samples(const std::string& csv_path) {
    std::string sidecar = csv_path;
    const auto dot = sidecar.find_last_of('.');
    if (dot != std::string::npos) sidecar.resize(dot);
    sidecar += ".json";
    std::ifstream meta_in(sidecar);
    if (!meta_in) throw SchemaError("samples: missing sidecar " + sidecar);
    json meta = json::parse(meta_in, nullptr, false);
    if (meta.is_discarded()) throw SchemaError("samples: invalid sidecar JSON " + sidecar);
    SupportDomain domain = domain_from_json(require_field(meta, "domain", "sidecar"), "sidecar.domain");

    std::ifstream in(csv_path);
    if (!in) throw SchemaError("samples: cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("samples: empty CSV " + csv_path);
    std::vector<Eigen::VectorXd> rows;
    const int p = domain.dimension();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Eigen::VectorXd row(p);
        std::istringstream fields(line);
        std::string field;
        for (int c = 0; c < p; ++c) {
            if (!std::getline(fields, field, ','))
                throw SchemaError("samples: short row in " + csv_path);
            row[c] = std::stod(field);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw SchemaError("samples: no rows in " + csv_path);
    Eigen::MatrixXd data(static_cast<long>(rows.size()), p);
    for (std::size_t t = 0; t < rows.size(); ++t) data.row(static_cast<long>(t)) = rows[t].transpose();

    Provenance prov;
    prov.source = SampleSource::file;
    prov.seed = meta.value("seed", 0ULL);
    return SampleSet(std::move(data), std::move(domain), prov);
}

json fit_result_to_json(const FitResult& result) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["theta"] = tensor_to_json(result.theta);
    j["shape"] = {result.theta.shape().k1, result.theta.shape().k2, result.theta.shape().k3};
    // wall time stays out of the file so identical runs are byte-identical
    j["final_loss"] = result.final_loss;
    j["iterations"] = result.iterations;
    j["certificate"] = {{"tau_theoretical", result.certificate.tau_theoretical},
                        {"tau_is_conservative", result.certificate.tau_is_conservative},
                        {"budget_met", result.certificate.budget_met},
                        {"stop_reason", result.certificate.stop_reason},
                        {"plateau_gap", result.certificate.plateau_gap},
                        {"step_size", result.certificate.step_size},
                        {"smoothness", result.certificate.smoothness}};
    return j;
}

std::string trace_to_csv(const FitResult& result) {
    std::ostringstream csv;
    csv << "iteration,loss,gradient_mapping_norm\n";
    for (const auto& tp : result.trace)
        csv << tp.iteration << "," << format_double(tp.loss) << ","
            << format_double(tp.gradient_mapping_norm) << "\n";
    return csv.str();
}

json sweep_to_json(const std::vector<SweepCell>& cells,
                   const std::vector<std::vector<ReplicationOutcome>>& outcomes) {
    json j;
    j["schema_version"] = kSchemaVersion;
    json cell_list = json::array();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        json cell;
        cell["n"] = cells[c].n;
        cell["median_error"] = cells[c].median_error;
        cell["q25"] = cells[c].q25;
        cell["q75"] = cells[c].q75;
        cell["failures"] = cells[c].failures;
        json reps = json::array();
        for (const auto& o : outcomes[c]) {
            json rep;
            rep["ok"] = o.ok;
            if (o.ok) {
                rep["error"] = o.error;
                rep["iterations"] = o.iterations;
            } else {
                rep["message"] = o.message;
            }
            reps.push_back(rep);
        }
        cell["replications"] = reps;
        cell_list.push_back(cell);
    }
    j["cells"] = cell_list;
    return j;
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream csv;
    csv << "n,median_error,q25,q75,failures\n";
    for (const auto& cell : cells)
        csv << cell.n << "," << format_double(cell.median_error) << ","
            << format_double(cell.q25) << "," << format_double(cell.q75) << "," << cell.failures
            << "\n";
    return csv.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << contents;
    if (!out) throw Error("write failed: " + path);
}

}  // namespace expfam
