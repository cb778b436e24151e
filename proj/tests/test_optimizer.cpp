#include <doctest.h>

#include <cmath>

#include "expfam/experiments.hpp"
#include "expfam/optimizer.hpp"
#include "expfam/rng.hpp"

using namespace expfam;

namespace {

const TensorShape kScalar{1, 1, 1};

StatisticFamily benchmark_family() {
    return StatisticFamily::polynomial(SupportDomain::cube(1, 0.0, 1.0), 1);
}

Tensor3 scalar_theta(double v) {
    Tensor3 t(kScalar);
    t(0, 0, 0) = v;
    return t;
}

struct Bench {
    StatisticFamily family = benchmark_family();
    CenteringTable table = centering_constants(family);
    ConstraintSpec constraints = ConstraintSpec::uniform(NormKind::l11, 1.5);
    ProblemScale scale{phi_max_bound(family), dual_norm_bound(family, constraints)};

    LossContext context(const Tensor3& theta_star, long n, std::uint64_t seed,
                        int resolution = 2048) const {
        const SampleSet samples = grid_exact_sampler(family, theta_star, resolution, n, seed);
        LossContext ctx(family, table, samples);
        ctx.set_inner_product_bound(scale.inner_product_bound(constraints));
        return ctx;
    }
};

}  // namespace

TEST_CASE("step size formula") {
    const Eigen::VectorXd r = Eigen::VectorXd::Ones(1);
    const Eigen::VectorXd d0 = Eigen::VectorXd::Zero(1);
    CHECK(step_size(TensorShape{2, 2, 1}, 1.0, r, d0) == doctest::Approx(0.25));
    CHECK(step_size(kScalar, 2.0, r, d0) == doctest::Approx(0.25));
    // Doubling phi_max quarters the step.
    CHECK(step_size(kScalar, 4.0, r, d0) == doctest::Approx(0.0625));
}

TEST_CASE("iteration budget formula") {
    const Eigen::VectorXd r = Eigen::VectorXd::Ones(1);
    const Eigen::VectorXd d0 = Eigen::VectorXd::Zero(1);
    CHECK(iteration_budget(0.01, kScalar, 1.0, r, d0) == 200);
    CHECK(iteration_budget(0.005, kScalar, 1.0, r, d0) == 400);  // halving epsilon doubles tau
    CHECK(iteration_budget(0.1, TensorShape{2, 2, 1}, 1.0, r, d0) == 320);
    // A known ||Theta_hat||_T bound replaces the feasibility bound.
    CHECK(iteration_budget(0.01, kScalar, 1.0, r, d0, 0.5) == 50);
}

TEST_CASE("fit recovers theta* = 0 within 0.05 at n = 1e5") {
    Bench bench;
    bench.constraints = ConstraintSpec::uniform(NormKind::l11, 1.0);
    bench.scale.dual_bounds = dual_norm_bound(bench.family, bench.constraints);
    const LossContext ctx = bench.context(scalar_theta(0.0), 100000, 1001);
    FitConfig cfg;
    cfg.epsilon = 1e-6;
    cfg.step_size = empirical_step_size(ctx, bench.scale.inner_product_bound(bench.constraints));
    const FitResult result = fit(ctx, bench.constraints, bench.scale, cfg);
    CHECK(tensor_norm(result.theta) <= 0.05);
}

TEST_CASE("fit recovers the 1-D benchmark truth within 0.05 at n = 1e5") {
    Bench bench;
    const LossContext ctx = bench.context(scalar_theta(1.0), 100000, 2002);
    FitConfig cfg;
    cfg.epsilon = 1e-6;
    cfg.step_size = empirical_step_size(ctx, bench.scale.inner_product_bound(bench.constraints));
    const FitResult result = fit(ctx, bench.constraints, bench.scale, cfg);
    CHECK(std::abs(result.theta(0, 0, 0) - 1.0) <= 0.05);
    CHECK(result.certificate.stop_reason == "plateau");
}

TEST_CASE("running the full tau budget reaches an epsilon-optimal loss") {
    Bench bench;
    bench.constraints = ConstraintSpec::uniform(NormKind::l11, 0.5);
    bench.scale.dual_bounds = dual_norm_bound(bench.family, bench.constraints);
    for (int instance = 0; instance < 3; ++instance) {
        const LossContext ctx = bench.context(scalar_theta(0.4), 100, 3000 + instance);
        FitConfig cfg;
        cfg.epsilon = 0.05;

        FitResult budget_run = fit(ctx, bench.constraints, bench.scale, cfg);
        FitConfig long_cfg = cfg;
        long_cfg.epsilon = cfg.epsilon / 50.0;  // 50x the iteration budget
        const FitResult reference = fit(ctx, bench.constraints, bench.scale, long_cfg);
        CHECK(budget_run.final_loss - reference.final_loss <= cfg.epsilon);
    }
}

TEST_CASE("descent is monotone and every logged iterate stays feasible") {
    Bench bench;
    const LossContext ctx = bench.context(scalar_theta(1.0), 5000, 4004);
    FitConfig cfg;
    cfg.epsilon = 1e-3;
    cfg.max_iterations = 2000;
    cfg.trace_stride = 1;
    const FitResult result = fit(ctx, bench.constraints, bench.scale, cfg);
    for (std::size_t i = 1; i < result.trace.size(); ++i)
        CHECK(result.trace[i].loss <= result.trace[i - 1].loss + 1e-12);
    CHECK(bench.constraints.is_feasible(result.theta, 1e-9));
}

TEST_CASE("fit is deterministic") {
    Bench bench;
    const LossContext ctx = bench.context(scalar_theta(1.0), 2000, 5005);
    FitConfig cfg;
    cfg.epsilon = 1e-4;
    cfg.max_iterations = 500;
    const FitResult a = fit(ctx, bench.constraints, bench.scale, cfg);
    const FitResult b = fit(ctx, bench.constraints, bench.scale, cfg);
    CHECK(a.theta.flat() == b.theta.flat());
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].loss == b.trace[i].loss);
        CHECK(a.trace[i].gradient_mapping_norm == b.trace[i].gradient_mapping_norm);
    }
}

TEST_CASE("certificate reports the conservative budget and the stop reason") {
    Bench bench;
    const LossContext ctx = bench.context(scalar_theta(1.0), 1000, 6006);
    FitConfig cfg;
    cfg.epsilon = 0.01;
    cfg.max_iterations = 10;
    const FitResult result = fit(ctx, bench.constraints, bench.scale, cfg);
    CHECK(result.certificate.tau_is_conservative);
    CHECK(result.certificate.stop_reason == "max_iterations");
    CHECK_FALSE(result.certificate.budget_met);
    CHECK(result.iterations == 10);
    const long expected_tau = iteration_budget(cfg.epsilon, kScalar, bench.scale.phi_max,
                                               bench.constraints.radii(), bench.scale.dual_bounds);
    CHECK(result.certificate.tau_theoretical == expected_tau);
}

TEST_CASE("duplicated statistics are refused by the identifiability gate") {
    auto family =
        StatisticFamily::polynomial(SupportDomain::cube(1, 0.0, 1.0), 2).with_shared_slices(2);
    const CenteringTable table = centering_constants(family);
    Tensor3 theta_star(family.shape());
    const SampleSet samples = grid_exact_sampler(family, theta_star, 256, 500, 7007);
    const LossContext ctx(family, table, samples);
    ConstraintSpec spec({{NormKind::l11, 1.0}, {NormKind::l11, 1.0}});
    ProblemScale scale{phi_max_bound(family), dual_norm_bound(family, spec)};
    CHECK_THROWS_AS(fit(ctx, spec, scale, FitConfig{}), UnsupportedConfigError);
}

TEST_CASE("replication sweeps are independent of the worker count") {
    Bench bench;
    RecoverySetup setup{bench.family,
                        bench.table,
                        bench.constraints,
                        bench.scale,
                        scalar_theta(1.0),
                        512,
                        FitConfig{1e-5, std::nullopt, std::nullopt, 1000},
                        true};
    const auto serial = run_replications(setup, 2000, 8, 321, /*max_threads=*/1);
    const auto parallel = run_replications(setup, 2000, 8, 321, /*max_threads=*/4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].ok == parallel[i].ok);
        CHECK(serial[i].error == parallel[i].error);
        CHECK(serial[i].iterations == parallel[i].iterations);
    }
}

TEST_CASE("empirical step size is a valid smoothness bound") {
    Bench bench;
    const LossContext ctx = bench.context(scalar_theta(1.0), 5000, 8008);
    const double rd = bench.scale.inner_product_bound(bench.constraints);
    const double eta = empirical_step_size(ctx, rd);
    // The data-driven constant is tighter than the worst-case one.
    const double lemma_eta =
        step_size(kScalar, bench.scale.phi_max, bench.constraints.radii(), bench.scale.dual_bounds);
    CHECK(eta >= lemma_eta);
    // and the resulting run still descends monotonically.
    FitConfig cfg;
    cfg.epsilon = 1e-5;
    cfg.step_size = eta;
    cfg.trace_stride = 1;
    const FitResult result = fit(ctx, bench.constraints, bench.scale, cfg);
    for (std::size_t i = 1; i < result.trace.size(); ++i)
        CHECK(result.trace[i].loss <= result.trace[i - 1].loss + 1e-12);
}
