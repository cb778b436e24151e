#include <doctest.h>

#include <cmath>

#include "expfam/parameter_space.hpp"
#include "expfam/rng.hpp"

using namespace expfam;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

/// Random point of the L11 ball: random signs and a Dirichlet-like split of
/// a uniformly drawn total mass.
Eigen::MatrixXd random_l11_feasible(int rows, int cols, double r, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    double total = 0.0;
    for (long i = 0; i < m.size(); ++i) {
        m.data()[i] = -std::log(1.0 - rng.uniform01());
        total += m.data()[i];
    }
    const double mass = r * rng.uniform01();
    for (long i = 0; i < m.size(); ++i)
        m.data()[i] *= (rng.uniform01() < 0.5 ? -1.0 : 1.0) * mass / total;
    return m;
}

/// Random point of the nuclear ball: scale a random matrix into the ball.
Eigen::MatrixXd random_nuclear_feasible(int rows, int cols, double r, Rng& rng) {
    Eigen::MatrixXd m = random_matrix(rows, cols, rng);
    return m * (r * rng.uniform01() / slice_norm(m, NormKind::nuclear));
}

Eigen::MatrixXd row2(double a, double b) {
    Eigen::MatrixXd m(1, 2);
    m << a, b;
    return m;
}

}  // namespace

TEST_CASE("slice norms") {
    Eigen::MatrixXd m(2, 2);
    m << 1, -2, 0, 3;
    CHECK(slice_norm(m, NormKind::l11) == doctest::Approx(6.0));
    Eigen::MatrixXd d = Eigen::Vector2d(3.0, 1.0).asDiagonal();
    CHECK(slice_norm(d, NormKind::nuclear) == doctest::Approx(4.0));
    CHECK(slice_norm(Eigen::MatrixXd::Zero(3, 2), NormKind::nuclear) == doctest::Approx(0.0));
}

TEST_CASE("dual norms") {
    Eigen::MatrixXd m(2, 2);
    m << 1, -2, 0, 3;
    CHECK(dual_norm(m, NormKind::l11) == doctest::Approx(3.0));
    Eigen::MatrixXd d = Eigen::Vector2d(3.0, 1.0).asDiagonal();
    CHECK(dual_norm(d, NormKind::nuclear) == doctest::Approx(3.0));
    CHECK(dual_norm(Eigen::MatrixXd::Zero(2, 2), NormKind::l11) == doctest::Approx(0.0));
    CHECK(dual_norm(Eigen::MatrixXd::Zero(2, 2), NormKind::nuclear) == doctest::Approx(0.0));
}

TEST_CASE("L11 projection: KKT threshold case, verified by grid search") {
    const Eigen::MatrixXd projected = project_l11_ball(row2(3.0, 1.0), 2.0);
    CHECK(projected(0, 0) == doctest::Approx(2.0));
    CHECK(projected(0, 1) == doctest::Approx(0.0));

    // Dense grid over the feasible ball as the independent oracle.
    const double best = (projected - row2(3.0, 1.0)).norm();
    for (double a = -2.0; a <= 2.0; a += 1e-3) {
        for (double sign : {-1.0, 1.0}) {
            const double b = sign * (2.0 - std::abs(a));
            const double dist = (row2(a, b) - row2(3.0, 1.0)).norm();
            CHECK(best <= dist + 1e-9);
        }
    }
}

TEST_CASE("L11 projection: identity inside the ball, sign symmetry") {
    const Eigen::MatrixXd inside = project_l11_ball(row2(0.5, 0.5), 2.0);
    CHECK(inside(0, 0) == doctest::Approx(0.5));
    CHECK(inside(0, 1) == doctest::Approx(0.5));

    const Eigen::MatrixXd negated = project_l11_ball(row2(-3.0, -1.0), 2.0);
    CHECK(negated(0, 0) == doctest::Approx(-2.0));
    CHECK(negated(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("nuclear projection: diagonal case, verified by grid search") {
    Eigen::MatrixXd d = Eigen::Vector2d(3.0, 1.0).asDiagonal();
    const Eigen::MatrixXd projected = project_nuclear_ball(d, 2.0);
    CHECK(projected(0, 0) == doctest::Approx(2.0));
    CHECK(projected(1, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(std::abs(projected(0, 1)) < 1e-12);

    // Grid over feasible diagonal matrices (the projection of a diagonal
    // matrix is diagonal).
    const double best = (projected - d).norm();
    for (double a = -2.0; a <= 2.0; a += 1e-3) {
        for (double sign : {-1.0, 1.0}) {
            const double b = sign * (2.0 - std::abs(a));
            Eigen::MatrixXd cand = Eigen::Vector2d(a, b).asDiagonal();
            CHECK(best <= (cand - d).norm() + 1e-9);
        }
    }
}

TEST_CASE("nuclear projection: identity and zero cases") {
    Rng rng(5);
    Eigen::MatrixXd m = random_matrix(3, 3, rng);
    m *= 0.9 / slice_norm(m, NormKind::nuclear);
    CHECK((project_nuclear_ball(m, 1.0) - m).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(project_nuclear_ball(Eigen::MatrixXd::Zero(2, 3), 1.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projection rejects nonpositive radii") {
    CHECK_THROWS_AS(project_l11_ball(row2(1.0, 1.0), 0.0), SchemaError);
    CHECK_THROWS_AS(project_nuclear_ball(row2(1.0, 1.0), -1.0), SchemaError);
}

TEST_CASE("projection optimality against random feasible competitors") {
    Rng rng(17);
    for (NormKind kind : {NormKind::l11, NormKind::nuclear}) {
        for (int trial = 0; trial < 200; ++trial) {
            const int rows = 2 + static_cast<int>(rng.uniform_index(3));
            const int cols = 2 + static_cast<int>(rng.uniform_index(3));
            const double r = 0.5 + 2.0 * rng.uniform01();
            const Eigen::MatrixXd m = random_matrix(rows, cols, rng, 2.0);
            const Eigen::MatrixXd p = kind == NormKind::l11 ? project_l11_ball(m, r)
                                                            : project_nuclear_ball(m, r);
            CHECK(slice_norm(p, kind) <= r + 1e-9);
            const double dist = (m - p).norm();
            for (int q = 0; q < 200; ++q) {
                const Eigen::MatrixXd competitor =
                    kind == NormKind::l11 ? random_l11_feasible(rows, cols, r, rng)
                                          : random_nuclear_feasible(rows, cols, r, rng);
                CHECK(dist <= (m - competitor).norm() + 1e-9);
            }
        }
    }
}

TEST_CASE("projections are non-expansive") {
    Rng rng(19);
    for (NormKind kind : {NormKind::l11, NormKind::nuclear}) {
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::MatrixXd a = random_matrix(3, 4, rng, 2.0);
            const Eigen::MatrixXd b = random_matrix(3, 4, rng, 2.0);
            const double r = 0.5 + rng.uniform01();
            const Eigen::MatrixXd pa =
                kind == NormKind::l11 ? project_l11_ball(a, r) : project_nuclear_ball(a, r);
            const Eigen::MatrixXd pb =
                kind == NormKind::l11 ? project_l11_ball(b, r) : project_nuclear_ball(b, r);
            CHECK((pa - pb).norm() <= (a - b).norm() + 1e-9);
        }
    }
}

TEST_CASE("duality: <M, N> <= R*(M) for R(N) <= 1") {
    Rng rng(23);
    for (NormKind kind : {NormKind::l11, NormKind::nuclear}) {
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::MatrixXd m = random_matrix(3, 3, rng, 2.0);
            Eigen::MatrixXd n = random_matrix(3, 3, rng);
            n /= slice_norm(n, kind);
            CHECK((m.array() * n.array()).sum() <= dual_norm(m, kind) + 1e-9);
        }
    }
}

TEST_CASE("constraint-set projection composes per-slice results") {
    ConstraintSpec spec({{NormKind::l11, 2.0}, {NormKind::nuclear, 2.0}});
    Tensor3 theta(TensorShape{2, 2, 2});
    Eigen::MatrixXd s0(2, 2), s1(2, 2);
    s0 << 3, 1, 0, 0;
    s1 << 3, 0, 0, 1;
    theta.set_slice(0, s0);
    theta.set_slice(1, s1);
    const Tensor3 projected = spec.project(theta);
    CHECK(projected(0, 0, 0) == doctest::Approx(2.0));
    CHECK(projected(0, 1, 0) == doctest::Approx(0.0));
    CHECK(projected(0, 0, 1) == doctest::Approx(2.0));
    CHECK(projected(1, 1, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("feasible tensors project to themselves; projection is idempotent") {
    Rng rng(29);
    ConstraintSpec spec({{NormKind::l11, 1.5}, {NormKind::nuclear, 1.0}});
    for (int trial = 0; trial < 100; ++trial) {
        Tensor3 theta(TensorShape{3, 3, 2});
        for (long i = 0; i < theta.size(); ++i) theta.flat()[i] = rng.normal();
        const Tensor3 once = spec.project(theta);
        CHECK(spec.is_feasible(once));
        const Tensor3 twice = spec.project(once);
        CHECK(tensor_norm(twice - once) < 1e-9);
    }
    Tensor3 feasible(TensorShape{3, 3, 2});
    feasible(0, 0, 0) = 0.5;
    feasible(1, 1, 1) = 0.25;
    CHECK(tensor_norm(spec.project(feasible) - feasible) == doctest::Approx(0.0));
}

TEST_CASE("constraint set is convex") {
    Rng rng(31);
    ConstraintSpec spec({{NormKind::l11, 1.0}, {NormKind::nuclear, 2.0}});
    for (int trial = 0; trial < 100; ++trial) {
        Tensor3 a(TensorShape{2, 3, 2}), b(TensorShape{2, 3, 2});
        for (long i = 0; i < a.size(); ++i) {
            a.flat()[i] = rng.normal();
            b.flat()[i] = rng.normal();
        }
        const Tensor3 pa = spec.project(a);
        const Tensor3 pb = spec.project(b);
        const double t = rng.uniform01();
        const Tensor3 mix(pa.shape(), t * pa.flat() + (1.0 - t) * pb.flat());
        CHECK(spec.is_feasible(mix, 1e-9));
    }
}

TEST_CASE("tensor norm basics") {
    Tensor3 zero(TensorShape{2, 2, 1});
    CHECK(tensor_norm(zero) == doctest::Approx(0.0));
    Tensor3 single(TensorShape{1, 1, 1});
    single(0, 0, 0) = 3.0;
    CHECK(tensor_norm(single) == doctest::Approx(3.0));
    Tensor3 pythagorean(TensorShape{2, 1, 1});
    pythagorean(0, 0, 0) = 3.0;
    pythagorean(1, 0, 0) = 4.0;
    CHECK(tensor_norm(pythagorean) == doctest::Approx(5.0));
}

TEST_CASE("norm domination examples") {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 3);
    CHECK(evaluate_norm(ones, {NormSpec::Family::entrywise_lpq, 1.0, 1.0}) /
              (6.0 * ones.cwiseAbs().maxCoeff()) ==
          doctest::Approx(1.0));
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    CHECK(evaluate_norm(eye, {NormSpec::Family::schatten, 1.0, 0.0}) / 4.0 ==
          doctest::Approx(0.5));
    CHECK(evaluate_norm(eye, {NormSpec::Family::operator_p, 2.0, 0.0}) / 4.0 ==
          doctest::Approx(0.25));
}

TEST_CASE("norm domination holds for the covered norm families") {
    const std::vector<NormSpec> specs = {
        {NormSpec::Family::entrywise_lpq, 1.0, 1.0}, {NormSpec::Family::entrywise_lpq, 2.0, 3.0},
        {NormSpec::Family::schatten, 1.0, 0.0},      {NormSpec::Family::schatten, 2.5, 0.0},
        {NormSpec::Family::operator_p, 1.0, 0.0},    {NormSpec::Family::operator_p, 2.0, 0.0},
    };
    for (const auto& spec : specs) {
        const DominationReport report = check_norm_domination(spec, 4, 6, 500, 101);
        CHECK(report.violations == 0);
        CHECK(report.max_ratio <= 1.0 + 1e-12);
    }
}
