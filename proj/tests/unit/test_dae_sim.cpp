#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "descfilter/commands.hpp"
#include "descfilter/config.hpp"
#include "descfilter/dae_sim.hpp"
#include "descfilter/error.hpp"
#include "descfilter/synthesis.hpp"
#include "plants.hpp"
#include "properties.hpp"

using namespace descfilter;
using descfilter::testing::regular_plant;
using descfilter::testing::two_state_plant;

namespace {

Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

const FilterRealization& two_state_filter() {
    static const FilterRealization f = synthesize(two_state_plant(), FilterStructure::dynamic(2, 1, 2)).filter;
    return f;
}

SimConfig config(double t_end, double dt, const std::string& w) {
    SimConfig c;
    c.t_end = t_end;
    c.dt = dt;
    c.w = parse_expr(w, 0, 0);
    return c;
}

InitOptions free_coordinate(int i) {
    InitOptions o;
    o.mode = InitMode::FreeCoordinates;
    o.free = {i};
    return o;
}

struct Start {
    Vec x0, xf0;
};

Start consistent_start(const DescriptorPlant& plant, const FilterRealization& f, const Vec& guess, double w0) {
    const Vec w = Vec::Constant(plant.qw(), w0);
    const Vec u;
    Start s;
    s.x0 = plant.E.fullPivLu().rank() < plant.n() ? consistent_init(plant, guess, w, u, free_coordinate(0)) : guess;
    const Vec y0 = measurement(plant, s.x0, w, u, 0.0, Mat::Zero(plant.k(), plant.l()));
    s.xf0 = consistent_filter_init(plant, f, Vec::Zero(plant.n()), y0, u);
    return s;
}

} // namespace

TEST_CASE("reference initial state is consistent to its printed precision") {
    const auto plant = two_state_plant();
    const Vec x = vec2(-14.7020, 3.0014);
    const double r = algebraic_residual(plant, x, Vec::Zero(1), Vec());
    CHECK(r < 1e-3);
    CHECK(r > 1e-5);
}

TEST_CASE("consistent initialization of the two-state plant") {
    const auto plant = two_state_plant();
    const Vec w0 = Vec::Zero(1);

    const Vec a = consistent_init(plant, vec2(-14.0, 3.0), w0, Vec(), free_coordinate(0));
    CHECK(algebraic_residual(plant, a, w0, Vec()) <= 1e-10);
    CHECK(a(1) == 3.0);
    CHECK((a - vec2(-14.7020, 3.0014)).norm() < 1e-2);

    const Vec b = consistent_init(plant, vec2(-14.0, 3.0), w0, Vec());
    CHECK(algebraic_residual(plant, b, w0, Vec()) <= 1e-10);

    InitOptions hold;
    hold.mode = InitMode::HoldDifferential;
    const Vec c = consistent_init(plant, vec2(-14.0, 3.0), w0, Vec(), hold);
    CHECK(algebraic_residual(plant, c, w0, Vec()) <= 1e-10);
    CHECK((plant.E * (c - vec2(-14.0, 3.0))).norm() < 1e-12);
}

TEST_CASE("linear consistency is a single Newton step") {
    AlgebraicProblem p;
    p.E = Mat::Zero(2, 2);
    p.E(0, 0) = 1.0;
    Mat a(2, 2);
    a << -1, 2, 3, -4;
    p.f = [a](const Vec& x) { return Vec(a * x + vec2(0, 1)); };
    p.jacobian = [a](const Vec&) { return a; };
    const auto r = find_consistent(p, vec2(5, 5));
    CHECK(r.residual <= 1e-12);
    CHECK(r.iterations <= 1);
}

TEST_CASE("nonsingular E leaves the guess unchanged") {
    const Vec g = vec2(1.5, -2.0);
    CHECK(consistent_init(regular_plant(), g, Vec::Zero(1), Vec()) == g);
}

TEST_CASE("an unsolvable algebraic constraint is reported") {
    AlgebraicProblem p;
    p.E = Mat::Zero(2, 2);
    p.E(0, 0) = 1.0;
    p.f = [](const Vec& x) { return vec2(0.0, x(1) * x(1) + 1.0); };
    p.jacobian = [](const Vec& x) {
        Mat j = Mat::Zero(2, 2);
        j(1, 1) = 2.0 * x(1);
        return j;
    };
    try {
        (void)find_consistent(p, vec2(0.0, 0.5));
        FAIL("expected no consistent point");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoConsistentPoint);
        CHECK(std::string(e.what()).find("residual") != std::string::npos);
    }
}

TEST_CASE("nominal run converges") {
    const auto plant = two_state_plant();
    const auto& f = two_state_filter();
    const auto s = consistent_start(plant, f, vec2(-14.7020, 3.0014), 0.0);
    const auto trace = simulate(plant, f, config(30.0, 1e-3, "0"), s.x0, s.xf0);
    REQUIRE(trace.samples() == 30001);
    const double e0 = trace.e.row(0).norm();
    CHECK(e0 > 1.0);
    CHECK(trace.e.row(10000).norm() <= 1e-3 * e0);
    CHECK(trace.e.row(30000).norm() <= 1e-3 * e0);
    CHECK(trace.algebraic_residual.maxCoeff() <= 1e-6);
    for (Eigen::Index i = 1; i < trace.samples(); ++i) {
        CHECK_MESSAGE(trace.newton_residual(i) <= 1e-10 * (1.0 + trace.x.row(i).cwiseAbs().maxCoeff()), "step ", i);
        if (trace.newton_residual(i) > 1e-10 * (1.0 + trace.x.row(i).cwiseAbs().maxCoeff())) break;
    }
    // Eventually decreasing.
    for (Eigen::Index i = 20000; i < 30000; i += 1000) CHECK(trace.e.row(i + 1000).norm() <= trace.e.row(i).norm());
}

TEST_CASE("an exact observer from the true state keeps zero error") {
    auto plant = two_state_plant();
    plant.phi = parse_expr("0; 0", 2, 0);
    plant.H = Mat::Identity(2, 2);
    FilterRealization f;
    Mat L(2, 1);
    L << 0.7, -0.2;
    f.AF = plant.A - L * plant.C;
    f.BF = L;
    f.CF = Mat::Identity(2, 2);
    f.E1 = Mat::Identity(2, 2);
    f.E2 = -L;
    f.E3 = Mat::Zero(2, 1);
    const Vec x0 = consistent_init(plant, vec2(1.0, 0.5), Vec::Zero(1), Vec(), free_coordinate(0));
    const auto trace = simulate(plant, f, config(5.0, 1e-2, "0"), x0, x0);
    CHECK(trace.e.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(trace.x.cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("step halving shows first-order convergence") {
    const auto plant = regular_plant();
    const auto f = synthesize(plant, FilterStructure::dynamic(2, 1, 2)).filter;
    const auto end_state = [&](double dt) {
        const auto tr = simulate(plant, f, config(2.0, dt, "exp(-t)"), vec2(1.0, -1.0), Vec::Zero(2));
        Vec out(4);
        out << tr.x.row(tr.samples() - 1).transpose(), tr.xf.row(tr.samples() - 1).transpose();
        return out;
    };
    const Vec a = end_state(1e-2), b = end_state(5e-3), c = end_state(2.5e-3);
    const double ratio = (a - b).norm() / (b - c).norm();
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.4);
}

TEST_CASE("disturbed run respects the bound from zero initial energy") {
    const auto cfg = load_config(testing::fixture_path("two_state.cfg"));
    const auto& f = two_state_filter();
    const auto r = run_scenario(cfg, f, Scenario{"configured", cfg.simulation.w, ""});
    REQUIRE(r.error.empty());
    CHECK(r.norms.w_l2 == doctest::Approx(26.01).epsilon(1e-3));
    CHECK(r.norms.ratio <= f.mu_star + 1e-3);
    CHECK(r.norms.ratio >= 0.01);
    CHECK(r.norms.ratio <= 0.06);
    CHECK(r.max_algebraic_residual <= 1e-6);
}

TEST_CASE("the reported realization also respects its bound") {
    const auto cfg = load_config(testing::fixture_path("two_state.cfg"));
    const auto f = testing::reference_realization();
    const auto r = run_scenario(cfg, f, Scenario{"configured", cfg.simulation.w, ""}, 0.0);
    REQUIRE(r.error.empty());
    CHECK(r.passed);
    CHECK(r.norms.ratio == doctest::Approx(0.0485).epsilon(0.02));
}

TEST_CASE("uncertainty realizations") {
    const auto plant = two_state_plant();
    const auto& f = two_state_filter();
    auto cfg = config(1.0, 1e-2, "sin(t)");
    cfg.F = parse_expr("sin(t); 0; 0; sin(t)", 0, 0);
    const Mat F = uncertainty_at(plant, cfg, 1.0);
    CHECK(F(0, 0) == doctest::Approx(std::sin(1.0)));
    CHECK(F(0, 1) == 0.0);
    CHECK(F(1, 1) == doctest::Approx(std::sin(1.0)));
    const auto s = consistent_start(plant, f, Vec::Zero(2), 0.0);
    CHECK_NOTHROW((void)simulate(plant, f, cfg, s.x0, s.xf0));

    cfg.F = parse_expr("2; 0; 0; 0", 0, 0);
    try {
        (void)simulate(plant, f, cfg, s.x0, s.xf0);
        FAIL("expected ||F|| > 1 to be rejected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }

    const Vec y = measurement(plant, vec2(1, 2), Vec::Constant(1, 1.0), Vec(), 0.0, Mat::Identity(2, 2));
    const Mat ceff = plant.C + plant.M2 * plant.N;
    CHECK(y(0) == doctest::Approx((ceff * vec2(1, 2))(0) + 0.2));
}

TEST_CASE("a Newton failure aborts with the partial trace") {
    DescriptorPlant p;
    p.E = Mat::Zero(2, 2);
    p.E(0, 0) = 1.0;
    p.A = -Mat::Identity(2, 2);
    p.B = vec2(0.0, 1.0);
    p.C = Mat::Identity(1, 2);
    p.D = Mat::Zero(1, 1);
    p.M1 = Mat::Zero(2, 0);
    p.M2 = Mat::Zero(1, 0);
    p.N = Mat::Zero(0, 2);
    p.H = Mat::Identity(2, 2);
    // Algebraic row: 0 = -x2^2 + w, with w = 1 - t turning negative at t = 1.
    p.phi = parse_expr("0; x2 - x2^2", 2, 0);
    p.psi = parse_expr("0", 2, 0);
    FilterRealization f;
    f.AF = -Mat::Identity(2, 2);
    f.BF = Mat::Zero(2, 1);
    f.CF = Mat::Identity(2, 2);
    f.E1 = Mat::Zero(2, 2);
    f.E2 = Mat::Zero(2, 1);
    f.E3 = Mat::Zero(2, 1);
    try {
        (void)simulate(p, f, config(2.0, 1e-2, "1 - t"), vec2(0.0, 1.0), Vec::Zero(2));
        FAIL("expected the simulation to abort");
    } catch (const SimulationAborted& e) {
        CHECK(e.kind() == ErrorKind::SimulationAborted);
        CHECK(e.partial().samples() > 50);
        CHECK(e.partial().samples() < 201);
        CHECK(e.partial().time(e.partial().samples() - 1) <= 1.0 + 1e-9);
    }
}

TEST_CASE("norms of traces") {
    SimTrace t;
    t.time = Vec::LinSpaced(11, 0.0, 1.0);
    t.e = Mat::Zero(11, 2);
    t.e.col(0).setConstant(3.0);
    t.e.col(1).setConstant(4.0);
    t.w = Mat::Constant(11, 1, 2.0);
    auto n = norms(t);
    CHECK(n.e_inf == doctest::Approx(5.0));
    CHECK(n.w_l2 == doctest::Approx(2.0));
    CHECK(n.ratio == doctest::Approx(2.5));

    t.w.setZero();
    CHECK(norms(t).ratio == std::numeric_limits<double>::infinity());
    t.e.setZero();
    CHECK(norms(t).ratio == 0.0);
}

TEST_CASE("CSV export") {
    const auto plant = regular_plant();
    const auto f = synthesize(plant, FilterStructure::dynamic(2, 1, 2)).filter;
    const auto trace = simulate(plant, f, config(0.01, 1e-3, "exp(-t)"), vec2(1, 0), Vec::Zero(2));
    std::ostringstream os;
    write_csv(trace, os);
    const std::string text = os.str();
    CHECK(text.rfind("t,x1,x2,xF1,xF2,z1,z2,zF1,zF2,e1,e2,w1\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 12);
    CHECK(text.find('\r') == std::string::npos);
}

TEST_CASE("properties") {
    const auto r = testing::trapezoid_matches_closed_form();
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
}
