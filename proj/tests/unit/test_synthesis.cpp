#include <doctest.h>

#include <cmath>

#include "descfilter/error.hpp"
#include "descfilter/synthesis.hpp"
#include "plants.hpp"
#include "properties.hpp"

using namespace descfilter;
using descfilter::testing::regular_plant;
using descfilter::testing::two_state_plant;

namespace {

// Optimum of the two-state problem with the peak constraints off, from an
// independent cvxpy/Clarabel model of the same dissipation inequality.
constexpr double kReferenceMu = 0.25007402647;

SynthesisResult run(const DescriptorPlant& plant, SynthesisOptions opts = {}) {
    return synthesize(plant, FilterStructure::dynamic(plant.n(), plant.p(), plant.q()), opts);
}

void check_certificate_invariants(const SynthesisCertificate& c) {
    CHECK(c.zeta >= 0.0);
    CHECK(c.mu_star() == doctest::Approx(std::sqrt(c.zeta)));
    const Eigen::Index n = c.P1.rows();
    CHECK(spectral_norm(Mat::Identity(n, n) - c.P1) < 1.0);
    for (const Mat* p : {&c.P1, &c.P2}) {
        const Mat ep = c.E.transpose() * *p;
        CHECK((ep - ep.transpose()).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(is_symmetric_psd(ep, 1e-8));
    }
    CHECK(c.margins.all_passed());
    CHECK(c.margins.min_margin >= 0.0);
}

} // namespace

TEST_CASE("two-state plant: ladder falls through to the unpeaked rung") {
    const auto r = run(two_state_plant());
    const auto& c = r.certificate;
    CHECK(c.mode == SynthesisMode::Corollary);
    CHECK(c.xi2_mode == Xi2Mode::Off);
    CHECK_FALSE(c.peak_certified());
    REQUIRE(c.attempts.size() == 3);
    CHECK(c.attempts[0].xi2 == Xi2Mode::Strict);
    CHECK(c.attempts[0].status == SolveStatus::Infeasible);
    CHECK(c.attempts[1].status == SolveStatus::Infeasible);
    CHECK(c.attempts[2].status == SolveStatus::Optimal);
    CHECK(std::abs(c.mu_star() - kReferenceMu) < 1e-6);
    CHECK(r.filter.mu_star == c.mu_star());
    CHECK(r.filter.CF == two_state_plant().H);
    CHECK(r.filter.E1 == Mat::Identity(2, 2));
    CHECK(c.X1.rows() == 2);
    CHECK(c.Y1.rows() == 1);
    CHECK(c.epsilon > 0.0);
    check_certificate_invariants(c);
    CHECK(r.solution.status == SolveStatus::Optimal);
}

TEST_CASE("both pipelines agree on the two-state plant") {
    SynthesisOptions t1;
    t1.mode = SynthesisMode::Theorem1;
    const auto a = run(two_state_plant(), t1);
    const auto b = run(two_state_plant());
    CHECK(a.certificate.xi2_mode == Xi2Mode::Off);
    CHECK(std::abs(a.certificate.mu_star() - b.certificate.mu_star()) <= 1e-6);
    check_certificate_invariants(a.certificate);
    CHECK(a.certificate.X1.size() == 0);
}

TEST_CASE("explicit rung selection") {
    SynthesisOptions o;
    o.xi2 = Xi2Mode::Strict;
    try {
        (void)run(two_state_plant(), o);
        FAIL("strict peak constraint should be infeasible for a singular E");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SynthesisInfeasible);
    }
    o.xi2 = Xi2Mode::Off;
    const auto r = run(two_state_plant(), o);
    CHECK(r.certificate.attempts.size() == 1);
}

TEST_CASE("an inflated Lipschitz constant is infeasible on every rung") {
    try {
        (void)run(two_state_plant(100.0));
        FAIL("expected infeasibility");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SynthesisInfeasible);
        const std::string msg = e.what();
        CHECK(msg.find("strict") != std::string::npos);
        CHECK(msg.find("nonstrict") != std::string::npos);
        CHECK(msg.find("off") != std::string::npos);
    }
}

TEST_CASE("nonsingular E reduces to the state-space problem") {
    const auto r = run(regular_plant());
    const auto& c = r.certificate;
    CHECK(c.xi2_mode == Xi2Mode::Strict);
    CHECK(c.peak_certified());
    CHECK(c.Y1.size() == 0);
    CHECK(c.alpha > 0.0);
    CHECK(std::isfinite(c.mu_star()));
    check_certificate_invariants(c);
}

TEST_CASE("invalid plants are rejected before solving") {
    auto p = two_state_plant();
    p.A = Mat::Zero(2, 2);
    p.E = Mat::Zero(2, 2);
    p.E(0, 0) = 1.0;
    try {
        (void)run(p);
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ModelValidation);
    }
}

TEST_CASE("static-gain preset") {
    const auto plant = two_state_plant();
    const auto r = synthesize(plant, FilterStructure::static_gain(2, 1, 2));
    CHECK(r.filter.CF == Mat::Identity(2, 2));
    CHECK((r.filter.E2 + r.filter.BF).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.filter.AF - (plant.A - r.filter.BF * plant.C)).cwiseAbs().maxCoeff() < 1e-8);
    check_certificate_invariants(r.certificate);
}

TEST_CASE("mu* does not decrease as gamma1 grows") {
    SynthesisOptions o;
    o.xi2 = Xi2Mode::Off;
    double prev = 0.0;
    for (double g : {0.3, 0.5, 0.7}) {
        const double mu = run(two_state_plant(g), o).certificate.mu_star();
        CHECK(mu >= prev - 1e-9);
        prev = mu;
    }
}

TEST_CASE("weighted objective improves on the unweighted optimum") {
    SynthesisOptions o;
    o.xi2 = Xi2Mode::Strict;
    const auto base = run(regular_plant(), o).certificate;
    for (double lambda : {0.1, 1.0, 10.0}) {
        o.lambda = lambda;
        const auto w = run(regular_plant(), o).certificate;
        CHECK(w.lambda == lambda);
        CHECK(w.zeta + lambda * w.alpha <= base.zeta + lambda * base.alpha + 1e-7);
    }
}

TEST_CASE("Lyapunov function values") {
    const auto c = run(two_state_plant()).certificate;
    const Vec v = null_space(c.E).col(0);
    Vec xi(4);
    xi << v, -2.0 * v;
    CHECK(std::abs(lyapunov_value(c, xi)) < 1e-12);
    CHECK(lyapunov_value(c, Vec::Zero(4)) == 0.0);
    testing::Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        const Vec r = testing::random_vector(rng, 4, -5, 5);
        const double value = lyapunov_value(c, r);
        const Vec ex = c.E * r.head(2), e = c.E * r.tail(2);
        const double gram = ex.dot(c.X1 * ex) + e.dot(c.X2 * e);
        CHECK(value >= -1e-12);
        CHECK(std::abs(value - gram) <= 1e-10 * (1.0 + std::abs(gram)));
    }
}

TEST_CASE("filter recovery") {
    SynthesisCertificate c;
    c.P1 = Mat::Identity(2, 2);
    c.G1 = Mat::Constant(2, 2, 3.0);
    c.G2 = Mat::Constant(2, 1, -1.0);
    auto g = recover_filter(c);
    CHECK(g.AF == c.G1);
    CHECK(g.BF == c.G2);

    testing::Rng rng(32);
    for (int i = 0; i < 20; ++i) {
        Mat d = testing::random_matrix(rng, 3, 3);
        d *= 0.9 / spectral_norm(d);
        c.P1 = Mat::Identity(3, 3) - d;
        c.G1 = testing::random_matrix(rng, 3, 3);
        c.G2 = testing::random_matrix(rng, 3, 1);
        g = recover_filter(c);
        CHECK((c.P1.transpose() * g.AF - c.G1).norm() <= 1e-10 * (1.0 + c.G1.norm()));
        CHECK((c.P1.transpose() * g.BF - c.G2).norm() <= 1e-10 * (1.0 + c.G2.norm()));
    }

    c.P1 = -Mat::Identity(3, 3);
    try {
        (void)recover_filter(c);
        FAIL("expected ||I - P1|| >= 1 to be rejected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Internal);
    }

    const auto cert = run(two_state_plant()).certificate;
    CHECK(spectral_norm(Mat::Identity(2, 2) - cert.P1) < 1.0);
    const auto rec = recover_filter(cert);
    CHECK((cert.P1.transpose() * rec.AF - cert.G1).norm() <= 1e-8 * (1.0 + cert.G1.norm()));
}

TEST_CASE("rebuilt problem reproduces the certificate margins") {
    const auto plant = two_state_plant();
    const auto r = run(plant);
    const auto prob = rebuild_problem(plant, FilterStructure::dynamic(2, 1, 2), r.certificate);
    const auto rep = evaluate_at(prob, pack_certificate(prob, r.certificate));
    CHECK(rep.all_passed());
    CHECK(std::abs(rep.min_margin - r.certificate.margins.min_margin) < 1e-12);
}

TEST_CASE("peak-constraint diagnosis") {
    const auto d = diagnose_xi2(two_state_plant(), 0.5);
    CHECK(d.e_singular);
    CHECK(d.obstruction);
    CHECK_FALSE(d.conditional);
    REQUIRE(d.witness.size() == 2);
    CHECK(d.witness.norm() == doctest::Approx(1.0));
    CHECK((two_state_plant().E * d.witness).norm() < 1e-12);
    CHECK(d.candidate_leaves_row_space);
    CHECK_FALSE(d.explanation.empty());

    const auto reg = diagnose_xi2(regular_plant(), 0.1);
    CHECK_FALSE(reg.e_singular);
    CHECK_FALSE(reg.obstruction);

    const auto zero = diagnose_xi2(two_state_plant(), 0.0);
    CHECK(zero.conditional);
    CHECK(zero.candidate_leaves_row_space);
    // A candidate CF that annihilates the null space of E.
    const Vec v = zero.witness;
    Mat cf(1, 2);
    cf << -v(1), v(0);
    CHECK_FALSE(diagnose_xi2(two_state_plant(), 0.0, cf).candidate_leaves_row_space);
}

TEST_CASE("mode names") {
    CHECK(to_string(SynthesisMode::Corollary) == "corollary1-strict");
    CHECK(to_string(SynthesisMode::Theorem1) == "theorem1-sdp");
    CHECK(parse_synthesis_mode("theorem1") == SynthesisMode::Theorem1);
    CHECK(parse_synthesis_mode("corollary1-strict") == SynthesisMode::Corollary);
    CHECK_THROWS_AS((void)parse_synthesis_mode("lyapunov"), Error);
}

TEST_CASE("properties") {
    const auto r = testing::eperp_rotation_invariance();
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
}
