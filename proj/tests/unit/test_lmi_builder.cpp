#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "descfilter/error.hpp"
#include "descfilter/filter_lmis.hpp"
#include "descfilter/lmi.hpp"
#include "descfilter/synthesis.hpp"
#include "plants.hpp"
#include "properties.hpp"

using namespace descfilter;
using descfilter::testing::two_state_plant;

namespace {

LmiProblem two_state_problem(Xi2Mode mode = Xi2Mode::Strict, Xi1Form form = Xi1Form::Derivation) {
    LmiOptions o;
    o.xi2 = mode;
    o.xi1 = form;
    return build_theorem1(two_state_plant(), FilterStructure::dynamic(2, 1, 2), o);
}

const Constraint& constraint(const LmiProblem& p, const std::string& name) {
    const auto it = std::find_if(p.constraints.begin(), p.constraints.end(),
                                 [&](const Constraint& c) { return c.name == name; });
    REQUIRE(it != p.constraints.end());
    return *it;
}

bool has_constraint(const LmiProblem& p, const std::string& name) {
    return std::any_of(p.constraints.begin(), p.constraints.end(), [&](const Constraint& c) { return c.name == name; });
}

Mat block_value(const LmiProblem& p, const std::string& name, const Vec& v) {
    const auto it = std::find_if(p.blocks.begin(), p.blocks.end(), [&](const BlockInfo& b) { return b.name == name; });
    REQUIRE(it != p.blocks.end());
    const Mat full = p.constraints[static_cast<std::size_t>(it->constraint)].expr.eval(v);
    return full.block(it->row, it->col, it->rows, it->cols);
}

// Dense reconstruction straight from the stored triples.
Mat dense(const MatExpr& e, const Vec& v) {
    Mat m = e.constant_part();
    for (const auto& t : e.terms()) m(t.row, t.col) += t.coeff * v(t.var);
    return m;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an exception");
    return ErrorKind::Internal;
}

} // namespace

TEST_CASE("decision variable sizes") {
    LmiProblem p;
    p.add_variable("s", VarKind::Scalar, 1, 1);
    p.add_variable("R", VarKind::Rectangular, 2, 3);
    p.add_variable("X", VarKind::Symmetric, 3, 3);
    CHECK(p.find_variable("s")->size() == 1);
    CHECK(p.find_variable("R")->size() == 6);
    CHECK(p.find_variable("X")->size() == 6);
    CHECK(p.num_scalars() == 13);
    CHECK(p.objective.size() == 13);

    testing::Rng rng(3);
    const Mat x = sym(testing::random_matrix(rng, 3, 3));
    Vec v = Vec::Zero(13);
    p.find_variable("X")->pack(x, v);
    CHECK(p.find_variable("X")->unpack(v) == x);
    CHECK(p.var("X").eval(v) == x);
}

TEST_CASE("affine expressions reject products of unknowns") {
    LmiProblem p;
    const auto a = p.add_variable("a", VarKind::Rectangular, 2, 2);
    const auto b = p.add_variable("b", VarKind::Rectangular, 2, 2);
    CHECK(kind_of([&] { (void)(a * b); }) == ErrorKind::Nonaffine);
    CHECK_NOTHROW((void)(a * MatExpr(Mat::Identity(2, 2))));
    const auto sum = a + a.transpose();
    CHECK(sum.structurally_symmetric());
    CHECK_FALSE(a.structurally_symmetric());
    CHECK((a - a).is_constant());
}

TEST_CASE("constraints must be square and symmetric") {
    LmiProblem p;
    const auto a = p.add_variable("a", VarKind::Rectangular, 2, 2);
    CHECK(kind_of([&] { p.add_constraint({"bad", a, Sense::NegDef, 0.0, ""}); }) == ErrorKind::Internal);
    const auto r = p.add_variable("r", VarKind::Rectangular, 2, 3);
    CHECK(kind_of([&] { p.add_constraint({"rect", r, Sense::Zero, 0.0, ""}); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("full derivation-form system for the two-state plant") {
    const auto p = two_state_problem();
    CHECK(constraint(p, "Xi1").expr.rows() == 13);
    CHECK(constraint(p, "Xi2").expr.rows() == 2 + 2 + 2 + 2 + 2);
    CHECK(constraint(p, "Xi3").expr.rows() == 3);
    CHECK(constraint(p, "Xi4").expr.rows() == 4);

    int inequalities = 0, equalities = 0, couplings = 0;
    for (const auto& c : p.constraints) {
        if (c.group == "coupling") {
            (c.sense == Sense::Zero ? equalities : couplings)++;
        } else {
            ++inequalities;
        }
    }
    CHECK(inequalities == 4);
    CHECK(equalities == 2);
    CHECK(couplings == 2);
    for (const char* v : {"zeta", "epsilon", "alpha", "P1", "P2", "G1", "G2", "CF"}) CHECK(p.has_variable(v));
    CHECK_FALSE(p.has_variable("E3"));
    CHECK(p.objective(p.find_variable("zeta")->offset) == 1.0);
    CHECK(p.objective.cwiseAbs().sum() == 1.0);
    CHECK(constraint(p, "Xi1").shift == 1e-9);
    CHECK(constraint(p, "Xi2").sense == Sense::NegDef);
}

TEST_CASE("printed form and peak modes") {
    CHECK(constraint(two_state_problem(Xi2Mode::Strict, Xi1Form::Printed), "Xi1").expr.rows() == 12);
    const auto ns = two_state_problem(Xi2Mode::Nonstrict);
    CHECK(constraint(ns, "Xi2").sense == Sense::NegSemidef);
    CHECK(constraint(ns, "Xi2").shift == 0.0);
    const auto off = two_state_problem(Xi2Mode::Off);
    CHECK_FALSE(has_constraint(off, "Xi2"));
    CHECK_FALSE(has_constraint(off, "Xi3"));
    CHECK_FALSE(off.has_variable("alpha"));
    CHECK_FALSE(off.has_variable("CF"));
    CHECK(off.derived.at("CF").constant_part() == two_state_plant().H);
}

TEST_CASE("the Pi1 block without Lipschitz or uncertainty terms") {
    auto plant = testing::regular_plant();
    plant.gamma1 = 0.0;
    const auto p = build_theorem1(plant, FilterStructure::dynamic(2, 1, 2), {});
    testing::Rng rng(5);
    const Vec v = testing::random_vector(rng, p.num_scalars(), -2, 2);
    const Mat g1 = p.value("G1", v), g2 = p.value("G2", v), p2 = p.value("P2", v);
    CHECK((block_value(p, "Xi1/Pi1/Lambda1", v) - (g1 + g1.transpose())).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/Pi1/G2C", v) - g2 * plant.C).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/Pi1/Lambda2", v) - (plant.A.transpose() * p2 + p2.transpose() * plant.A))
              .cwiseAbs()
              .maxCoeff() < 1e-13);
}

TEST_CASE("named blocks of the two-state system") {
    const auto p = two_state_problem();
    const auto plant = two_state_plant();
    testing::Rng rng(6);
    const Vec v = testing::random_vector(rng, p.num_scalars(), -2, 2);
    const Mat p1 = p.value("P1", v), p2 = p.value("P2", v), g2 = p.value("G2", v);
    const double eps = p.value("epsilon", v)(0, 0), zeta = p.value("zeta", v)(0, 0);
    const Mat lambda2 = plant.A.transpose() * p2 + p2.transpose() * plant.A + 0.25 * Mat::Identity(2, 2) +
                        eps * plant.N.transpose() * plant.N;
    CHECK((block_value(p, "Xi1/Pi1/Lambda2", v) - lambda2).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((block_value(p, "Xi1/Pi2/P2M1", v) - p2.transpose() * plant.M1).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/PB/P2B", v) - p2.transpose() * plant.B).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/PB/G2D", v) - g2 * plant.D).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/zeta", v) + zeta * Mat::Identity(1, 1)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi1/Omega", v) + Mat::Identity(6, 6)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((block_value(p, "Xi4/I-P1", v) - (Mat::Identity(2, 2) - p1.transpose())).cwiseAbs().maxCoeff() < 1e-14);
    const Mat cf = p.value("CF", v);
    CHECK((block_value(p, "Xi2/CFH", v) + cf.transpose() * plant.H).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((block_value(p, "Xi2/Lambda3", v) - (plant.H.transpose() * plant.H - sym(plant.E.transpose() * p2)))
              .cwiseAbs()
              .maxCoeff() < 1e-13);
}

TEST_CASE("builder option errors") {
    LmiOptions o;
    o.xi2 = Xi2Mode::Off;
    o.lambda = 1.0;
    CHECK(kind_of([&] { (void)build_theorem1(two_state_plant(), FilterStructure::dynamic(2, 1, 2), o); }) ==
          ErrorKind::InvalidInput);
    auto narrow = two_state_plant();
    narrow.H = Mat::Identity(1, 2);
    CHECK(kind_of([&] { (void)build_theorem1(narrow, FilterStructure::static_gain(2, 1, 1), {}); }) ==
          ErrorKind::DimensionMismatch);
    CHECK(kind_of([] { (void)parse_xi2_mode("sometimes"); }) == ErrorKind::InvalidInput);
    CHECK(parse_xi2_mode("nonstrict") == Xi2Mode::Nonstrict);
    CHECK(parse_xi1_form("printed") == Xi1Form::Printed);
}

TEST_CASE("static-gain preset couples G1 to P1") {
    const auto p = build_theorem1(two_state_plant(), FilterStructure::static_gain(2, 1, 2), {});
    CHECK_FALSE(p.has_variable("G1"));
    CHECK_FALSE(p.has_variable("CF"));
    const auto plant = two_state_plant();
    testing::Rng rng(8);
    const Vec v = testing::random_vector(rng, p.num_scalars(), -2, 2);
    const Mat expected = p.value("P1", v).transpose() * plant.A - p.value("G2", v) * plant.C;
    CHECK((p.value("G1", v) - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("strict substitution on the two-state plant") {
    const auto plant = two_state_plant();
    const auto base = two_state_problem();
    const auto p = apply_strict_substitution(base, plant.E, orthogonal_complement(plant.E));
    CHECK(p.substituted);
    CHECK(p.find_variable("X1")->kind == VarKind::Symmetric);
    CHECK(p.find_variable("X1")->rows == 2);
    CHECK(p.find_variable("Y1")->rows == 1);
    CHECK(p.find_variable("Y1")->cols == 2);
    CHECK(p.find_variable("Y2")->size() == 2);
    CHECK_FALSE(p.has_variable("P1"));
    CHECK_FALSE(p.has_variable("P2"));
    for (const auto& c : p.constraints) CHECK(c.group != "coupling");
    CHECK(has_constraint(p, "X1"));
    CHECK(has_constraint(p, "X2"));
    CHECK(constraint(p, "Xi1").expr.rows() == 13);

    const MatExpr p1 = p.derived.at("P1");
    const MatExpr asym = plant.E.transpose() * p1 - p1.transpose() * plant.E;
    double worst = asym.constant_part().cwiseAbs().maxCoeff();
    for (const auto& t : asym.terms()) worst = std::max(worst, std::abs(t.coeff));
    CHECK(worst < 1e-14);

    CHECK(kind_of([&] { (void)apply_strict_substitution(p, plant.E, orthogonal_complement(plant.E)); }) ==
          ErrorKind::SubstitutionApplied);
    CHECK(kind_of([&] { (void)apply_strict_substitution(base, plant.E, Mat::Zero(1, 3)); }) ==
          ErrorKind::DimensionMismatch);
    CHECK(kind_of([&] { (void)apply_strict_substitution(base, plant.E, Mat::Identity(1, 2)); }) ==
          ErrorKind::DimensionMismatch);
}

TEST_CASE("strict substitution with nonsingular E") {
    const auto plant = testing::regular_plant();
    const auto base = build_theorem1(plant, FilterStructure::dynamic(2, 1, 2), {});
    const Mat ep = orthogonal_complement(plant.E);
    REQUIRE(ep.rows() == 0);
    const auto p = apply_strict_substitution(base, plant.E, ep);
    CHECK(p.find_variable("Y1")->size() == 0);
    testing::Rng rng(9);
    const Vec v = testing::random_vector(rng, p.num_scalars(), -2, 2);
    CHECK((p.value("P1", v) - p.value("X1", v) * plant.E).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("margins at hand-built points") {
    LmiProblem p;
    const auto x = p.add_variable("x", VarKind::Scalar, 1, 1);
    p.add_constraint({"pos", scale(x, Mat::Identity(2, 2)), Sense::PosDef, 1e-9, ""});
    p.add_constraint({"neg", scale(x, Mat::Identity(1, 1)) - MatExpr(Mat::Constant(1, 1, 3.0)), Sense::NegDef, 1e-9, ""});
    p.add_constraint({"eq", scale(x, Mat::Identity(1, 1)) - MatExpr(Mat::Constant(1, 1, 1.0)), Sense::Zero, 0.0, ""});

    Assignment a{{"x", Mat::Constant(1, 1, 1.0)}};
    const auto good = evaluate_at(p, a);
    CHECK(good.all_passed());
    CHECK(good.find("pos")->margin == doctest::Approx(1.0 - 1e-9));
    CHECK(good.find("neg")->margin == doctest::Approx(2.0 - 1e-9));
    CHECK(good.max_equality_residual == 0.0);

    a["x"](0, 0) = 4.0;
    const auto bad = evaluate_at(p, a);
    CHECK_FALSE(bad.all_passed());
    CHECK_FALSE(bad.find("neg")->passed);
    CHECK_FALSE(bad.find("eq")->passed);

    CHECK(kind_of([&] { (void)evaluate_at(p, Assignment{}); }) == ErrorKind::MissingVariable);
}

TEST_CASE("zero assignment fails the positivity of Xi3") {
    const auto p = two_state_problem();
    const auto rep = evaluate_at(p, Vec::Zero(p.num_scalars()));
    CHECK_FALSE(rep.find("Xi3")->passed);
    CHECK(rep.find("Xi3")->extreme == 0.0);
}

TEST_CASE("margins agree with a dense expansion of the triples") {
    const auto plant = two_state_plant();
    const auto p = apply_strict_substitution(two_state_problem(), plant.E, orthogonal_complement(plant.E));
    testing::Rng rng(10);
    for (int i = 0; i < 10; ++i) {
        const Vec v = testing::random_vector(rng, p.num_scalars(), -2, 2);
        const auto rep = evaluate_at(p, v);
        for (std::size_t c = 0; c < p.constraints.size(); ++c) {
            const Mat d = dense(p.constraints[c].expr, v);
            CHECK((rep.constraints[c].value - d).cwiseAbs().maxCoeff() < 1e-13);
        }
        CHECK((unpack(p, v).at("X1") - p.value("X1", v)).norm() == 0.0);
        CHECK((pack(p, unpack(p, v)) - v).norm() == 0.0);
    }
}

TEST_CASE("dump is deterministic and matches the golden file") {
    const std::string text = dump(two_state_problem());
    CHECK(text == dump(two_state_problem()));
    CHECK(text.find("Xi1") != std::string::npos);

    const std::string path = std::string(DESCFILTER_GOLDEN_DIR) + "/theorem1_two_state.txt";
    if (std::getenv("DESCFILTER_UPDATE_GOLDEN") != nullptr) {
        std::ofstream(path) << text;
    }
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream golden;
    golden << in.rdbuf();
    CHECK(text == golden.str());
}

TEST_CASE("properties") {
    for (const auto& r : {testing::lmi_affinity_and_symmetry(), testing::xi4_schur_equivalence(),
                          testing::corollary_substitution_soundness()}) {
        INFO(r.name << ": " << r.detail);
        CHECK(r.passed);
    }
}
