#include "descfilter/filter_lmis.hpp"

#include "descfilter/error.hpp"

namespace descfilter {

std::string to_string(Xi1Form f) {
    return f == Xi1Form::Derivation ? "derivation" : "printed";
}

std::string to_string(Xi2Mode m) {
    switch (m) {
    case Xi2Mode::Strict: return "strict";
    case Xi2Mode::Nonstrict: return "nonstrict";
    case Xi2Mode::Off: return "off";
    }
    return "?";
}

Xi2Mode parse_xi2_mode(const std::string& s) {
    if (s == "strict") return Xi2Mode::Strict;
    if (s == "nonstrict") return Xi2Mode::Nonstrict;
    if (s == "off") return Xi2Mode::Off;
    throw Error(ErrorKind::InvalidInput, "unknown xi2 mode '" + s + "' (strict, nonstrict, off)");
}

Xi1Form parse_xi1_form(const std::string& s) {
    if (s == "derivation") return Xi1Form::Derivation;
    if (s == "printed") return Xi1Form::Printed;
    throw Error(ErrorKind::InvalidInput, "unknown xi1 form '" + s + "' (derivation, printed)");
}

namespace {

Mat eye(Eigen::Index n) { return Mat::Identity(n, n); }

void check_shape(const Mat& m, Eigen::Index r, Eigen::Index c, const char* what) {
    if (m.rows() != r || m.cols() != c) {
        throw Error(ErrorKind::DimensionMismatch, std::string(what) + " is " + std::to_string(m.rows()) + "x" +
                                                      std::to_string(m.cols()) + ", expected " + std::to_string(r) +
                                                      "x" + std::to_string(c));
    }
}

// Records consecutive diagonal-aligned blocks of a block matrix.
void record_blocks(LmiProblem& prob, int constraint, const std::string& prefix,
                   const std::vector<std::pair<std::string, Eigen::Index>>& rows,
                   const std::vector<std::tuple<std::string, int, int>>& cells) {
    std::vector<Eigen::Index> start(rows.size() + 1, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) start[i + 1] = start[i] + rows[i].second;
    for (const auto& [name, i, j] : cells) {
        prob.blocks.push_back({prefix + "/" + name, constraint, start[static_cast<std::size_t>(i)],
                               start[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(i)].second,
                               rows[static_cast<std::size_t>(j)].second});
    }
}

} // namespace

LmiProblem build_theorem1(const DescriptorPlant& plant, const FilterStructure& structure, const LmiOptions& opts) {
    const int n = plant.n(), p = plant.p(), q = plant.q(), k = plant.k(), l = plant.l(), qw = plant.qw();
    check_shape(plant.E, n, n, "E");
    check_shape(plant.A, n, n, "A");
    check_shape(plant.B, n, qw, "B");
    check_shape(plant.C, p, n, "C");
    check_shape(plant.D, p, qw, "D");
    check_shape(plant.M1, n, k, "M1");
    check_shape(plant.M2, p, k, "M2");
    check_shape(plant.N, l, n, "N");
    check_shape(plant.H, q, n, "H");
    check_shape(structure.e1, n, n, "e1");
    if (structure.preset != FilterPreset::StaticGain) check_shape(structure.e2, n, p, "e2");
    check_shape(structure.e3, q, p, "e3");
    if (structure.preset == FilterPreset::StaticGain && q != n) {
        throw Error(ErrorKind::DimensionMismatch, "static-gain preset needs q = n (CF = I)");
    }
    if (!(opts.delta >= 0.0)) throw Error(ErrorKind::InvalidInput, "strictness shift must be >= 0");
    if (!(opts.lambda >= 0.0)) throw Error(ErrorKind::InvalidInput, "multiobjective weight must be >= 0");
    const bool peak = opts.xi2 != Xi2Mode::Off;
    if (opts.lambda > 0.0 && !peak) {
        throw Error(ErrorKind::InvalidInput, "a weight on alpha needs the peak constraints (xi2 mode strict or nonstrict)");
    }

    const double gamma = combined_gamma(plant.gamma1, plant.gamma2);
    const double g2 = gamma * gamma;

    LmiProblem prob;
    prob.name = "theorem1";
    prob.tags["xi1"] = to_string(opts.xi1);
    prob.tags["xi2"] = to_string(opts.xi2);
    prob.tags["preset"] = to_string(structure.preset);

    const MatExpr zeta = prob.add_variable("zeta", VarKind::Scalar, 1, 1);
    const MatExpr eps = prob.add_variable("epsilon", VarKind::Scalar, 1, 1);
    MatExpr alpha;
    if (peak) alpha = prob.add_variable("alpha", VarKind::Scalar, 1, 1);
    const MatExpr P1 = prob.add_variable("P1", VarKind::Rectangular, n, n);
    const MatExpr P2 = prob.add_variable("P2", VarKind::Rectangular, n, n);
    MatExpr G1;
    const bool static_gain = structure.preset == FilterPreset::StaticGain;
    if (!static_gain) G1 = prob.add_variable("G1", VarKind::Rectangular, n, n);
    const MatExpr G2 = prob.add_variable("G2", VarKind::Rectangular, n, p);
    if (static_gain) G1 = P1.transpose() * plant.A - G2 * plant.C;

    MatExpr CF = MatExpr(static_gain ? eye(n) : Mat(plant.H));
    if (peak && !static_gain) CF = prob.add_variable("CF", VarKind::Rectangular, q, n);
    MatExpr E3 = MatExpr(structure.e3);
    if (peak && structure.e3_mode == E3Mode::Decision) E3 = prob.add_variable("E3", VarKind::Rectangular, q, p);

    const MatExpr P1t = P1.transpose();
    const MatExpr P2t = P2.transpose();
    const MatExpr E2col = static_gain ? -G2 : P1t * structure.e2;

    // Xi1
    const MatExpr lambda1 = G1 + G1.transpose() + MatExpr(Mat(g2 * eye(n)));
    const MatExpr lambda2 = plant.A.transpose() * P2 + P2t * plant.A + MatExpr(Mat(g2 * eye(n))) +
                            scale(eps, plant.N.transpose() * plant.N);
    const MatExpr pi1 = symmetric_blocks({{lambda1, G2 * plant.C}, {lambda2}});
    const MatExpr pm = block_matrix({{G2 * plant.M2}, {P2t * plant.M1}});
    const MatExpr ps_sized = block_matrix({{MatExpr::zero(n, n), G2, P1t * structure.e1, E2col},
                                           {P2t, MatExpr::zero(n, p), MatExpr::zero(n, n), MatExpr::zero(n, p)}});
    const int w = 2 * n + 2 * p;
    MatExpr xi1;
    if (opts.xi1 == Xi1Form::Derivation) {
        const MatExpr pb = block_matrix({{G2 * plant.D}, {P2t * plant.B}});
        xi1 = symmetric_blocks({{pi1, pm, ps_sized, pb},
                                {scale(-eps, eye(k)), MatExpr::zero(k, w), MatExpr::zero(k, qw)},
                                {MatExpr(Mat(-eye(w))), MatExpr::zero(w, qw)},
                                {scale(-zeta, eye(qw))}});
    } else {
        xi1 = symmetric_blocks({{pi1, pm, ps_sized}, {scale(-eps, eye(k)), MatExpr::zero(k, w)}, {scale(-zeta, eye(w))}});
    }
    prob.add_constraint({"Xi1", xi1, Sense::NegDef, opts.delta, "dissipation"});
    {
        const int c = static_cast<int>(prob.constraints.size()) - 1;
        std::vector<std::pair<std::string, Eigen::Index>> rows = {{"xF", n}, {"x", n}, {"F", k}, {"Omega", w}};
        std::vector<std::tuple<std::string, int, int>> cells = {
            {"Pi1/Lambda1", 0, 0}, {"Pi1/G2C", 0, 1}, {"Pi1/Lambda2", 1, 1}, {"Pi2/G2M2", 0, 2},
            {"Pi2/P2M1", 1, 2},    {"PS1/top", 0, 3}, {"PS1/bottom", 1, 3},   {"eps", 2, 2},
            {"Omega", 3, 3}};
        if (opts.xi1 == Xi1Form::Derivation) {
            rows.emplace_back("w", qw);
            cells.emplace_back("PB/G2D", 0, 4);
            cells.emplace_back("PB/P2B", 1, 4);
            cells.emplace_back("zeta", 4, 4);
        }
        record_blocks(prob, c, "Xi1", rows, cells);
    }

    // Xi2, Xi3
    if (peak) {
        const Mat third_q = -eye(q) / 3.0;
        const Mat third_n = -eye(n) / 3.0;
        const MatExpr ag = scale(alpha, gamma * eye(n));
        const MatExpr lead = -(plant.E.transpose() * P1).symmetrized();
        const MatExpr lambda3 = MatExpr(Mat(plant.H.transpose() * plant.H)) - (plant.E.transpose() * P2).symmetrized();
        const MatExpr xi2 = symmetric_blocks({{lead, CF.transpose(), ag, -(CF.transpose() * plant.H), MatExpr::zero(n, n)},
                                              {MatExpr(third_q), MatExpr::zero(q, n), MatExpr::zero(q, n), MatExpr::zero(q, n)},
                                              {MatExpr(third_n), MatExpr::zero(n, n), MatExpr::zero(n, n)},
                                              {lambda3, ag},
                                              {MatExpr(third_n)}});
        const bool strict = opts.xi2 == Xi2Mode::Strict;
        prob.add_constraint({"Xi2", xi2, strict ? Sense::NegDef : Sense::NegSemidef, strict ? opts.delta : 0.0, "peak"});
        record_blocks(prob, static_cast<int>(prob.constraints.size()) - 1, "Xi2",
                      {{"r1", n}, {"r2", q}, {"r3", n}, {"r4", n}, {"r5", n}},
                      {{"EP1", 0, 0}, {"CF", 0, 1}, {"alpha_gamma", 0, 2}, {"CFH", 0, 3}, {"Lambda3", 3, 3},
                       {"alpha_gamma_2", 3, 4}});

        const MatExpr xi3 = symmetric_blocks({{scale(alpha, eye(q)), E3}, {scale(alpha, eye(p))}});
        prob.add_constraint({"Xi3", xi3, Sense::PosDef, opts.delta, "peak"});
        record_blocks(prob, static_cast<int>(prob.constraints.size()) - 1, "Xi3", {{"q", q}, {"p", p}},
                      {{"E3", 0, 1}});
    }

    // Xi4
    const MatExpr xi4 = symmetric_blocks({{MatExpr(eye(n)), MatExpr(eye(n)) - P1t}, {MatExpr(eye(n))}});
    prob.add_constraint({"Xi4", xi4, Sense::PosDef, opts.delta, "nonsingularity"});
    record_blocks(prob, static_cast<int>(prob.constraints.size()) - 1, "Xi4", {{"a", n}, {"b", n}},
                  {{"I-P1", 0, 1}});

    // E^T P_i = P_i^T E, and E^T P_i >= 0 on the range of E^T. Outside that
    // range the equality already forces E^T P_i to vanish, so the PSD
    // condition is stated only where it can be strictly satisfied.
    const Mat u = range_basis(plant.E.transpose());
    const Mat et = plant.E.transpose();
    for (const auto& [label, Pi] : {std::pair<std::string, MatExpr>{"P1", P1}, {"P2", P2}}) {
        const MatExpr ep = et * Pi;
        prob.add_constraint({"sym(E'" + label + ")", ep - ep.transpose(), Sense::Zero, 0.0, "coupling"});
        if (u.cols() > 0) {
            prob.add_constraint({"psd(E'" + label + ")", (u.transpose() * ep.symmetrized() * u).symmetrized(),
                                 Sense::PosSemidef, 0.0, "coupling"});
        }
    }

    prob.add_objective("zeta", 1.0);
    if (opts.lambda > 0.0) prob.add_objective("alpha", opts.lambda);

    prob.derived["P1"] = P1;
    prob.derived["P2"] = P2;
    prob.derived["G1"] = G1;
    prob.derived["G2"] = G2;
    prob.derived["CF"] = CF;
    prob.derived["E1"] = MatExpr(structure.e1);
    if (!static_gain) prob.derived["E2"] = MatExpr(structure.e2);
    prob.derived["E3"] = E3;
    return prob;
}

LmiProblem apply_strict_substitution(const LmiProblem& problem, const Mat& e, const Mat& eperp) {
    if (problem.substituted) throw Error(ErrorKind::SubstitutionApplied, "strict substitution already applied");
    const DecisionVar* p1 = problem.find_variable("P1");
    const DecisionVar* p2 = problem.find_variable("P2");
    if (!p1 || !p2) throw Error(ErrorKind::InvalidInput, "problem has no P1/P2 variables to substitute");
    const int n = p1->rows;
    check_shape(e, n, n, "E");
    const auto s = static_cast<Eigen::Index>(rank_of(e));
    if (eperp.rows() != n - s || eperp.cols() != n) {
        throw Error(ErrorKind::DimensionMismatch, "Eperp is " + std::to_string(eperp.rows()) + "x" +
                                                      std::to_string(eperp.cols()) + ", expected " +
                                                      std::to_string(n - s) + "x" + std::to_string(n));
    }
    if (eperp.size() > 0 && (eperp * e).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, e.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::DimensionMismatch, "Eperp * E is not zero");
    }

    LmiProblem out;
    out.name = problem.name + "+strict";
    out.tags = problem.tags;
    out.substituted = true;
    std::vector<AffineScalar> map(static_cast<std::size_t>(problem.num_scalars()));
    for (const auto& v : problem.variables) {
        if (v.name == "P1" || v.name == "P2") continue;
        out.add_variable(v.name, v.kind, v.rows, v.cols);
        const int offset = out.find_variable(v.name)->offset;
        for (int i = 0; i < v.size(); ++i) map[static_cast<std::size_t>(v.offset + i)] = {0.0, {{offset + i, 1.0}}};
    }
    const auto m = static_cast<int>(n - s);
    const MatExpr X1 = out.add_variable("X1", VarKind::Symmetric, n, n);
    const MatExpr X2 = out.add_variable("X2", VarKind::Symmetric, n, n);
    const MatExpr Y1 = out.add_variable("Y1", VarKind::Rectangular, m, n);
    const MatExpr Y2 = out.add_variable("Y2", VarKind::Rectangular, m, n);

    for (const auto& [var, X, Y] : {std::tuple{p1, X1, Y1}, std::tuple{p2, X2, Y2}}) {
        const MatExpr P = X * e + eperp.transpose() * Y;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                AffineScalar a;
                a.constant = P.constant_part()(i, j);
                for (const auto& t : P.terms()) {
                    if (t.row == i && t.col == j) a.terms.emplace_back(t.var, t.coeff);
                }
                map[static_cast<std::size_t>(var->offset + i * n + j)] = std::move(a);
            }
        }
    }

    for (const auto& c : problem.constraints) {
        if (c.group == "coupling") continue;
        Constraint nc = c;
        nc.expr = c.expr.substitute(map);
        out.add_constraint(std::move(nc));
    }
    const double delta = problem.constraints.empty() ? 1e-9 : problem.constraints.front().shift;
    out.add_constraint({"X1", X1, Sense::PosDef, delta, "positivity"});
    out.add_constraint({"X2", X2, Sense::PosDef, delta, "positivity"});

    for (const auto& b : problem.blocks) {
        // Constraint indices shift once coupling constraints are dropped.
        const std::string& cname = problem.constraints[static_cast<std::size_t>(b.constraint)].name;
        for (std::size_t i = 0; i < out.constraints.size(); ++i) {
            if (out.constraints[i].name == cname) {
                BlockInfo nb = b;
                nb.constraint = static_cast<int>(i);
                out.blocks.push_back(nb);
            }
        }
    }
    for (const auto& v : problem.variables) {
        if (problem.objective.size() == 0) break;
        if (v.name == "P1" || v.name == "P2") continue;
        const int offset = out.find_variable(v.name)->offset;
        for (int i = 0; i < v.size(); ++i) out.objective(offset + i) = problem.objective(v.offset + i);
    }
    for (const auto& [key, expr] : problem.derived) out.derived[key] = expr.substitute(map);
    out.derived["X1"] = X1;
    out.derived["X2"] = X2;
    out.derived["Y1"] = Y1;
    out.derived["Y2"] = Y2;
    return out;
}

} // namespace descfilter
