#include "descfilter/synthesis.hpp"

#include <cmath>
#include <sstream>

#include "descfilter/error.hpp"

namespace descfilter {

std::string to_string(SynthesisMode m) {
    return m == SynthesisMode::Corollary ? "corollary1-strict" : "theorem1-sdp";
}

SynthesisMode parse_synthesis_mode(const std::string& s) {
    if (s == "corollary1-strict" || s == "corollary") return SynthesisMode::Corollary;
    if (s == "theorem1-sdp" || s == "theorem1") return SynthesisMode::Theorem1;
    throw Error(ErrorKind::InvalidInput, "unknown synthesis mode '" + s + "' (corollary, theorem1)");
}

double SynthesisCertificate::mu_star() const { return std::sqrt(std::max(zeta, 0.0)); }

namespace {

LmiProblem build_rung(const DescriptorPlant& plant, const FilterStructure& structure, SynthesisMode mode,
                      Xi1Form xi1, Xi2Mode xi2, double lambda, double delta, const std::optional<Mat>& eperp) {
    LmiOptions lo;
    lo.xi1 = xi1;
    lo.xi2 = xi2;
    lo.lambda = lambda;
    lo.delta = delta;
    LmiProblem prob = build_theorem1(plant, structure, lo);
    if (mode == SynthesisMode::Corollary) {
        prob = apply_strict_substitution(prob, plant.E, eperp ? *eperp : orthogonal_complement(plant.E));
    }
    return prob;
}

double scalar_or_zero(const LmiProblem& prob, const std::string& name, const Vec& y) {
    return prob.has_variable(name) ? prob.value(name, y)(0, 0) : 0.0;
}

} // namespace

SynthesisResult synthesize(const DescriptorPlant& plant, const FilterStructure& structure, const SynthesisOptions& opts) {
    require_valid(plant);
    std::vector<Xi2Mode> ladder;
    if (opts.xi2) {
        ladder = {*opts.xi2};
    } else {
        ladder = {Xi2Mode::Strict, Xi2Mode::Nonstrict, Xi2Mode::Off};
    }
    std::vector<RungAttempt> attempts;
    for (const Xi2Mode rung : ladder) {
        // A weight on alpha is meaningless once alpha is gone.
        const double lambda = rung == Xi2Mode::Off ? 0.0 : opts.lambda;
        LmiProblem prob = build_rung(plant, structure, opts.mode, opts.xi1, rung, lambda, opts.delta, opts.eperp);
        const ConicProgram prog = lower(prob);
        Solution sol = solve(prog, opts.solver);
        RungAttempt attempt{rung, sol.status, sol.objective, sol.iterations, sol.message};
        if (sol.status != SolveStatus::Optimal) {
            attempts.push_back(attempt);
            continue;
        }
        MarginsReport margins = certify(prob, sol);
        if (!margins.all_passed()) {
            attempt.note = "solver optimum failed certification";
            attempts.push_back(attempt);
            continue;
        }
        attempts.push_back(attempt);

        SynthesisResult out;
        SynthesisCertificate& cert = out.certificate;
        cert.mode = opts.mode;
        cert.xi2_mode = rung;
        cert.xi1 = opts.xi1;
        cert.E = plant.E;
        cert.P1 = prob.value("P1", sol.y);
        cert.P2 = prob.value("P2", sol.y);
        if (opts.mode == SynthesisMode::Corollary) {
            cert.X1 = prob.value("X1", sol.y);
            cert.X2 = prob.value("X2", sol.y);
            cert.Y1 = prob.value("Y1", sol.y);
            cert.Y2 = prob.value("Y2", sol.y);
        }
        cert.G1 = prob.value("G1", sol.y);
        cert.G2 = prob.value("G2", sol.y);
        cert.CF = prob.value("CF", sol.y);
        cert.E3 = prob.value("E3", sol.y);
        cert.zeta = scalar_or_zero(prob, "zeta", sol.y);
        cert.epsilon = scalar_or_zero(prob, "epsilon", sol.y);
        cert.alpha = scalar_or_zero(prob, "alpha", sol.y);
        cert.lambda = lambda;
        cert.margins = std::move(margins);
        cert.attempts = attempts;

        const FilterGains gains = recover_filter(cert);
        FilterRealization& f = out.filter;
        f.AF = gains.AF;
        f.BF = gains.BF;
        f.CF = cert.CF;
        f.E1 = prob.value("E1", sol.y);
        f.E2 = structure.preset == FilterPreset::StaticGain ? Mat(-gains.BF) : prob.value("E2", sol.y);
        f.E3 = cert.E3;
        f.mu_star = cert.mu_star();
        out.problem = std::move(prob);
        out.solution = std::move(sol);
        return out;
    }
    std::ostringstream msg;
    msg << "no rung of the peak-constraint ladder is feasible:";
    for (const auto& a : attempts) {
        msg << " [" << to_string(a.xi2) << ": " << to_string(a.status);
        if (!a.note.empty()) msg << ", " << a.note;
        msg << ']';
    }
    throw Error(ErrorKind::SynthesisInfeasible, msg.str());
}

LmiProblem rebuild_problem(const DescriptorPlant& plant, const FilterStructure& structure,
                           const SynthesisCertificate& cert, double delta) {
    return build_rung(plant, structure, cert.mode, cert.xi1, cert.xi2_mode, cert.lambda, delta, std::nullopt);
}

Vec pack_certificate(const LmiProblem& problem, const SynthesisCertificate& cert) {
    auto scalar = [](double v) { return Mat::Constant(1, 1, v); };
    const Assignment all = {
        {"zeta", scalar(cert.zeta)}, {"epsilon", scalar(cert.epsilon)}, {"alpha", scalar(cert.alpha)},
        {"P1", cert.P1},             {"P2", cert.P2},                   {"G1", cert.G1},
        {"G2", cert.G2},             {"CF", cert.CF},                   {"E3", cert.E3},
        {"X1", cert.X1},             {"X2", cert.X2},                   {"Y1", cert.Y1},
        {"Y2", cert.Y2},
    };
    Assignment used;
    for (const auto& v : problem.variables) {
        auto it = all.find(v.name);
        if (it != all.end() && (it->second.size() > 0 || v.size() == 0)) used[v.name] = it->second;
    }
    return pack(problem, used);
}

FilterGains recover_filter(const SynthesisCertificate& cert) {
    const Eigen::Index n = cert.P1.rows();
    if (cert.P1.cols() != n || cert.G1.rows() != n || cert.G2.rows() != n) {
        throw Error(ErrorKind::DimensionMismatch, "certificate matrices have inconsistent shapes");
    }
    const double dist = spectral_norm(Mat::Identity(n, n) - cert.P1);
    if (!(dist < 1.0)) {
        throw Error(ErrorKind::Internal, "||I - P1|| = " + std::to_string(dist) + " >= 1, P1 may be singular");
    }
    const Eigen::PartialPivLU<Mat> lu(cert.P1.transpose());
    FilterGains g{lu.solve(cert.G1), lu.solve(cert.G2)};
    const double r1 = (cert.P1.transpose() * g.AF - cert.G1).norm();
    const double r2 = (cert.P1.transpose() * g.BF - cert.G2).norm();
    if (r1 > 1e-8 * std::max(1.0, cert.G1.norm()) || r2 > 1e-8 * std::max(1.0, cert.G2.norm())) {
        throw Error(ErrorKind::Internal, "filter recovery residual too large");
    }
    return g;
}

double lyapunov_value(const SynthesisCertificate& cert, const Vec& xi) {
    const Eigen::Index n = cert.E.rows();
    if (xi.size() != 2 * n) {
        throw Error(ErrorKind::DimensionMismatch, "xi has length " + std::to_string(xi.size()) + ", expected " +
                                                      std::to_string(2 * n));
    }
    const Vec xf = xi.head(n);
    const Vec x = xi.tail(n);
    return xf.dot(cert.E.transpose() * cert.P1 * xf) + x.dot(cert.E.transpose() * cert.P2 * x);
}

Xi2Diagnosis diagnose_xi2(const DescriptorPlant& plant, double gamma, const std::optional<Mat>& candidate_cf) {
    Xi2Diagnosis d;
    d.gamma = gamma;
    const Mat nul = null_space(plant.E);
    d.e_singular = nul.cols() > 0;
    if (!d.e_singular) {
        d.explanation = "E is nonsingular; sym(E'P1) can be positive definite, no structural obstruction";
        return d;
    }
    d.witness = nul.col(0);
    const Eigen::Index imax = [&] {
        Eigen::Index i = 0;
        d.witness.cwiseAbs().maxCoeff(&i);
        return i;
    }();
    if (d.witness(imax) < 0) d.witness = -d.witness;

    const Mat cf = candidate_cf ? *candidate_cf : plant.H;
    const double seen = cf.cols() == plant.E.cols() ? (cf * nul).norm() : 0.0;
    d.candidate_leaves_row_space = seen > 1e-10 * std::max(1.0, cf.norm());

    std::ostringstream msg;
    msg << "E is singular (rank " << rank_of(plant.E) << " of " << plant.E.rows() << "); along v with E v = 0, "
        << "v' sym(E'P1) v = 0 for every P1, while eliminating the -I/3 blocks of Xi2 requires "
        << "3 a^2 g^2 |v|^2 + 3 |CF v|^2 < v' sym(E'P1) v. ";
    if (gamma > 0.0) {
        d.obstruction = true;
        msg << "With gamma = " << gamma << " > 0 this fails for every alpha > 0: Xi2 < 0 is infeasible.";
    } else {
        d.obstruction = true;
        d.conditional = true;
        msg << "With gamma = 0 the strict form is still infeasible (0 < 0); the nonstrict form is blocked only if "
            << "CF v != 0, which for the candidate CF is " << (d.candidate_leaves_row_space ? "the case" : "not the case")
            << ".";
    }
    d.explanation = msg.str();
    return d;
}

} // namespace descfilter
