#pragma once

// End-to-end filter synthesis: build the constraint system, solve it,
// recover the filter and certify the result.

#include <optional>
#include <string>
#include <vector>

#include "descfilter/filter_lmis.hpp"
#include "descfilter/model.hpp"
#include "descfilter/sdp.hpp"

namespace descfilter {

enum class SynthesisMode {
    Corollary,  // P_i = X_i E + Eperp^T Y_i, strict constraints only
    Theorem1,   // explicit equalities and PSD couplings
};

[[nodiscard]] std::string to_string(SynthesisMode m);
[[nodiscard]] SynthesisMode parse_synthesis_mode(const std::string& s);

struct SynthesisOptions {
    SynthesisMode mode = SynthesisMode::Corollary;
    Xi1Form xi1 = Xi1Form::Derivation;
    // Unset: try strict, then nonstrict, then off.
    std::optional<Xi2Mode> xi2;
    double lambda = 0.0;
    double delta = 1e-9;
    SolverOptions solver;
    // Replaces orthogonal_complement(E) in corollary mode.
    std::optional<Mat> eperp;
};

struct RungAttempt {
    Xi2Mode xi2 = Xi2Mode::Strict;
    SolveStatus status = SolveStatus::NumericalTrouble;
    double objective = 0.0;
    int iterations = 0;
    std::string note;
};

struct SynthesisCertificate {
    SynthesisMode mode = SynthesisMode::Corollary;
    Xi2Mode xi2_mode = Xi2Mode::Off;
    Xi1Form xi1 = Xi1Form::Derivation;
    Mat E;
    Mat P1, P2;
    Mat X1, X2, Y1, Y2;  // corollary mode only
    Mat G1, G2;
    Mat CF, E3;
    double epsilon = 0.0;
    double alpha = 0.0;  // 0 when the peak constraints are off
    double zeta = 0.0;
    double lambda = 0.0;
    MarginsReport margins;
    std::vector<RungAttempt> attempts;

    [[nodiscard]] double mu_star() const;
    [[nodiscard]] bool peak_certified() const { return xi2_mode != Xi2Mode::Off; }
};

struct SynthesisResult {
    FilterRealization filter;
    SynthesisCertificate certificate;
    LmiProblem problem;  // the rung that succeeded
    Solution solution;
};

/// Throws SynthesisInfeasible, listing every rung tried, when no rung yields
/// a certified optimum.
[[nodiscard]] SynthesisResult synthesize(const DescriptorPlant& plant, const FilterStructure& structure,
                                         const SynthesisOptions& opts = {});

/// Problem the certificate's rung was solved on, rebuilt from scratch, and
/// the certificate's values packed into its unknowns.
[[nodiscard]] LmiProblem rebuild_problem(const DescriptorPlant& plant, const FilterStructure& structure,
                                         const SynthesisCertificate& cert, double delta = 1e-9);
[[nodiscard]] Vec pack_certificate(const LmiProblem& problem, const SynthesisCertificate& cert);

struct FilterGains {
    Mat AF;
    Mat BF;
};

/// AF = P1^-T G1, BF = P1^-T G2 (see build_theorem1 for the transpose).
/// Throws Internal if ||I - P1|| >= 1 or the solve residual is too large.
[[nodiscard]] FilterGains recover_filter(const SynthesisCertificate& cert);

// xi^T Et^T P xi with Et = diag(E, E), P = diag(P1, P2), xi = [xF; x].
[[nodiscard]] double lyapunov_value(const SynthesisCertificate& cert, const Vec& xi);

struct Xi2Diagnosis {
    bool e_singular = false;
    bool obstruction = false;
    // gamma == 0: only the strict form is blocked for every CF; the
    // nonstrict form is blocked iff the candidate CF sees the null space of E.
    bool conditional = false;
    bool candidate_leaves_row_space = false;
    Vec witness;  // unit v with E v = 0
    double gamma = 0.0;
    std::string explanation;
};

/// Structural check of the peak constraint Xi2. Eliminating its -I/3 blocks
/// leaves 3 a^2 g^2 I + 3 CF^T CF < sym(E^T P1), whose right-hand side
/// vanishes along any v with E v = 0. candidate_cf defaults to H.
[[nodiscard]] Xi2Diagnosis diagnose_xi2(const DescriptorPlant& plant, double gamma,
                                        const std::optional<Mat>& candidate_cf = std::nullopt);

} // namespace descfilter
