#pragma once

// Constraint systems for robust energy-to-peak filter synthesis on a
// descriptor plant.

#include <string>

#include "descfilter/lmi.hpp"
#include "descfilter/model.hpp"

namespace descfilter {

enum class Xi1Form {
    Derivation,  // [Pi1, PM, PS, PB; *, -eps I, 0, 0; *, *, -I, 0; *, *, *, -zeta I]
    Printed,     // [Pi1, PM, PS; *, -eps I, 0; *, *, -zeta I]
};

enum class Xi2Mode { Strict, Nonstrict, Off };

[[nodiscard]] std::string to_string(Xi1Form f);
[[nodiscard]] std::string to_string(Xi2Mode m);
[[nodiscard]] Xi2Mode parse_xi2_mode(const std::string& s);
[[nodiscard]] Xi1Form parse_xi1_form(const std::string& s);

struct LmiOptions {
    Xi1Form xi1 = Xi1Form::Derivation;
    Xi2Mode xi2 = Xi2Mode::Strict;
    double lambda = 0.0;  // objective zeta + lambda * alpha
    double delta = 1e-9;  // strictness shift
};

/// Decision variables zeta, epsilon, P1, P2, G2 always; G1 unless the
/// structure is static-gain (then G1 = P1^T A - G2 C); alpha, CF and E3
/// only while the peak constraints are active.
///
/// The storage function is xi^T Et^T P xi with P = diag(P1, P2); the
/// dissipation inequality is written with P^T on the left, so the filter is
/// recovered as AF = P1^-T G1, BF = P1^-T G2.
///
/// Constraint names: Xi1, Xi2, Xi3, Xi4, sym(E'P1), sym(E'P2), psd(E'P1),
/// psd(E'P2). The last four carry group "coupling".
[[nodiscard]] LmiProblem build_theorem1(const DescriptorPlant& plant, const FilterStructure& structure,
                                        const LmiOptions& opts = {});

/// Replaces P_i by X_i E + Eperp^T Y_i (X_i symmetric, constrained > 0) and
/// drops the coupling constraints, which then hold by construction.
[[nodiscard]] LmiProblem apply_strict_substitution(const LmiProblem& problem, const Mat& e, const Mat& eperp);

} // namespace descfilter
