#pragma once

// Randomized property checks shared by the unit tests and the acceptance
// binary. Every check is seeded and deterministic.

#include <cstdint>
#include <string>
#include <vector>

namespace descfilter::testing {

struct PropertyResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;  // the largest violation or error seen
    int cases = 0;
    std::string detail;
};

PropertyResult orthogonal_complement_identities(std::uint64_t seed = 1, int draws = 200);
PropertyResult decompose_round_trip(std::uint64_t seed = 2, int draws = 200);
PropertyResult pencil_regularity_invariance(std::uint64_t seed = 3, int draws = 50);
PropertyResult gram_form_psd(std::uint64_t seed = 4, int draws = 100);

PropertyResult jacobian_matches_finite_differences(std::uint64_t seed = 5, int draws = 100);
PropertyResult lipschitz_estimate_monotone();

PropertyResult gamma_norm_identity(std::uint64_t seed = 6, int draws = 100);
PropertyResult omega_lipschitz(std::uint64_t seed = 7, int pairs = 1000);
PropertyResult uncertainty_factorization(std::uint64_t seed = 8, int draws = 100);

PropertyResult lmi_affinity_and_symmetry(std::uint64_t seed = 9, int draws = 20);
PropertyResult xi4_schur_equivalence(std::uint64_t seed = 10, int draws = 500);
PropertyResult corollary_substitution_soundness(std::uint64_t seed = 11, int draws = 100);

PropertyResult svec_isometry(std::uint64_t seed = 12, int draws = 100);
PropertyResult cross_solver_agreement(double tol = 1e-6);

PropertyResult trapezoid_matches_closed_form();
PropertyResult eperp_rotation_invariance(std::uint64_t seed = 13, int draws = 3);

// Everything above, in module order.
std::vector<PropertyResult> all_properties();

} // namespace descfilter::testing
