#pragma once

#include "descfilter/model.hpp"

namespace descfilter {

/// Filter error dynamics for xi = [xF; x]:
///
///   Et xi' = (At + M1t F Nt) xi + S1 Omega(xi, u) + Bt w
///   e      = Ct xi + S2 Omega(xi, u)
///
/// Omega = [phi(x); psi(x); phi(xF); psi(xF)], column blocks of S1 and S2
/// are (n, p, n, p). M1t and Nt use the compact factorization
/// M1t = [BF M2; M1], Nt = [0 N].
struct AugmentedErrorSystem {
    Mat Etilde, Atilde, Btilde, Ctilde;
    Mat S1, S2;
    Mat M1tilde, Ntilde;
    Mat Gamma;
    double gamma = 0.0;
};

// The realization carries E1, E2, E3 so static-gain filters (E2 = -L) are covered.
[[nodiscard]] AugmentedErrorSystem assemble(const DescriptorPlant& plant, const FilterRealization& filter);

// [phi(x); psi(x); phi(xF); psi(xF)]
[[nodiscard]] Vec omega_stack(const Vec& phi_x, const Vec& psi_x, const Vec& phi_xf, const Vec& psi_xf);

// (2n + 2p) x 2n aggregation matrix with spectral norm sqrt(gamma1^2 + gamma2^2).
[[nodiscard]] Mat gamma_matrix(int n, int p, double gamma1, double gamma2);

} // namespace descfilter
