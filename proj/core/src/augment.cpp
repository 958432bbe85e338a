#include "descfilter/augment.hpp"

#include "descfilter/error.hpp"

namespace descfilter {

Mat gamma_matrix(int n, int p, double gamma1, double gamma2) {
    // Rows follow Omega's (n, p, n, p) blocks, columns xi's (n, n) blocks.
    Mat g = Mat::Zero(2 * n + 2 * p, 2 * n);
    g.block(0, n, n, n) = gamma1 * Mat::Identity(n, n);
    g.block(n, n, p, n) = gamma2 * rect_identity(p, n);
    g.block(n + p, 0, n, n) = gamma1 * Mat::Identity(n, n);
    g.block(2 * n + p, 0, p, n) = gamma2 * rect_identity(p, n);
    return g;
}

AugmentedErrorSystem assemble(const DescriptorPlant& plant, const FilterRealization& f) {
    const int n = plant.n();
    const int p = plant.p();
    const int q = plant.q();
    const int qw = plant.qw();
    const int k = plant.k();
    const int l = plant.l();

    const auto need = [](const Mat& m, Eigen::Index r, Eigen::Index c, const char* name) {
        if (m.rows() != r || m.cols() != c)
            throw Error(ErrorKind::DimensionMismatch, std::string("realization ") + name + " has wrong shape");
    };
    need(f.AF, n, n, "AF");
    need(f.BF, n, p, "BF");
    need(f.CF, q, n, "CF");
    need(f.E1, n, n, "E1");
    need(f.E2, n, p, "E2");
    need(f.E3, q, p, "E3");

    AugmentedErrorSystem s;
    s.Etilde = Mat::Zero(2 * n, 2 * n);
    s.Etilde.topLeftCorner(n, n) = plant.E;
    s.Etilde.bottomRightCorner(n, n) = plant.E;

    s.Atilde = Mat::Zero(2 * n, 2 * n);
    s.Atilde.topLeftCorner(n, n) = f.AF;
    s.Atilde.topRightCorner(n, n) = f.BF * plant.C;
    s.Atilde.bottomRightCorner(n, n) = plant.A;

    s.Btilde = Mat(2 * n, qw);
    s.Btilde.topRows(n) = f.BF * plant.D;
    s.Btilde.bottomRows(n) = plant.B;

    s.Ctilde = Mat(q, 2 * n);
    s.Ctilde.leftCols(n) = -f.CF;
    s.Ctilde.rightCols(n) = plant.H;

    const int w = 2 * n + 2 * p;
    s.S1 = Mat::Zero(2 * n, w);
    s.S1.block(0, n, n, p) = f.BF;
    s.S1.block(0, n + p, n, n) = f.E1;
    s.S1.block(0, 2 * n + p, n, p) = f.E2;
    s.S1.block(n, 0, n, n) = Mat::Identity(n, n);

    s.S2 = Mat::Zero(q, w);
    s.S2.block(0, 2 * n + p, q, p) = -f.E3;

    s.M1tilde = Mat(2 * n, k);
    s.M1tilde.topRows(n) = f.BF * plant.M2;
    s.M1tilde.bottomRows(n) = plant.M1;

    s.Ntilde = Mat::Zero(l, 2 * n);
    s.Ntilde.rightCols(n) = plant.N;

    s.Gamma = gamma_matrix(n, p, plant.gamma1, plant.gamma2);
    s.gamma = combined_gamma(plant.gamma1, plant.gamma2);
    return s;
}

Vec omega_stack(const Vec& phi_x, const Vec& psi_x, const Vec& phi_xf, const Vec& psi_xf) {
    if (phi_x.size() != phi_xf.size() || psi_x.size() != psi_xf.size())
        throw Error(ErrorKind::DimensionMismatch, "omega_stack: plant and filter blocks differ in size");
    Vec out(phi_x.size() + psi_x.size() + phi_xf.size() + psi_xf.size());
    out << phi_x, psi_x, phi_xf, psi_xf;
    return out;
}

} // namespace descfilter
