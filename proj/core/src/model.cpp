#include "descfilter/model.hpp"

#include <cmath>
#include <sstream>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

std::string shape(const Mat& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_shape(std::vector<ValidationCheck>& out, bool& dims_ok, const char* name, const Mat& m, Eigen::Index rows,
                 Eigen::Index cols) {
    const bool ok = m.rows() == rows && m.cols() == cols;
    if (!ok) {
        dims_ok = false;
        out.push_back({std::string("shape ") + name, false,
                       "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " + shape(m)});
    }
}

} // namespace

bool ValidationReport::ok() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << (c.passed ? "  [pass] " : "  [FAIL] ") << c.name;
        if (!c.detail.empty()) os << ": " << c.detail;
        os << '\n';
    }
    return os.str();
}

ValidationReport validate(const DescriptorPlant& plant) {
    ValidationReport rep;
    auto& out = rep.checks;
    const Eigen::Index n = plant.E.rows();
    const Eigen::Index p = plant.C.rows();
    const Eigen::Index q = plant.H.rows();
    const Eigen::Index k = plant.M1.cols();
    const Eigen::Index l = plant.N.rows();
    const Eigen::Index qw = plant.B.cols();

    bool dims_ok = n > 0;
    if (n == 0) out.push_back({"shape E", false, "E must be non-empty"});
    check_shape(out, dims_ok, "E", plant.E, n, n);
    check_shape(out, dims_ok, "A", plant.A, n, n);
    check_shape(out, dims_ok, "B", plant.B, n, qw);
    check_shape(out, dims_ok, "C", plant.C, p, n);
    check_shape(out, dims_ok, "D", plant.D, p, qw);
    check_shape(out, dims_ok, "M1", plant.M1, n, k);
    check_shape(out, dims_ok, "M2", plant.M2, p, k);
    check_shape(out, dims_ok, "N", plant.N, l, n);
    check_shape(out, dims_ok, "H", plant.H, q, n);
    if (p == 0) {
        dims_ok = false;
        out.push_back({"shape C", false, "at least one measured output is required"});
    }
    if (plant.phi.size() != n || plant.phi.n() != n) {
        dims_ok = false;
        out.push_back({"shape phi", false, "phi must have n components over x1..xn"});
    }
    if (plant.psi.size() != p || plant.psi.n() != n) {
        dims_ok = false;
        out.push_back({"shape psi", false, "psi must have p components over x1..xn"});
    }
    if (plant.phi.m() != plant.inputs || plant.psi.m() != plant.inputs) {
        dims_ok = false;
        out.push_back({"shape u", false, "phi and psi must be declared over the plant inputs"});
    }
    if (dims_ok) out.push_back({"dimensions", true, "n=" + std::to_string(n) + " p=" + std::to_string(p) +
                                                       " q=" + std::to_string(q) + " k=" + std::to_string(k) +
                                                       " l=" + std::to_string(l) + " qw=" + std::to_string(qw)});

    bool finite = true;
    for (const Mat* m : {&plant.E, &plant.A, &plant.B, &plant.C, &plant.D, &plant.M1, &plant.M2, &plant.N, &plant.H})
        finite = finite && m->allFinite();
    out.push_back({"finite entries", finite, finite ? "" : "matrices contain NaN or Inf"});

    const bool gammas_ok = plant.gamma1 >= 0.0 && plant.gamma2 >= 0.0 && std::isfinite(plant.gamma1) &&
                           std::isfinite(plant.gamma2);
    out.push_back({"lipschitz constants", gammas_ok, gammas_ok ? "" : "gamma1, gamma2 must be finite and >= 0"});

    if (!dims_ok || !finite) return rep;

    rep.rank_e = rank_of(plant.E);
    const bool rank_ok = rep.rank_e > 0;
    out.push_back({"rank E", rank_ok, "s = " + std::to_string(rep.rank_e) + " of n = " + std::to_string(n)});

    const bool regular = pencil_regular(plant.E, plant.A);
    out.push_back({"regular pencil", regular, regular ? "" : "det(sE - A) vanishes identically"});

    if (regular) {
        const bool obs = observable(plant.E, plant.A, plant.C);
        out.push_back({"observable", obs, obs ? "" : "rank [sE - A; C] < n at some s"});
    } else {
        out.push_back({"observable", false, "skipped: pencil not regular"});
    }

    try {
        const Vec u0 = Vec::Zero(plant.inputs);
        const bool phi0 = vanishes_at_origin(plant.phi, u0, 0.0);
        const bool psi0 = vanishes_at_origin(plant.psi, u0, 0.0);
        out.push_back({"phi(0) = 0", phi0, phi0 ? "" : "phi does not vanish at x = 0"});
        out.push_back({"psi(0) = 0", psi0, psi0 ? "" : "psi does not vanish at x = 0"});
    } catch (const Error& e) {
        out.push_back({"nonlinearity evaluation", false, e.what()});
    }
    return rep;
}

void require_valid(const DescriptorPlant& plant) {
    const auto rep = validate(plant);
    if (!rep.ok()) throw Error(ErrorKind::ModelValidation, "plant failed validation:\n" + rep.summary());
}

double combined_gamma(double gamma1, double gamma2) {
    if (!(gamma1 >= 0.0) || !(gamma2 >= 0.0))
        throw Error(ErrorKind::InvalidInput, "Lipschitz constants must be nonnegative");
    return std::hypot(gamma1, gamma2);
}

FilterStructure FilterStructure::dynamic(int n, int p, int q) {
    return {FilterPreset::Dynamic, Mat::Identity(n, n), Mat::Zero(n, p), Mat::Zero(q, p), E3Mode::Fixed};
}

FilterStructure FilterStructure::static_gain(int n, int p, int q) {
    return {FilterPreset::StaticGain, Mat::Identity(n, n), Mat::Zero(n, p), Mat::Zero(q, p), E3Mode::Fixed};
}

FilterStructure FilterStructure::custom(Mat e1, Mat e2, Mat e3, E3Mode mode) {
    if (e1.rows() != e1.cols() || e2.rows() != e1.rows() || e3.cols() != e2.cols())
        throw Error(ErrorKind::DimensionMismatch, "filter structure: e1 n x n, e2 n x p, e3 q x p");
    return {FilterPreset::Custom, std::move(e1), std::move(e2), std::move(e3), mode};
}

std::string to_string(FilterPreset preset) {
    switch (preset) {
    case FilterPreset::Dynamic: return "dynamic";
    case FilterPreset::StaticGain: return "static-gain";
    case FilterPreset::Custom: return "custom";
    }
    return "?";
}

} // namespace descfilter
