#include "descfilter/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

using CMat = Eigen::MatrixXcd;

constexpr std::uint64_t kSampleSeed = 0x5eed'2024'0607ULL;

std::size_t rank_from_singular_values(const Vec& sv, double tol) {
    if (sv.size() == 0) return 0;
    const double top = sv(0);
    if (top <= 0.0) return 0;
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol * top) ++r;
    }
    return r;
}

void normalize_sign(Eigen::Ref<Vec> v) {
    Eigen::Index idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v(idx) < 0.0) v = -v;
}

using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

void poly_axpy(Poly& acc, double sign, const Poly& p) {
    if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += sign * p[i];
}

// Laplace expansion along the first row of a matrix of linear polynomials.
Poly poly_det(const std::vector<std::vector<Poly>>& m) {
    const std::size_t n = m.size();
    if (n == 0) return {1.0};
    if (n == 1) return m[0][0];
    Poly acc{0.0};
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::vector<Poly>> minor;
        minor.reserve(n - 1);
        for (std::size_t r = 1; r < n; ++r) {
            std::vector<Poly> row;
            row.reserve(n - 1);
            for (std::size_t c = 0; c < n; ++c)
                if (c != j) row.push_back(m[r][c]);
            minor.push_back(std::move(row));
        }
        poly_axpy(acc, (j % 2 == 0) ? 1.0 : -1.0, poly_mul(m[0][j], poly_det(minor)));
    }
    return acc;
}

// Product of row norms of [E A]; bounds |coefficients| of det(sE - A).
double hadamard_scale(const Mat& e, const Mat& a) {
    double scale = 1.0;
    for (Eigen::Index i = 0; i < e.rows(); ++i) scale *= e.row(i).norm() + a.row(i).norm();
    return scale;
}

void require_square_pair(const Mat& e, const Mat& a) {
    if (e.rows() != e.cols() || a.rows() != a.cols() || e.rows() != a.rows())
        throw Error(ErrorKind::DimensionMismatch, "pencil (E, A) must be square and of equal size");
}

std::vector<double> sample_points(std::size_t count) {
    std::mt19937_64 rng(kSampleSeed);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<double> pts;
    while (pts.size() < count) {
        const double s = dist(rng);
        const bool clash = std::any_of(pts.begin(), pts.end(), [s](double p) { return std::abs(p - s) < 1e-6; });
        if (!clash) pts.push_back(s);
    }
    return pts;
}

std::size_t complex_rank(const CMat& m, double tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<CMat> svd(m);
    return rank_from_singular_values(svd.singularValues(), tol);
}

} // namespace

void require_finite(const Mat& m, std::string_view what) {
    if (!m.allFinite()) throw Error(ErrorKind::InvalidInput, std::string(what) + " has non-finite entries");
}

std::size_t rank_of(const Mat& m, double tol) {
    require_finite(m, "matrix");
    if (!(tol > 0.0)) throw Error(ErrorKind::InvalidInput, "rank tolerance must be positive");
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Mat> svd(m);
    return rank_from_singular_values(svd.singularValues(), tol);
}

Mat orthogonal_complement(const Mat& e, double tol) {
    require_finite(e, "E");
    const Eigen::Index n = e.rows();
    if (n == 0) return Mat(0, e.cols());
    Eigen::JacobiSVD<Mat> svd(e, Eigen::ComputeFullU);
    const auto s = static_cast<Eigen::Index>(rank_from_singular_values(svd.singularValues(), tol));
    Mat out(n - s, n);
    for (Eigen::Index r = 0; r < n - s; ++r) {
        Vec v = svd.matrixU().col(s + r);
        normalize_sign(v);
        out.row(r) = v.transpose();
    }
    return out;
}

Mat null_space(const Mat& m, double tol) {
    require_finite(m, "matrix");
    const Eigen::Index n = m.cols();
    if (m.rows() == 0) return Mat::Identity(n, n);
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    const auto s = static_cast<Eigen::Index>(rank_from_singular_values(svd.singularValues(), tol));
    Mat out(n, n - s);
    for (Eigen::Index c = 0; c < n - s; ++c) {
        Vec v = svd.matrixV().col(s + c);
        normalize_sign(v);
        out.col(c) = v;
    }
    return out;
}

Mat range_basis(const Mat& m, double tol) {
    require_finite(m, "matrix");
    if (m.cols() == 0 || m.rows() == 0) return Mat(m.rows(), 0);
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU);
    const auto s = static_cast<Eigen::Index>(rank_from_singular_values(svd.singularValues(), tol));
    return svd.matrixU().leftCols(s);
}

SemiExplicitWitness semi_explicit_decompose(const Mat& e, double tol) {
    require_finite(e, "E");
    if (e.rows() != e.cols()) throw Error(ErrorKind::DimensionMismatch, "E must be square");
    const Eigen::Index n = e.rows();
    Eigen::JacobiSVD<Mat> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto s = rank_from_singular_values(svd.singularValues(), tol);
    Vec scale = Vec::Ones(n);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s); ++i) scale(i) = svd.singularValues()(i);
    return {svd.matrixU() * scale.asDiagonal(), svd.matrixV().transpose(), s};
}

double reconstruction_error(const SemiExplicitWitness& w, const Mat& e) {
    const Eigen::Index n = e.rows();
    Mat d = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(w.rank); ++i) d(i, i) = 1.0;
    return (w.S * d * w.T - e).norm() / std::max(e.norm(), 1e-300);
}

std::vector<double> pencil_determinant_coefficients(const Mat& e, const Mat& a) {
    require_square_pair(e, a);
    const auto n = static_cast<std::size_t>(e.rows());
    std::vector<std::vector<Poly>> m(n, std::vector<Poly>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            m[i][j] = {-a(ii, jj), e(ii, jj)};
        }
    Poly p = poly_det(m);
    p.resize(n + 1, 0.0);
    return p;
}

bool pencil_regular(const Mat& e, const Mat& a) {
    require_square_pair(e, a);
    require_finite(e, "E");
    require_finite(a, "A");
    const Eigen::Index n = e.rows();
    if (n == 0) return true;
    const double scale = hadamard_scale(e, a);
    if (scale == 0.0) return false;
    constexpr double rel = 1e-12;

    if (n <= 4) {
        const auto coeffs = pencil_determinant_coefficients(e, a);
        return std::any_of(coeffs.begin(), coeffs.end(), [&](double c) { return std::abs(c) > rel * scale; });
    }
    for (double s : sample_points(static_cast<std::size_t>(n) + 1)) {
        const Mat m = s * e - a;
        const double bound = hadamard_scale(s * e, a);
        if (std::abs(m.partialPivLu().determinant()) > rel * bound) return true;
    }
    return false;
}

std::vector<std::complex<double>> finite_generalized_eigenvalues(const Mat& e, const Mat& a) {
    require_square_pair(e, a);
    std::vector<std::complex<double>> out;
    if (e.rows() == 0) return out;
    // det(sE - A) = 0  <=>  A v = s E v
    Eigen::GeneralizedEigenSolver<Mat> ges(a, e, false);
    const auto& alphas = ges.alphas();
    const auto& betas = ges.betas();
    const double scale = std::max({a.norm(), e.norm(), 1e-300});
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const double beta = betas(i);
        if (std::abs(beta) > 1e-12 * scale && std::abs(alphas(i)) < 1e12 * std::abs(beta)) {
            out.push_back(alphas(i) / beta);
        }
    }
    return out;
}

bool observable(const Mat& e, const Mat& a, const Mat& c, double tol) {
    require_square_pair(e, a);
    if (c.cols() != e.cols()) throw Error(ErrorKind::DimensionMismatch, "C must have n columns");
    if (!pencil_regular(e, a)) throw Error(ErrorKind::PreconditionViolation, "pencil (E, A) is not regular");
    const Eigen::Index n = e.rows();
    const auto stacked_rank = [&](std::complex<double> s) {
        CMat m(n + c.rows(), n);
        m.topRows(n) = s * e.cast<std::complex<double>>() - a.cast<std::complex<double>>();
        m.bottomRows(c.rows()) = c.cast<std::complex<double>>();
        return complex_rank(m, tol);
    };
    for (const auto& s : finite_generalized_eigenvalues(e, a)) {
        if (stacked_rank(s) < static_cast<std::size_t>(n)) return false;
    }
    std::mt19937_64 rng(kSampleSeed ^ 0xabcdefULL);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    for (int k = 0; k < 3; ++k) {
        const std::complex<double> s(dist(rng), dist(rng));
        if (stacked_rank(s) < static_cast<std::size_t>(n)) return false;
    }
    return true;
}

bool is_symmetric_psd(const Mat& m, double tol) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix must be square");
    require_finite(m, "matrix");
    if (m.size() == 0) return true;
    if ((m - m.transpose()).norm() > tol * m.norm()) return false;
    return min_eigenvalue(sym(m)) >= -tol;
}

double spectral_norm(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

double min_eigenvalue(const Mat& symmetric) {
    if (symmetric.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue(const Mat& symmetric) {
    if (symmetric.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

Mat rect_identity(Eigen::Index rows, Eigen::Index cols) {
    return Mat::Identity(rows, cols);
}

} // namespace descfilter
