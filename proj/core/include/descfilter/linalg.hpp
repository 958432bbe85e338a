#pragma once

// Dense linear algebra helpers for descriptor pencils (E, A).

#include <complex>
#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace descfilter {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Relative rank threshold: singular values below tol * sigma_max count as zero.
inline constexpr double kRankTol = 1e-10;

// Throws InvalidInput when any entry is NaN or infinite.
void require_finite(const Mat& m, std::string_view what);

[[nodiscard]] std::size_t rank_of(const Mat& m, double tol = kRankTol);

/// Orthonormal basis of the left null space of E, one basis vector per row.
///
/// Rows come from the trailing left singular vectors of E (so the result is
/// deterministic for a given E); each row is signed so that its entry of
/// largest magnitude is positive. Shape is (n - rank E) x n; a full-rank E
/// yields a 0 x n matrix.
[[nodiscard]] Mat orthogonal_complement(const Mat& e, double tol = kRankTol);

// Orthonormal basis of the right null space, one basis vector per column.
[[nodiscard]] Mat null_space(const Mat& m, double tol = kRankTol);

// Orthonormal basis of the column space, one basis vector per column.
[[nodiscard]] Mat range_basis(const Mat& m, double tol = kRankTol);

// E = S * diag(I_s, 0) * T with S, T invertible.
struct SemiExplicitWitness {
    Mat S;
    Mat T;
    std::size_t rank = 0;
};

[[nodiscard]] SemiExplicitWitness semi_explicit_decompose(const Mat& e, double tol = kRankTol);

// ||S diag(I_s,0) T - E||_F / max(||E||_F, 1e-300)
[[nodiscard]] double reconstruction_error(const SemiExplicitWitness& w, const Mat& e);

/// Coefficients of det(sE - A) in ascending powers of s, by cofactor
/// expansion over linear polynomial entries. Intended for n <= 4.
[[nodiscard]] std::vector<double> pencil_determinant_coefficients(const Mat& e, const Mat& a);

/// True iff det(sE - A) is not the zero polynomial. For n <= 4 the
/// polynomial is expanded exactly; otherwise it is sampled at n + 1 distinct
/// points drawn from a fixed seed on [-10, 10].
[[nodiscard]] bool pencil_regular(const Mat& e, const Mat& a);

// Finite generalized eigenvalues of (E, A), i.e. the roots of det(sE - A).
[[nodiscard]] std::vector<std::complex<double>> finite_generalized_eigenvalues(const Mat& e, const Mat& a);

/// rank [sE - A; C] = n at every finite generalized eigenvalue and at a
/// fixed set of pseudo-random sample points. Throws PreconditionViolation
/// when the pencil is not regular.
[[nodiscard]] bool observable(const Mat& e, const Mat& a, const Mat& c, double tol = kRankTol);

[[nodiscard]] bool is_symmetric_psd(const Mat& m, double tol);

[[nodiscard]] double spectral_norm(const Mat& m);
[[nodiscard]] double min_eigenvalue(const Mat& symmetric);
[[nodiscard]] double max_eigenvalue(const Mat& symmetric);

[[nodiscard]] inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

// p x n matrix with ones on the main diagonal.
[[nodiscard]] Mat rect_identity(Eigen::Index rows, Eigen::Index cols);

} // namespace descfilter
