#pragma once

#include <string>
#include <vector>

#include "descfilter/expr.hpp"
#include "descfilter/linalg.hpp"

namespace descfilter {

/// Uncertain Lipschitz descriptor plant
///
///   E x' = (A + M1 F(t) N) x + phi(x, u) + B w
///   y    = (C + M2 F(t) N) x + psi(x, u) + D w
///   z    = H x
///
/// with F(t) in R^{k x l}, ||F(t)|| <= 1. Dimensions are read off the
/// matrices: n = rows(E), p = rows(C), q = rows(H), k = cols(M1),
/// l = rows(N), qw = cols(B).
struct DescriptorPlant {
    Mat E, A, B, C, D, M1, M2, N, H;
    VectorExpr phi;
    VectorExpr psi;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    int inputs = 0;

    [[nodiscard]] int n() const { return static_cast<int>(E.rows()); }
    [[nodiscard]] int m() const { return inputs; }
    [[nodiscard]] int p() const { return static_cast<int>(C.rows()); }
    [[nodiscard]] int q() const { return static_cast<int>(H.rows()); }
    [[nodiscard]] int k() const { return static_cast<int>(M1.cols()); }
    [[nodiscard]] int l() const { return static_cast<int>(N.rows()); }
    [[nodiscard]] int qw() const { return static_cast<int>(B.cols()); }
};

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    std::size_t rank_e = 0;

    [[nodiscard]] bool ok() const;
    [[nodiscard]] const ValidationCheck* find(const std::string& name) const;
    [[nodiscard]] std::string summary() const;
};

// Dimension, regularity, observability and nonlinearity checks. Never throws
// on a bad plant; failures are reported.
[[nodiscard]] ValidationReport validate(const DescriptorPlant& plant);

// Throws ModelValidation with the report summary unless validate() passes.
void require_valid(const DescriptorPlant& plant);

// sqrt(gamma1^2 + gamma2^2)
[[nodiscard]] double combined_gamma(double gamma1, double gamma2);

enum class FilterPreset { Dynamic, StaticGain, Custom };
enum class E3Mode { Fixed, Decision };

/// Structural matrices of the filter
///
///   E xF' = AF xF + BF y + e1 phi(xF, u) + e2 psi(xF, u)
///   zF    = CF xF + e3 psi(xF, u)
///
/// For the static-gain preset e2 = -L is only known after synthesis.
struct FilterStructure {
    FilterPreset preset = FilterPreset::Dynamic;
    Mat e1;
    Mat e2;
    Mat e3;
    E3Mode e3_mode = E3Mode::Fixed;

    static FilterStructure dynamic(int n, int p, int q);
    static FilterStructure static_gain(int n, int p, int q);
    static FilterStructure custom(Mat e1, Mat e2, Mat e3, E3Mode mode = E3Mode::Fixed);
};

[[nodiscard]] std::string to_string(FilterPreset preset);

struct FilterRealization {
    Mat AF, BF, CF;
    Mat E1, E2, E3;
    double mu_star = 0.0;
};

} // namespace descfilter
