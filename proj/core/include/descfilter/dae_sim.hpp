#pragma once

// Fixed-step implicit Euler simulation of plant and filter, consistent
// initialization and the norms used by the energy-to-peak check.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "descfilter/error.hpp"
#include "descfilter/expr.hpp"
#include "descfilter/model.hpp"

namespace descfilter {

/// How consistent_init may move the guess.
enum class InitMode {
    MinimumNorm,       // any direction, minimum-norm Newton correction
    HoldDifferential,  // only along null(E): E x stays at E * guess
    FreeCoordinates,   // only the listed coordinates change
};

struct InitOptions {
    InitMode mode = InitMode::MinimumNorm;
    std::vector<int> free;  // 0-based, FreeCoordinates only
    double tol = 1e-10;     // on ||Eperp f(x)||_inf
    int max_iterations = 50;
    Mat uncertainty;  // F(0) for the plant, k x l; empty means 0
};

// E x' = f(x) at a frozen time; only the algebraic part Eperp f matters here.
struct AlgebraicProblem {
    Mat E;
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> jacobian;
};

struct InitResult {
    Vec x;
    double residual = 0.0;
    int iterations = 0;
};

// Damped Newton. Throws NoConsistentPoint with the final residual.
[[nodiscard]] InitResult find_consistent(const AlgebraicProblem& problem, const Vec& guess, const InitOptions& opts = {});

/// Plant: Eperp (A x + phi(x, u0) + B w0) = 0.
[[nodiscard]] Vec consistent_init(const DescriptorPlant& plant, const Vec& guess, const Vec& w0, const Vec& u0,
                                  const InitOptions& opts = {});

/// Filter: Eperp (AF xF + BF y0 + E1 phi(xF, u0) + E2 psi(xF, u0)) = 0.
[[nodiscard]] Vec consistent_filter_init(const DescriptorPlant& plant, const FilterRealization& filter,
                                         const Vec& guess, const Vec& y0, const Vec& u0, const InitOptions& opts = {});

// Algebraic residual ||Eperp (A x + phi + B w)||_inf of the plant.
[[nodiscard]] double algebraic_residual(const DescriptorPlant& plant, const Vec& x, const Vec& w, const Vec& u,
                                        double t = 0.0);

struct SimConfig {
    double t_end = 30.0;
    double dt = 1e-3;
    double newton_tol = 1e-10;
    int newton_max_iterations = 50;
    VectorExpr w;  // qw components in t
    VectorExpr u;  // m components in t (may be empty when m = 0)
    // k * l components in t, row-major; unset means F = 0.
    std::optional<VectorExpr> F;
};

/// Row i of every matrix is the sample at time(i).
struct SimTrace {
    Vec time;
    Mat x, xf, z, zf, e, w;
    Vec newton_residual;     // final Newton residual of the plant step
    Vec filter_residual;     // same for the filter step
    Vec algebraic_residual;  // plant ||Eperp rhs||_inf at each sample

    [[nodiscard]] Eigen::Index samples() const { return time.size(); }
};

class SimulationAborted : public Error {
public:
    SimulationAborted(const std::string& message, SimTrace partial);
    [[nodiscard]] const SimTrace& partial() const noexcept { return partial_; }

private:
    SimTrace partial_;
};

/// Implicit Euler for the plant, then the filter driven by y(t+). Throws
/// SimulationAborted (with the samples so far) if a Newton solve fails, and
/// InvalidInput if ||F(t)|| > 1 on the grid.
[[nodiscard]] SimTrace simulate(const DescriptorPlant& plant, const FilterRealization& filter, const SimConfig& config,
                                const Vec& x0, const Vec& xf0);

// y = (C + M2 F N) x + psi(x, u) + D w
[[nodiscard]] Vec measurement(const DescriptorPlant& plant, const Vec& x, const Vec& w, const Vec& u, double t,
                              const Mat& f);

// F(t) as a k x l matrix (zero when unset).
[[nodiscard]] Mat uncertainty_at(const DescriptorPlant& plant, const SimConfig& config, double t);

struct TraceNorms {
    double e_inf = 0.0;
    double w_l2 = 0.0;
    double ratio = 0.0;  // inf if w == 0 and e != 0, 0 if both vanish
};

[[nodiscard]] TraceNorms norms(const SimTrace& trace);

/// Trapezoidal sqrt(integral ||w||^2 dt) of samples taken on `time`.
[[nodiscard]] double l2_norm(const Vec& time, const Mat& samples);

// t,x1..,xF1..,z1..,zF1..,e1..,w1.. with 17 significant digits.
void write_csv(const SimTrace& trace, std::ostream& out);

} // namespace descfilter
