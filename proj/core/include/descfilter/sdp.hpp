#pragma once

// Standard-form semidefinite programs and a dense primal-dual interior-point
// solver for them.
//
//   minimize    c^T y
//   subject to  F0_j + sum_i y_i F_ij  >= 0   (PSD, one block per j)
//               A y = b

#include <string>
#include <vector>

#include "descfilter/lmi.hpp"

namespace descfilter {

// Lower triangle, column by column, off-diagonals scaled by sqrt(2), so that
// svec(X) . svec(Y) = trace(X Y).
[[nodiscard]] Vec svec(const Mat& symmetric);
[[nodiscard]] Mat smat(const Vec& v);
[[nodiscard]] Eigen::Index svec_size(Eigen::Index n);
[[nodiscard]] Eigen::Index dim_from_svec(Eigen::Index len);

struct PsdBlock {
    std::string name;
    Eigen::Index dim = 0;
    Vec f0;  // svec of the constant part
    Mat f;   // svec_size(dim) x num_vars, column i = svec(F_i)
};

struct ConicProgram {
    Eigen::Index num_vars = 0;
    Vec c;
    std::vector<PsdBlock> blocks;
    Mat a_eq;  // rows x num_vars
    Vec b_eq;
};

/// -X < 0 style constraints become the block -F(y) - shift I >= 0, X > 0
/// becomes F(y) - shift I >= 0; equalities become rows of A y = b with
/// all-zero rows dropped.
[[nodiscard]] ConicProgram lower(const LmiProblem& problem);

/// Objective row, then each block's constant and coefficient entries
/// ("block <name> <dim>", "  <var|const> <svec index> <value>"), then
/// equality rows. Values printed with 17 significant digits.
[[nodiscard]] std::string dump(const ConicProgram& program);

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalTrouble, IterationLimit };

[[nodiscard]] std::string to_string(SolveStatus s);

struct SolverOptions {
    double feasibility_tol = 1e-8;
    double gap_tol = 1e-8;
    double certificate_tol = 1e-8;  // infeasibility / unboundedness ratio
    int max_iterations = 150;
};

struct Solution {
    SolveStatus status = SolveStatus::NumericalTrouble;
    Vec y;
    double objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;  // relative, PSD blocks
    double dual_residual = 0.0;    // relative
    double gap = 0.0;              // relative complementarity gap
    double equality_residual = 0.0;
    std::vector<Mat> dual_blocks;
    std::string message;
};

/// Infeasible-start path following with the HKM direction and Mehrotra
/// predictor-corrector steps. Equalities are eliminated by a nullspace
/// parametrization before iterating, and directions that no block sees are
/// projected out. Deterministic; never throws for finite data.
[[nodiscard]] Solution solve(const ConicProgram& program, const SolverOptions& opts = {});

/// evaluate_at at the solution; throws CertificationUnavailable unless the
/// status is Optimal. The report's min_margin is the feasibility radius.
[[nodiscard]] MarginsReport certify(const LmiProblem& problem, const Solution& solution,
                                    const MarginTolerances& tol = {});

} // namespace descfilter
