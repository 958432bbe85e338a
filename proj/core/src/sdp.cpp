#include "descfilter/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Position of (i, j), i >= j, in the column-wise lower-triangle ordering.
Eigen::Index svec_index(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
    return j * n - j * (j - 1) / 2 + (i - j);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

Eigen::Index svec_size(Eigen::Index n) { return n * (n + 1) / 2; }

Eigen::Index dim_from_svec(Eigen::Index len) {
    const auto n = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (svec_size(n) != len) throw Error(ErrorKind::DimensionMismatch, "length " + std::to_string(len) + " is not triangular");
    return n;
}

Vec svec(const Mat& m) {
    const Eigen::Index n = m.rows();
    Vec v(svec_size(n));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        v(k++) = m(j, j);
        for (Eigen::Index i = j + 1; i < n; ++i) v(k++) = kSqrt2 * m(i, j);
    }
    return v;
}

Mat smat(const Vec& v) {
    const Eigen::Index n = dim_from_svec(v.size());
    Mat m(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        m(j, j) = v(k++);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            m(i, j) = m(j, i) = v(k++) / kSqrt2;
        }
    }
    return m;
}

ConicProgram lower(const LmiProblem& problem) {
    ConicProgram prog;
    prog.num_vars = problem.num_scalars();
    prog.c = problem.objective.size() ? problem.objective : Vec::Zero(prog.num_vars);
    std::vector<Vec> rows;
    std::vector<double> rhs;
    for (const auto& c : problem.constraints) {
        const Eigen::Index n = c.expr.rows();
        if (c.sense == Sense::Zero) {
            // Entry (i, j): sum coeff * y = -constant(i, j).
            std::vector<Vec> entry_rows(static_cast<std::size_t>(n * c.expr.cols()));
            for (const auto& t : c.expr.terms()) {
                auto& r = entry_rows[static_cast<std::size_t>(t.row * c.expr.cols() + t.col)];
                if (r.size() == 0) r = Vec::Zero(prog.num_vars);
                r(t.var) += t.coeff;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < c.expr.cols(); ++j) {
                    const Vec& r = entry_rows[static_cast<std::size_t>(i * c.expr.cols() + j)];
                    const double b = -c.expr.constant_part()(i, j);
                    if (r.size() == 0 || r.cwiseAbs().maxCoeff() == 0.0) {
                        if (b == 0.0) continue;
                        rows.push_back(Vec::Zero(prog.num_vars));
                    } else {
                        rows.push_back(r);
                    }
                    rhs.push_back(b);
                }
            }
            continue;
        }
        const double sign = (c.sense == Sense::NegDef || c.sense == Sense::NegSemidef) ? -1.0 : 1.0;
        PsdBlock block;
        block.name = c.name;
        block.dim = n;
        block.f0 = svec(sign * c.expr.constant_part() - c.shift * Mat::Identity(n, n));
        block.f = Mat::Zero(svec_size(n), prog.num_vars);
        for (const auto& t : c.expr.terms()) {
            if (t.row < t.col) continue;
            const double w = t.row == t.col ? 1.0 : kSqrt2;
            block.f(svec_index(n, t.row, t.col), t.var) += sign * w * t.coeff;
        }
        prog.blocks.push_back(std::move(block));
    }
    prog.a_eq = Mat::Zero(static_cast<Eigen::Index>(rows.size()), prog.num_vars);
    prog.b_eq = Vec::Zero(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        prog.a_eq.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        prog.b_eq(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    return prog;
}

std::string dump(const ConicProgram& prog) {
    std::ostringstream out;
    out << "vars " << prog.num_vars << '\n' << "objective";
    for (Eigen::Index i = 0; i < prog.c.size(); ++i) {
        if (prog.c(i) != 0.0) out << ' ' << i << ':' << fmt(prog.c(i));
    }
    out << '\n';
    for (const auto& b : prog.blocks) {
        out << "block " << b.name << ' ' << b.dim << '\n';
        for (Eigen::Index k = 0; k < b.f0.size(); ++k) {
            if (b.f0(k) != 0.0) out << "  const " << k << ' ' << fmt(b.f0(k)) << '\n';
        }
        for (Eigen::Index v = 0; v < b.f.cols(); ++v) {
            for (Eigen::Index k = 0; k < b.f.rows(); ++k) {
                if (b.f(k, v) != 0.0) out << "  " << v << ' ' << k << ' ' << fmt(b.f(k, v)) << '\n';
            }
        }
    }
    for (Eigen::Index r = 0; r < prog.a_eq.rows(); ++r) {
        out << "eq";
        for (Eigen::Index v = 0; v < prog.a_eq.cols(); ++v) {
            if (prog.a_eq(r, v) != 0.0) out << ' ' << v << ':' << fmt(prog.a_eq(r, v));
        }
        out << " = " << fmt(prog.b_eq(r)) << '\n';
    }
    return out.str();
}

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NumericalTrouble: return "NumericalTrouble";
    case SolveStatus::IterationLimit: return "IterationLimit";
    }
    return "?";
}

namespace {

// Reduced problem in the variables t after y = y0 + T t.
struct Reduced {
    Vec y0;
    Mat T;
    Vec c;
    double c0 = 0.0;
    std::vector<Mat> f0;               // dense constant blocks
    std::vector<std::vector<Mat>> f;   // f[j][k]
    std::vector<std::vector<bool>> nz; // nz[j][k]: F_jk nonzero
};

double inner(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

// Largest step alpha with X + alpha dX >= 0 (infinity if dX >= 0 along X).
double max_step(const Mat& x, const Mat& dx, bool& ok) {
    Eigen::LLT<Mat> llt(x);
    if (llt.info() != Eigen::Success) {
        ok = false;
        return 0.0;
    }
    const Mat linv_dx = llt.matrixL().solve(dx);
    const Mat m = llt.matrixL().solve(linv_dx.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

} // namespace

Solution solve(const ConicProgram& prog, const SolverOptions& opts) {
    Solution sol;
    const Eigen::Index m = prog.num_vars;
    sol.y = Vec::Zero(m);
    const std::size_t nb = prog.blocks.size();

    // Equalities: y = y0 + Nb u.
    Vec y0 = Vec::Zero(m);
    Mat null_basis = Mat::Identity(m, m);
    if (prog.a_eq.rows() > 0) {
        Eigen::JacobiSVD<Mat> svd(prog.a_eq, Eigen::ComputeThinU | Eigen::ComputeFullV);
        const Vec& sv = svd.singularValues();
        const double smax = sv.size() ? sv(0) : 0.0;
        Eigen::Index r = 0;
        while (r < sv.size() && sv(r) > 1e-10 * std::max(smax, 1e-300)) ++r;
        if (r > 0) {
            const Vec utb = svd.matrixU().leftCols(r).transpose() * prog.b_eq;
            y0 = svd.matrixV().leftCols(r) * utb.cwiseQuotient(sv.head(r));
        }
        const double res = (prog.a_eq * y0 - prog.b_eq).norm();
        if (res > 1e-9 * (1.0 + prog.b_eq.norm())) {
            sol.status = SolveStatus::Infeasible;
            sol.y = y0;
            sol.equality_residual = res;
            sol.message = "equality constraints are inconsistent";
            return sol;
        }
        null_basis = svd.matrixV().rightCols(m - r);
    }

    // Stack the blocks in the reduced variables and drop directions no block sees.
    Eigen::Index total = 0;
    for (const auto& b : prog.blocks) total += b.f.rows();
    Mat stacked(total, null_basis.cols());
    Vec stacked0(total);
    {
        Eigen::Index r = 0;
        for (const auto& b : prog.blocks) {
            stacked.middleRows(r, b.f.rows()) = b.f * null_basis;
            stacked0.segment(r, b.f.rows()) = b.f0 + b.f * y0;
            r += b.f.rows();
        }
    }
    const Vec c_red = null_basis.transpose() * prog.c;
    Mat range_dirs = Mat::Identity(null_basis.cols(), null_basis.cols());
    if (null_basis.cols() > 0 && total > 0) {
        Eigen::JacobiSVD<Mat> svd(stacked, Eigen::ComputeFullV);
        const Vec& sv = svd.singularValues();
        const double smax = sv.size() ? sv(0) : 0.0;
        Eigen::Index r = 0;
        while (r < sv.size() && sv(r) > 1e-12 * std::max(smax, 1e-300)) ++r;
        const Mat unseen = svd.matrixV().rightCols(null_basis.cols() - r);
        if (unseen.cols() > 0 && (unseen.transpose() * c_red).norm() > 1e-10 * (1.0 + c_red.norm())) {
            sol.status = SolveStatus::Unbounded;
            sol.y = y0;
            sol.message = "objective decreases along a direction no constraint sees";
            return sol;
        }
        range_dirs = svd.matrixV().leftCols(r);
    } else if (total == 0) {
        range_dirs = Mat(null_basis.cols(), 0);
        if (c_red.size() && c_red.norm() > 1e-10) {
            sol.status = SolveStatus::Unbounded;
            sol.y = y0;
            sol.message = "unconstrained objective";
            return sol;
        }
    }

    Reduced red;
    red.y0 = y0;
    red.T = null_basis * range_dirs;
    Mat f_red = stacked * range_dirs;
    // Unit column norms.
    for (Eigen::Index k = 0; k < f_red.cols(); ++k) {
        const double nk = f_red.col(k).norm();
        if (nk > 0.0) {
            f_red.col(k) /= nk;
            red.T.col(k) /= nk;
        }
    }
    red.c = red.T.transpose() * prog.c;
    red.c0 = prog.c.dot(y0);
    const Eigen::Index nv = red.T.cols();
    {
        Eigen::Index r = 0;
        red.f0.resize(nb);
        red.f.resize(nb);
        red.nz.resize(nb);
        for (std::size_t j = 0; j < nb; ++j) {
            const Eigen::Index len = prog.blocks[j].f.rows();
            red.f0[j] = smat(stacked0.segment(r, len));
            red.f[j].resize(static_cast<std::size_t>(nv));
            red.nz[j].resize(static_cast<std::size_t>(nv));
            for (Eigen::Index k = 0; k < nv; ++k) {
                const Vec col = f_red.col(k).segment(r, len);
                red.nz[j][static_cast<std::size_t>(k)] = col.cwiseAbs().maxCoeff() > 0.0;
                red.f[j][static_cast<std::size_t>(k)] = smat(col);
            }
            r += len;
        }
    }

    auto finish = [&](const Vec& t) {
        sol.y = red.y0 + red.T * t;
        if (prog.a_eq.rows() > 0) sol.equality_residual = (prog.a_eq * sol.y - prog.b_eq).norm();
        sol.objective = prog.c.dot(sol.y);
    };

    double n_total = 0.0;
    for (const auto& b : prog.blocks) n_total += static_cast<double>(b.dim);

    if (nv == 0 || n_total == 0.0) {
        // Nothing to optimize: the constant blocks decide.
        Vec t = Vec::Zero(nv);
        finish(t);
        bool feasible = true;
        for (std::size_t j = 0; j < nb; ++j) {
            if (red.f0[j].rows() && min_eigenvalue(red.f0[j]) < -opts.feasibility_tol * (1.0 + red.f0[j].norm())) {
                feasible = false;
            }
        }
        sol.status = feasible ? SolveStatus::Optimal : SolveStatus::Infeasible;
        sol.dual_objective = sol.objective;
        for (const auto& b : prog.blocks) sol.dual_blocks.push_back(Mat::Zero(b.dim, b.dim));
        return sol;
    }

    // Starting point (scaled identities).
    Vec t = Vec::Zero(nv);
    std::vector<Mat> S(nb), Z(nb);
    for (std::size_t j = 0; j < nb; ++j) {
        const auto d = static_cast<double>(prog.blocks[j].dim);
        double max_fk = 0.0, ratio = 0.0;
        for (Eigen::Index k = 0; k < nv; ++k) {
            const double nk = red.f[j][static_cast<std::size_t>(k)].norm();
            max_fk = std::max(max_fk, nk);
            ratio = std::max(ratio, (1.0 + std::abs(red.c(k))) / (1.0 + nk));
        }
        const double xi = std::max({10.0, std::sqrt(d), d * ratio});
        const double eta = std::max({10.0, std::sqrt(d), max_fk, red.f0[j].norm()});
        S[j] = eta * Mat::Identity(prog.blocks[j].dim, prog.blocks[j].dim);
        Z[j] = xi * Mat::Identity(prog.blocks[j].dim, prog.blocks[j].dim);
    }

    double norm_f0 = 0.0;
    for (const auto& f : red.f0) norm_f0 += f.squaredNorm();
    norm_f0 = std::sqrt(norm_f0);
    const double norm_c = red.c.norm();

    auto apply_a = [&](const Vec& v, std::size_t j) {
        Mat out = Mat::Zero(prog.blocks[j].dim, prog.blocks[j].dim);
        for (Eigen::Index k = 0; k < nv; ++k) {
            if (red.nz[j][static_cast<std::size_t>(k)] && v(k) != 0.0) out += v(k) * red.f[j][static_cast<std::size_t>(k)];
        }
        return out;
    };
    auto apply_at = [&](const std::vector<Mat>& w) {
        Vec out = Vec::Zero(nv);
        for (std::size_t j = 0; j < nb; ++j) {
            for (Eigen::Index k = 0; k < nv; ++k) {
                if (red.nz[j][static_cast<std::size_t>(k)]) out(k) += inner(red.f[j][static_cast<std::size_t>(k)], w[j]);
            }
        }
        return out;
    };

    sol.status = SolveStatus::IterationLimit;
    for (int iter = 0; iter <= opts.max_iterations; ++iter) {
        sol.iterations = iter;
        std::vector<Mat> rp(nb);
        double rp_norm = 0.0, gap = 0.0, f0z = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            rp[j] = red.f0[j] + apply_a(t, j) - S[j];
            rp_norm += rp[j].squaredNorm();
            gap += inner(S[j], Z[j]);
            f0z += inner(red.f0[j], Z[j]);
        }
        rp_norm = std::sqrt(rp_norm);
        const Vec atz = apply_at(Z);
        const Vec rd = red.c - atz;
        const double mu = gap / n_total;
        const double pobj = red.c.dot(t) + red.c0;
        const double dobj = -f0z + red.c0;
        sol.primal_residual = rp_norm / (1.0 + norm_f0);
        sol.dual_residual = rd.norm() / (1.0 + norm_c);
        sol.gap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
        sol.dual_objective = dobj;
        sol.dual_blocks = Z;
        finish(t);

        if (sol.primal_residual <= opts.feasibility_tol && sol.dual_residual <= opts.feasibility_tol &&
            sol.gap <= opts.gap_tol) {
            sol.status = SolveStatus::Optimal;
            return sol;
        }
        if (f0z < 0.0 && atz.norm() <= opts.certificate_tol * -f0z) {
            sol.status = SolveStatus::Infeasible;
            sol.message = "dual certificate of infeasibility";
            return sol;
        }
        if (sol.primal_residual <= opts.feasibility_tol && red.c.dot(t) < 0.0) {
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < nb; ++j) {
                const Mat at = apply_a(t, j);
                if (at.rows()) worst = std::min(worst, min_eigenvalue(at));
            }
            if (worst >= -opts.certificate_tol * -red.c.dot(t) && t.norm() > 1e6) {
                sol.status = SolveStatus::Unbounded;
                sol.message = "primal recession direction with decreasing objective";
                return sol;
            }
        }
        if (iter == opts.max_iterations) break;

        // Schur complement M(i, k) = <F_i, S^-1 F_k Z>.
        std::vector<Mat> sinv(nb);
        Mat schur = Mat::Zero(nv, nv);
        bool ok = true;
        for (std::size_t j = 0; j < nb && ok; ++j) {
            Eigen::LLT<Mat> llt(S[j]);
            if (llt.info() != Eigen::Success) {
                ok = false;
                break;
            }
            sinv[j] = llt.solve(Mat::Identity(S[j].rows(), S[j].cols()));
            for (Eigen::Index k = 0; k < nv; ++k) {
                if (!red.nz[j][static_cast<std::size_t>(k)]) continue;
                const Mat w = sinv[j] * red.f[j][static_cast<std::size_t>(k)] * Z[j];
                for (Eigen::Index i = 0; i < nv; ++i) {
                    if (red.nz[j][static_cast<std::size_t>(i)]) schur(i, k) += inner(red.f[j][static_cast<std::size_t>(i)], w);
                }
            }
        }
        if (!ok) {
            sol.status = SolveStatus::NumericalTrouble;
            sol.message = "primal slack lost definiteness";
            return sol;
        }
        schur = sym(schur);
        Eigen::LLT<Mat> schur_llt(schur);
        Eigen::LDLT<Mat> schur_ldlt;
        const bool use_llt = schur_llt.info() == Eigen::Success;
        if (!use_llt) {
            const double reg = 1e-13 * std::max(1.0, schur.diagonal().maxCoeff());
            schur_ldlt.compute(schur + reg * Mat::Identity(nv, nv));
        }
        auto solve_schur = [&](const Vec& rhs) -> Vec {
            Vec x = use_llt ? Vec(schur_llt.solve(rhs)) : Vec(schur_ldlt.solve(rhs));
            for (int k = 0; k < 2; ++k) {
                const Vec r = rhs - schur * x;
                x += use_llt ? Vec(schur_llt.solve(r)) : Vec(schur_ldlt.solve(r));
            }
            return x;
        };

        // Direction for complementarity target rc = sigma mu S^-1 - Z - corr.
        auto direction = [&](const std::vector<Mat>& rc, Vec& ds, std::vector<Mat>& dS, std::vector<Mat>& dZ) {
            std::vector<Mat> tmp(nb);
            for (std::size_t j = 0; j < nb; ++j) tmp[j] = rc[j] - sinv[j] * rp[j] * Z[j];
            const Vec rhs = apply_at(tmp) - rd;
            ds = solve_schur(rhs);
            dS.resize(nb);
            dZ.resize(nb);
            for (std::size_t j = 0; j < nb; ++j) {
                dS[j] = rp[j] + apply_a(ds, j);
                dZ[j] = rc[j] - sym(Mat(sinv[j] * dS[j] * Z[j]));
            }
        };
        auto steps = [&](const std::vector<Mat>& dS, const std::vector<Mat>& dZ, double& ap, double& ad) {
            ap = ad = std::numeric_limits<double>::infinity();
            bool fine = true;
            for (std::size_t j = 0; j < nb; ++j) {
                ap = std::min(ap, max_step(S[j], dS[j], fine));
                ad = std::min(ad, max_step(Z[j], dZ[j], fine));
            }
            return fine;
        };

        std::vector<Mat> rc(nb);
        for (std::size_t j = 0; j < nb; ++j) rc[j] = -Z[j];
        Vec ds_aff;
        std::vector<Mat> dS_aff, dZ_aff;
        direction(rc, ds_aff, dS_aff, dZ_aff);
        double ap_aff = 0.0, ad_aff = 0.0;
        if (!steps(dS_aff, dZ_aff, ap_aff, ad_aff)) {
            sol.status = SolveStatus::NumericalTrouble;
            sol.message = "iterate lost definiteness";
            return sol;
        }
        ap_aff = std::min(1.0, ap_aff);
        ad_aff = std::min(1.0, ad_aff);
        double mu_aff = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            mu_aff += inner(S[j] + ap_aff * dS_aff[j], Z[j] + ad_aff * dZ_aff[j]);
        }
        mu_aff /= n_total;
        const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap_aff, ad_aff), 2));
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);

        for (std::size_t j = 0; j < nb; ++j) {
            rc[j] = sigma * mu * sinv[j] - Z[j] - sym(Mat(sinv[j] * dS_aff[j] * dZ_aff[j]));
        }
        Vec ds;
        std::vector<Mat> dS, dZ;
        direction(rc, ds, dS, dZ);
        double ap = 0.0, ad = 0.0;
        if (!steps(dS, dZ, ap, ad)) {
            sol.status = SolveStatus::NumericalTrouble;
            sol.message = "iterate lost definiteness";
            return sol;
        }
        const double tau = 0.9 + 0.09 * std::min(ap_aff, ad_aff);
        ap = std::min(1.0, tau * ap);
        ad = std::min(1.0, tau * ad);
        if (ap < 1e-12 && ad < 1e-12) {
            sol.status = SolveStatus::NumericalTrouble;
            sol.message = "step length collapsed";
            return sol;
        }
        // Backtrack when rounding leaves the new iterate outside the cone.
        std::vector<Mat> S_next(nb), Z_next(nb);
        bool inside = false;
        for (int back = 0; back < 40 && !inside; ++back) {
            inside = true;
            for (std::size_t j = 0; j < nb && inside; ++j) {
                S_next[j] = sym(Mat(S[j] + ap * dS[j]));
                Z_next[j] = sym(Mat(Z[j] + ad * dZ[j]));
                inside = Eigen::LLT<Mat>(S_next[j]).info() == Eigen::Success &&
                         Eigen::LLT<Mat>(Z_next[j]).info() == Eigen::Success;
            }
            if (!inside) {
                ap *= 0.8;
                ad *= 0.8;
            }
        }
        if (!inside) {
            sol.status = SolveStatus::NumericalTrouble;
            sol.message = "iterate lost definiteness";
            return sol;
        }
        t += ap * ds;
        S = std::move(S_next);
        Z = std::move(Z_next);
    }
    sol.message = "iteration limit reached";
    return sol;
}

MarginsReport certify(const LmiProblem& problem, const Solution& solution, const MarginTolerances& tol) {
    if (solution.status != SolveStatus::Optimal) {
        throw Error(ErrorKind::CertificationUnavailable, "cannot certify a " + to_string(solution.status) + " solution");
    }
    return evaluate_at(problem, solution.y, tol);
}

} // namespace descfilter
