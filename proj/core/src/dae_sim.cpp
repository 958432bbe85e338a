#include "descfilter/dae_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace descfilter {

namespace {

Vec zeros_if_empty(const Vec& v, int n) { return v.size() == 0 ? Vec::Zero(n) : v; }

Vec eval_signal(const VectorExpr& expr, int size, double t) {
    if (expr.size() == 0) return Vec::Zero(size);
    return expr.eval(Vec(), Vec(), t);
}

} // namespace

InitResult find_consistent(const AlgebraicProblem& problem, const Vec& guess, const InitOptions& opts) {
    const Eigen::Index n = problem.E.rows();
    if (guess.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "guess has length " + std::to_string(guess.size()) + ", expected " +
                                                      std::to_string(n));
    }
    const Mat eperp = orthogonal_complement(problem.E);
    InitResult res;
    res.x = guess;
    if (eperp.rows() == 0) return res;

    Mat dirs;
    switch (opts.mode) {
    case InitMode::MinimumNorm:
        dirs = Mat::Identity(n, n);
        break;
    case InitMode::HoldDifferential:
        dirs = null_space(problem.E);
        break;
    case InitMode::FreeCoordinates:
        dirs = Mat::Zero(n, static_cast<Eigen::Index>(opts.free.size()));
        for (std::size_t i = 0; i < opts.free.size(); ++i) {
            const int c = opts.free[i];
            if (c < 0 || c >= n) throw Error(ErrorKind::InvalidInput, "free coordinate " + std::to_string(c) + " out of range");
            dirs(c, static_cast<Eigen::Index>(i)) = 1.0;
        }
        break;
    }

    auto residual = [&](const Vec& x) -> Vec { return eperp * problem.f(x); };
    Vec r = residual(res.x);
    res.residual = r.cwiseAbs().maxCoeff();
    for (res.iterations = 0; res.iterations < opts.max_iterations && res.residual > opts.tol; ++res.iterations) {
        const Mat j = eperp * problem.jacobian(res.x) * dirs;
        const Vec step = dirs * Eigen::CompleteOrthogonalDecomposition<Mat>(j).solve(Vec(-r));
        double alpha = 1.0;
        const double before = r.norm();
        Vec trial, rt;
        while (true) {
            trial = res.x + alpha * step;
            rt = residual(trial);
            if (rt.allFinite() && rt.norm() < (1.0 - 1e-4 * alpha) * before) break;
            alpha *= 0.5;
            if (alpha < 1e-10) {
                throw Error(ErrorKind::NoConsistentPoint,
                            "Newton line search failed; final algebraic residual " + std::to_string(res.residual));
            }
        }
        res.x = trial;
        r = rt;
        res.residual = r.cwiseAbs().maxCoeff();
    }
    if (!(res.residual <= opts.tol)) {
        char buf[120];
        std::snprintf(buf, sizeof buf, "no consistent point after %d Newton steps; final algebraic residual %.3e",
                      res.iterations, res.residual);
        throw Error(ErrorKind::NoConsistentPoint, buf);
    }
    return res;
}

Vec consistent_init(const DescriptorPlant& plant, const Vec& guess, const Vec& w0, const Vec& u0, const InitOptions& opts) {
    const Vec w = zeros_if_empty(w0, plant.qw());
    const Vec u = zeros_if_empty(u0, plant.m());
    Mat a = plant.A;
    if (opts.uncertainty.size() > 0) {
        if (opts.uncertainty.rows() != plant.k() || opts.uncertainty.cols() != plant.l()) {
            throw Error(ErrorKind::DimensionMismatch, "F(0) must be k x l");
        }
        a += plant.M1 * opts.uncertainty * plant.N;
    }
    AlgebraicProblem p;
    p.E = plant.E;
    p.f = [&](const Vec& x) -> Vec { return a * x + plant.phi.eval(x, u, 0.0) + plant.B * w; };
    p.jacobian = [&](const Vec& x) -> Mat { return a + plant.phi.jacobian_x(x, u, 0.0); };
    return find_consistent(p, guess, opts).x;
}

Vec consistent_filter_init(const DescriptorPlant& plant, const FilterRealization& filter, const Vec& guess,
                           const Vec& y0, const Vec& u0, const InitOptions& opts) {
    const Vec u = zeros_if_empty(u0, plant.m());
    AlgebraicProblem p;
    p.E = plant.E;
    p.f = [&](const Vec& xf) -> Vec {
        return filter.AF * xf + filter.BF * y0 + filter.E1 * plant.phi.eval(xf, u, 0.0) +
               filter.E2 * plant.psi.eval(xf, u, 0.0);
    };
    p.jacobian = [&](const Vec& xf) -> Mat {
        return filter.AF + filter.E1 * plant.phi.jacobian_x(xf, u, 0.0) + filter.E2 * plant.psi.jacobian_x(xf, u, 0.0);
    };
    return find_consistent(p, guess, opts).x;
}

double algebraic_residual(const DescriptorPlant& plant, const Vec& x, const Vec& w, const Vec& u, double t) {
    const Mat eperp = orthogonal_complement(plant.E);
    if (eperp.rows() == 0) return 0.0;
    const Vec rhs = plant.A * x + plant.phi.eval(x, zeros_if_empty(u, plant.m()), t) +
                    plant.B * zeros_if_empty(w, plant.qw());
    return (eperp * rhs).cwiseAbs().maxCoeff();
}

SimulationAborted::SimulationAborted(const std::string& message, SimTrace partial)
    : Error(ErrorKind::SimulationAborted, message), partial_(std::move(partial)) {}

Mat uncertainty_at(const DescriptorPlant& plant, const SimConfig& config, double t) {
    const int k = plant.k(), l = plant.l();
    if (!config.F) return Mat::Zero(k, l);
    if (config.F->size() != k * l) {
        throw Error(ErrorKind::DimensionMismatch, "F has " + std::to_string(config.F->size()) + " components, expected " +
                                                      std::to_string(k * l));
    }
    const Vec v = config.F->eval(Vec(), Vec(), t);
    Mat f(k, l);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < l; ++j) f(i, j) = v(i * l + j);
    }
    return f;
}

Vec measurement(const DescriptorPlant& plant, const Vec& x, const Vec& w, const Vec& u, double t, const Mat& f) {
    return (plant.C + plant.M2 * f * plant.N) * x + plant.psi.eval(x, u, t) + plant.D * w;
}

namespace {

struct StepResult {
    Vec x;
    double residual = 0.0;
    bool ok = false;
};

// Solves E (x+ - x) / dt = g(x+) by Newton from x.
template <typename G, typename J>
StepResult implicit_step(const Mat& e, const Vec& x, double dt, double tol, int max_iter, G&& g, J&& jac) {
    StepResult s;
    s.x = x;
    const Mat e_dt = e / dt;
    for (int it = 0; it <= max_iter; ++it) {
        const Vec r = e_dt * (s.x - x) - g(s.x);
        s.residual = r.cwiseAbs().maxCoeff();
        if (!std::isfinite(s.residual)) return s;
        if (s.residual <= tol * (1.0 + s.x.cwiseAbs().maxCoeff())) {
            s.ok = true;
            return s;
        }
        if (it == max_iter) break;
        const Mat jm = e_dt - jac(s.x);
        s.x -= Eigen::PartialPivLU<Mat>(jm).solve(r);
    }
    return s;
}

} // namespace

SimTrace simulate(const DescriptorPlant& plant, const FilterRealization& filter, const SimConfig& config, const Vec& x0,
                  const Vec& xf0) {
    const int n = plant.n(), q = plant.q(), qw = plant.qw(), m = plant.m();
    if (!(config.dt > 0.0) || !(config.t_end >= config.dt)) {
        throw Error(ErrorKind::InvalidInput, "simulation needs dt > 0 and t_end >= dt");
    }
    if (x0.size() != n || xf0.size() != n) throw Error(ErrorKind::DimensionMismatch, "initial states must have length n");
    if (config.w.size() != 0 && config.w.size() != qw) {
        throw Error(ErrorKind::DimensionMismatch, "w has " + std::to_string(config.w.size()) + " components, expected " +
                                                      std::to_string(qw));
    }
    if (config.u.size() != 0 && config.u.size() != m) {
        throw Error(ErrorKind::DimensionMismatch, "u has " + std::to_string(config.u.size()) + " components, expected " +
                                                      std::to_string(m));
    }
    const auto steps = static_cast<Eigen::Index>(std::llround(config.t_end / config.dt));
    const Eigen::Index samples = steps + 1;
    const Mat eperp = orthogonal_complement(plant.E);

    SimTrace tr;
    tr.time = Vec::Zero(samples);
    tr.x = Mat::Zero(samples, n);
    tr.xf = Mat::Zero(samples, n);
    tr.z = Mat::Zero(samples, q);
    tr.zf = Mat::Zero(samples, q);
    tr.e = Mat::Zero(samples, q);
    tr.w = Mat::Zero(samples, qw);
    tr.newton_residual = Vec::Zero(samples);
    tr.filter_residual = Vec::Zero(samples);
    tr.algebraic_residual = Vec::Zero(samples);

    auto record = [&](Eigen::Index i, double t, const Vec& x, const Vec& xf, const Vec& w, const Vec& u, const Mat& f) {
        tr.time(i) = t;
        tr.x.row(i) = x.transpose();
        tr.xf.row(i) = xf.transpose();
        const Vec z = plant.H * x;
        const Vec zf = filter.CF * xf + filter.E3 * plant.psi.eval(xf, u, t);
        tr.z.row(i) = z.transpose();
        tr.zf.row(i) = zf.transpose();
        tr.e.row(i) = (z - zf).transpose();
        tr.w.row(i) = w.transpose();
        if (eperp.rows() > 0) {
            const Vec rhs = (plant.A + plant.M1 * f * plant.N) * x + plant.phi.eval(x, u, t) + plant.B * w;
            tr.algebraic_residual(i) = (eperp * rhs).cwiseAbs().maxCoeff();
        }
    };
    auto truncated = [&](Eigen::Index count) {
        SimTrace p = tr;
        p.time.conservativeResize(count);
        for (Mat* mat : {&p.x, &p.xf, &p.z, &p.zf, &p.e, &p.w}) mat->conservativeResize(count, Eigen::NoChange);
        p.newton_residual.conservativeResize(count);
        p.filter_residual.conservativeResize(count);
        p.algebraic_residual.conservativeResize(count);
        return p;
    };
    auto check_f = [&](const Mat& f, double t) {
        if (f.size() && spectral_norm(f) > 1.0 + 1e-12) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "||F(t)|| = %.6g > 1 at t = %.6g", spectral_norm(f), t);
            throw Error(ErrorKind::InvalidInput, buf);
        }
    };

    Vec x = x0, xf = xf0;
    {
        const Vec w = eval_signal(config.w, qw, 0.0);
        const Vec u = eval_signal(config.u, m, 0.0);
        const Mat f = uncertainty_at(plant, config, 0.0);
        check_f(f, 0.0);
        record(0, 0.0, x, xf, w, u, f);
    }
    for (Eigen::Index i = 1; i < samples; ++i) {
        const double t = static_cast<double>(i) * config.dt;
        const Vec w = eval_signal(config.w, qw, t);
        const Vec u = eval_signal(config.u, m, t);
        const Mat f = uncertainty_at(plant, config, t);
        check_f(f, t);
        const Mat a_unc = plant.A + plant.M1 * f * plant.N;
        const StepResult sp = implicit_step(
            plant.E, x, config.dt, config.newton_tol, config.newton_max_iterations,
            [&](const Vec& xn) -> Vec { return a_unc * xn + plant.phi.eval(xn, u, t) + plant.B * w; },
            [&](const Vec& xn) -> Mat { return a_unc + plant.phi.jacobian_x(xn, u, t); });
        if (!sp.ok) {
            char buf[120];
            std::snprintf(buf, sizeof buf, "plant Newton failed at t = %.6g (residual %.3e)", t, sp.residual);
            throw SimulationAborted(buf, truncated(i));
        }
        const Vec y = measurement(plant, sp.x, w, u, t, f);
        const StepResult sf = implicit_step(
            plant.E, xf, config.dt, config.newton_tol, config.newton_max_iterations,
            [&](const Vec& xn) -> Vec {
                return filter.AF * xn + filter.BF * y + filter.E1 * plant.phi.eval(xn, u, t) +
                       filter.E2 * plant.psi.eval(xn, u, t);
            },
            [&](const Vec& xn) -> Mat {
                return filter.AF + filter.E1 * plant.phi.jacobian_x(xn, u, t) + filter.E2 * plant.psi.jacobian_x(xn, u, t);
            });
        if (!sf.ok) {
            char buf[120];
            std::snprintf(buf, sizeof buf, "filter Newton failed at t = %.6g (residual %.3e)", t, sf.residual);
            throw SimulationAborted(buf, truncated(i));
        }
        x = sp.x;
        xf = sf.x;
        record(i, t, x, xf, w, u, f);
        tr.newton_residual(i) = sp.residual;
        tr.filter_residual(i) = sf.residual;
    }
    return tr;
}

double l2_norm(const Vec& time, const Mat& samples) {
    double acc = 0.0;
    for (Eigen::Index i = 1; i < time.size(); ++i) {
        const double h = time(i) - time(i - 1);
        acc += 0.5 * h * (samples.row(i - 1).squaredNorm() + samples.row(i).squaredNorm());
    }
    return std::sqrt(acc);
}

TraceNorms norms(const SimTrace& trace) {
    TraceNorms out;
    for (Eigen::Index i = 0; i < trace.e.rows(); ++i) out.e_inf = std::max(out.e_inf, trace.e.row(i).norm());
    out.w_l2 = l2_norm(trace.time, trace.w);
    if (out.w_l2 > 0.0) {
        out.ratio = out.e_inf / out.w_l2;
    } else {
        out.ratio = out.e_inf > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return out;
}

void write_csv(const SimTrace& trace, std::ostream& out) {
    out << 't';
    auto header = [&](const char* prefix, Eigen::Index count) {
        for (Eigen::Index i = 1; i <= count; ++i) out << ',' << prefix << i;
    };
    header("x", trace.x.cols());
    header("xF", trace.xf.cols());
    header("z", trace.z.cols());
    header("zF", trace.zf.cols());
    header("e", trace.e.cols());
    header("w", trace.w.cols());
    out << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (Eigen::Index i = 0; i < trace.samples(); ++i) {
        put(trace.time(i));
        for (const Mat* m : {&trace.x, &trace.xf, &trace.z, &trace.zf, &trace.e, &trace.w}) {
            for (Eigen::Index j = 0; j < m->cols(); ++j) {
                out << ',';
                put((*m)(i, j));
            }
        }
        out << '\n';
    }
}

} // namespace descfilter
