#include "descfilter/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <ostream>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

std::string with_extension(const std::string& path, const std::string& ext) {
    std::filesystem::path p(path);
    p.replace_extension(ext);
    return p.string();
}

std::string num(double v, const char* f = "%.6g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string replicate(const std::string& s, int count) {
    std::string out;
    for (int i = 0; i < count; ++i) out += (i ? "; " : "") + s;
    return out;
}

std::string diagonal(const std::string& s, int rows, int cols) {
    std::string out;
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) out += std::string(out.empty() ? "" : "; ") + (i == j ? s : "0");
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
    f << content;
    if (!f) throw Error(ErrorKind::InvalidInput, "write to " + path + " failed");
}

void print_margins(const MarginsReport& r, std::ostream& out) {
    for (const auto& c : r.constraints) {
        out << "  " << c.name << ' ' << to_string(c.sense);
        if (c.sense == Sense::Zero) {
            out << "  residual " << num(c.extreme, "%.3e");
        } else {
            out << "  extreme eigenvalue " << num(c.extreme, "%.6e") << "  margin " << num(c.margin, "%.3e");
        }
        out << (c.passed ? "  ok" : "  FAIL") << '\n';
    }
}

} // namespace

int cmd_synthesize(const SynthesizeArgs& args, std::ostream& out, std::ostream& err) {
    ConfigFile cfg;
    SynthesisOptions opts;
    try {
        cfg = load_config(args.config);
        opts = cfg.synthesis;
        if (args.mode) opts.mode = parse_synthesis_mode(*args.mode);
        if (args.xi2) {
            if (*args.xi2 == "ladder") {
                opts.xi2.reset();
            } else {
                opts.xi2 = parse_xi2_mode(*args.xi2);
            }
        }
        if (args.xi1) opts.xi1 = parse_xi1_form(*args.xi1);
        if (args.lambda) opts.lambda = *args.lambda;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInputError;
    }

    SynthesisResult res;
    try {
        res = synthesize(cfg.plant, cfg.structure, opts);
    } catch (const Error& e) {
        err << e.what() << '\n';
        if (e.kind() == ErrorKind::SynthesisInfeasible) {
            out << "status: Infeasible\n";
            return kExitNegative;
        }
        return kExitInputError;
    }
    const SynthesisCertificate& c = res.certificate;
    out << "status: Optimal\n";
    out << "mode: " << to_string(c.mode) << '\n';
    out << "xi2_mode: " << to_string(c.xi2_mode) << '\n';
    for (const auto& a : c.attempts) {
        out << "  rung " << to_string(a.xi2) << ": " << to_string(a.status);
        if (!a.note.empty()) out << " (" << a.note << ')';
        out << '\n';
    }
    out << "mu_star: " << num(c.mu_star(), "%.10g") << '\n';
    out << "zeta: " << num(c.zeta, "%.10g") << '\n';
    out << "epsilon: " << num(c.epsilon, "%.10g") << '\n';
    out << "alpha: " << (c.peak_certified() ? num(c.alpha, "%.10g") : std::string("n/a (peak constraints off)")) << '\n';
    if (!c.peak_certified()) {
        out << "note: the peak constraints were dropped; mu_star is certified only by the dissipation inequality "
               "and is checked empirically by simulation (see verify)\n";
    }
    out << "feasibility radius: " << num(c.margins.min_margin, "%.3e") << '\n';
    out << "margins:\n";
    print_margins(c.margins, out);

    const std::string path = args.output.empty() ? with_extension(args.config, ".filter") : args.output;
    try {
        write_file(path, format_filter_file(res.filter, c));
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInputError;
    }
    out << "filter written to " << path << '\n';
    return kExitOk;
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    try {
        ConfigFile cfg = load_config(args.config);
        const FilterFile ff = load_filter_file(args.filter);
        if (args.dt) cfg.simulation.dt = *args.dt;
        if (args.t_end) cfg.simulation.t_end = *args.t_end;
        if (args.nominal) {
            cfg.simulation.w = replicate("0", cfg.plant.qw());
            cfg.simulation.F.clear();
        }
        const SimConfig sc = make_sim_config(cfg);
        const DescriptorPlant& pl = cfg.plant;
        const double t0 = 0.0;
        const Vec w0 = sc.w.size() ? sc.w.eval(Vec(), Vec(), t0) : Vec::Zero(pl.qw());
        const Vec u0 = sc.u.size() ? sc.u.eval(Vec(), Vec(), t0) : Vec::Zero(pl.m());
        const Mat f0 = uncertainty_at(pl, sc, t0);
        InitOptions x_init = cfg.simulation.x0_init;
        x_init.uncertainty = f0;
        const Vec x0 = consistent_init(pl, cfg.simulation.x0_guess, w0, u0, x_init);
        const Vec y0 = measurement(pl, x0, w0, u0, t0, f0);
        const Vec xf0 = consistent_filter_init(pl, ff.realization, cfg.simulation.xf0_guess, y0, u0, cfg.simulation.xf0_init);

        const SimTrace tr = simulate(pl, ff.realization, sc, x0, xf0);
        const std::string path = args.output.empty() ? with_extension(args.filter, ".csv") : args.output;
        std::ofstream csv(path, std::ios::binary);
        if (!csv) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
        write_csv(tr, csv);

        const TraceNorms nm = norms(tr);
        out << "x0: " << format_matrix(x0.transpose()) << '\n';
        out << "xF0: " << format_matrix(xf0.transpose()) << '\n';
        out << "samples: " << tr.samples() << "  dt: " << num(sc.dt) << "  t_end: " << num(sc.t_end) << '\n';
        out << "max algebraic residual (steps): "
            << num(tr.samples() > 1 ? tr.algebraic_residual.tail(tr.samples() - 1).maxCoeff() : 0.0, "%.3e") << '\n';
        out << "|e(0)|: " << num(tr.e.row(0).norm()) << "  |e(t_end)|: " << num(tr.e.row(tr.samples() - 1).norm())
            << '\n';
        out << "e_inf: " << num(nm.e_inf) << "  w_l2: " << num(nm.w_l2) << '\n';
        if (nm.w_l2 > 0.0) {
            out << "ratio: " << num(nm.ratio) << "  mu_star: " << num(ff.realization.mu_star) << '\n';
        } else {
            out << "ratio: n/a (w = 0)\n";
        }
        const double energy = (pl.E * x0).norm() + (pl.E * xf0).norm();
        if (energy > 1e-12) {
            out << "note: the initial state has E x(0) or E xF(0) nonzero; the energy-to-peak bound assumes zero "
                   "initial energy\n";
        }
        out << "trace written to " << path << '\n';
        return kExitOk;
    } catch (const SimulationAborted& e) {
        err << e.what() << " after " << e.partial().samples() << " samples\n";
        return kExitInputError;
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInputError;
    }
}

std::vector<Scenario> disturbance_battery(const ConfigFile& cfg) {
    const int qw = cfg.plant.qw();
    const int k = cfg.plant.k(), l = cfg.plant.l();
    std::vector<Scenario> out;
    std::string base = cfg.simulation.w;
    bool configured_zero = true;
    try {
        const VectorExpr e = parse_signal(base, qw, "w");
        for (int i = 0; i < e.size(); ++i) {
            if (!is_constant(e.component(i), 0.0)) configured_zero = false;
        }
    } catch (const Error&) {
        configured_zero = true;
    }
    if (configured_zero) base = replicate("30*exp(-t/3)*cos(7*t)", qw);
    out.push_back({"configured", base, ""});
    out.push_back({"exp(-t)", replicate("exp(-t)", qw), ""});
    out.push_back({"sin(t)exp(-0.2t)", replicate("sin(t)*exp(-0.2*t)", qw), ""});
    out.push_back({"smooth pulse", replicate("5*exp(-(t-3)^2)", qw), ""});
    out.push_back({"decaying oscillation", replicate("10*exp(-t/2)*cos(3*t)", qw), ""});
    out.push_back({"zero", replicate("0", qw), ""});
    if (k > 0 && l > 0) {
        out.push_back({"configured, F = sin(t) I", base, diagonal("sin(t)", k, l)});
        out.push_back({"configured, F = I", base, diagonal("1", k, l)});
    }
    return out;
}

ScenarioResult run_scenario(const ConfigFile& cfg, const FilterRealization& filter, const Scenario& s,
                            double bound_slack) {
    ScenarioResult r;
    r.scenario = s;
    try {
        ConfigFile c = cfg;
        c.simulation.w = s.w;
        c.simulation.F = s.F;
        const SimConfig sc = make_sim_config(c);
        const DescriptorPlant& pl = c.plant;
        const Vec w0 = sc.w.size() ? sc.w.eval(Vec(), Vec(), 0.0) : Vec::Zero(pl.qw());
        const Vec u0 = sc.u.size() ? sc.u.eval(Vec(), Vec(), 0.0) : Vec::Zero(pl.m());
        const Mat f0 = uncertainty_at(pl, sc, 0.0);
        InitOptions hold;
        hold.mode = InitMode::HoldDifferential;
        InitOptions plant_hold = hold;
        plant_hold.uncertainty = f0;
        const Vec x0 = consistent_init(pl, Vec::Zero(pl.n()), w0, u0, plant_hold);
        const Vec y0 = measurement(pl, x0, w0, u0, 0.0, f0);
        const Vec xf0 = consistent_filter_init(pl, filter, Vec::Zero(pl.n()), y0, u0, hold);
        const SimTrace tr = simulate(pl, filter, sc, x0, xf0);
        r.norms = norms(tr);
        r.max_algebraic_residual = tr.samples() > 1 ? tr.algebraic_residual.tail(tr.samples() - 1).maxCoeff() : 0.0;
        r.applicable = r.norms.w_l2 > 0.0;
        r.passed = r.applicable ? r.norms.ratio <= filter.mu_star + bound_slack : r.norms.e_inf == 0.0;
    } catch (const Error& e) {
        r.error = e.what();
        r.passed = false;
    }
    return r;
}

bool VerifyReport::passed() const {
    if (!margins_passed || !realization_consistent || !problems.empty()) return false;
    return std::all_of(scenarios.begin(), scenarios.end(), [](const ScenarioResult& s) { return s.passed; });
}

VerifyReport verify(const ConfigFile& cfg, const FilterFile& filter, bool parallel) {
    VerifyReport rep;
    if (!filter.certificate) throw Error(ErrorKind::CertificationUnavailable, "filter file has no [certificate] section");
    SynthesisCertificate cert = *filter.certificate;
    cert.E = cfg.plant.E;

    const LmiProblem prob = rebuild_problem(cfg.plant, cfg.structure, cert);
    rep.margins = evaluate_at(prob, pack_certificate(prob, cert));
    rep.margins_passed = rep.margins.all_passed();

    const FilterRealization& f = filter.realization;
    rep.realization_consistent = true;
    if (f.AF.rows() != cert.P1.rows() || f.AF.cols() != cert.G1.cols() || f.BF.rows() != cert.P1.rows() ||
        f.BF.cols() != cert.G2.cols()) {
        rep.realization_consistent = false;
        rep.problems.push_back("realization and certificate shapes differ");
    } else {
        const double r1 = (cert.P1.transpose() * f.AF - cert.G1).norm();
        const double r2 = (cert.P1.transpose() * f.BF - cert.G2).norm();
        if (r1 > 1e-8 * std::max(1.0, cert.G1.norm()) || r2 > 1e-8 * std::max(1.0, cert.G2.norm())) {
            rep.realization_consistent = false;
            rep.problems.push_back("AF/BF do not match P1^-T G1 / P1^-T G2");
        }
    }
    if (std::abs(f.mu_star - cert.mu_star()) > 1e-12 * std::max(1.0, f.mu_star)) {
        rep.realization_consistent = false;
        rep.problems.push_back("mu_star does not equal sqrt(zeta)");
    }

    const std::vector<Scenario> battery = disturbance_battery(cfg);
    if (parallel) {
        std::vector<std::future<ScenarioResult>> jobs;
        for (const auto& s : battery) {
            jobs.push_back(std::async(std::launch::async, [&cfg, &f, s] { return run_scenario(cfg, f, s); }));
        }
        for (auto& j : jobs) rep.scenarios.push_back(j.get());
    } else {
        for (const auto& s : battery) rep.scenarios.push_back(run_scenario(cfg, f, s));
    }
    return rep;
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
    VerifyReport rep;
    double mu = 0.0;
    try {
        const ConfigFile cfg = load_config(args.config);
        const FilterFile ff = load_filter_file(args.filter);
        mu = ff.realization.mu_star;
        rep = verify(cfg, ff, args.parallel);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kExitInputError;
    }
    out << "margins: " << (rep.margins_passed ? "pass" : "FAIL") << "  (feasibility radius "
        << num(rep.margins.min_margin, "%.3e") << ")\n";
    print_margins(rep.margins, out);
    out << "realization matches certificate: " << (rep.realization_consistent ? "yes" : "NO") << '\n';
    for (const auto& p : rep.problems) out << "  " << p << '\n';
    out << "mu_star: " << num(mu, "%.10g") << "  (bound checked as ratio <= mu_star + 1e-3)\n";
    for (const auto& s : rep.scenarios) {
        out << "  " << (s.passed ? "pass" : "FAIL") << "  " << s.scenario.name << ": ";
        if (!s.error.empty()) {
            out << s.error << '\n';
            continue;
        }
        if (!s.applicable) {
            out << "ratio n/a (w = 0), e_inf " << num(s.norms.e_inf) << '\n';
            continue;
        }
        out << "ratio " << num(s.norms.ratio) << "  e_inf " << num(s.norms.e_inf) << "  w_l2 " << num(s.norms.w_l2)
            << '\n';
    }
    const bool ok = rep.passed();
    out << "verify: " << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kExitOk : kExitNegative;
}

} // namespace descfilter
