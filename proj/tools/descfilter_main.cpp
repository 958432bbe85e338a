// descfilter: synthesize, simulate and verify robust filters for
// Lipschitz descriptor plants.

#include <iostream>

#include <CLI11.hpp>

#include "descfilter/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Robust energy-to-peak filter synthesis for uncertain Lipschitz descriptor systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "descfilter 0.1.0");

    descfilter::SynthesizeArgs syn;
    std::string xi2, xi1, mode;
    double lambda = 0.0;
    auto* s = app.add_subcommand("synthesize", "Solve the LMI problem and write a filter file");
    s->add_option("config", syn.config, "Plant configuration file")->required()->check(CLI::ExistingFile);
    s->add_option("-o,--output", syn.output, "Filter file to write (default: <config>.filter)");
    auto* xi2_opt = s->add_option("--xi2", xi2, "Peak constraint handling: ladder, strict, nonstrict, off");
    auto* xi1_opt = s->add_option("--xi1", xi1, "Dissipation LMI layout: derivation, printed");
    auto* mode_opt = s->add_option("--mode", mode, "corollary (strict substitution) or theorem1 (explicit equalities)");
    auto* lambda_opt = s->add_option("--lambda", lambda, "Weight on alpha in the objective zeta + lambda alpha");

    descfilter::SimulateArgs sim;
    auto* r = app.add_subcommand("simulate", "Simulate plant and filter and write a CSV trace");
    r->add_option("config", sim.config, "Plant configuration file")->required()->check(CLI::ExistingFile);
    r->add_option("filter", sim.filter, "Filter file")->required()->check(CLI::ExistingFile);
    r->add_option("-o,--output", sim.output, "CSV file to write (default: <filter>.csv)");
    r->add_flag("--nominal", sim.nominal, "Force w = 0 and F = 0");
    double dt = 0.0, t_end = 0.0;
    auto* dt_opt = r->add_option("--dt", dt, "Step size")->check(CLI::PositiveNumber);
    auto* tend_opt = r->add_option("--t-end", t_end, "Final time")->check(CLI::PositiveNumber);

    descfilter::VerifyArgs ver;
    bool serial = false;
    auto* v = app.add_subcommand("verify", "Re-certify the LMI margins and run the disturbance battery");
    v->add_option("config", ver.config, "Plant configuration file")->required()->check(CLI::ExistingFile);
    v->add_option("filter", ver.filter, "Filter file")->required()->check(CLI::ExistingFile);
    v->add_flag("--serial", serial, "Run the scenarios one after another");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : descfilter::kExitInputError;
    }

    if (s->parsed()) {
        if (*xi2_opt) syn.xi2 = xi2;
        if (*xi1_opt) syn.xi1 = xi1;
        if (*mode_opt) syn.mode = mode;
        if (*lambda_opt) syn.lambda = lambda;
        return descfilter::cmd_synthesize(syn, std::cout, std::cerr);
    }
    if (r->parsed()) {
        if (*dt_opt) sim.dt = dt;
        if (*tend_opt) sim.t_end = t_end;
        return descfilter::cmd_simulate(sim, std::cout, std::cerr);
    }
    ver.parallel = !serial;
    return descfilter::cmd_verify(ver, std::cout, std::cerr);
}
