#pragma once

// The three front-end commands. Each returns a process exit code:
// 0 success, 1 input error, 2 negative outcome (infeasible synthesis or a
// failed verification).

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "descfilter/config.hpp"

namespace descfilter {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNegative = 2;

struct SynthesizeArgs {
    std::string config;
    std::string output;  // default: config path with extension .filter
    std::optional<std::string> mode;
    std::optional<std::string> xi2;
    std::optional<std::string> xi1;
    std::optional<double> lambda;
};

struct SimulateArgs {
    std::string config;
    std::string filter;
    std::string output;  // default: filter path with extension .csv
    bool nominal = false;
    std::optional<double> dt;
    std::optional<double> t_end;
};

struct VerifyArgs {
    std::string config;
    std::string filter;
    bool parallel = true;
};

int cmd_synthesize(const SynthesizeArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

struct Scenario {
    std::string name;
    std::string w;  // expression in t, one component per disturbance input
    std::string F;  // k * l components, empty for F = 0
};

/// The configured disturbance, four further L2 signals, w = 0, and the
/// configured disturbance under F(t) = sin(t) I and F(t) = I.
[[nodiscard]] std::vector<Scenario> disturbance_battery(const ConfigFile& cfg);

struct ScenarioResult {
    Scenario scenario;
    bool applicable = true;  // false when w = 0
    bool passed = false;
    TraceNorms norms;
    double max_algebraic_residual = 0.0;
    std::string error;
};

/// Runs one scenario from zero initial energy: E x(0) = 0 and E xF(0) = 0,
/// with the algebraic parts made consistent with w(0).
[[nodiscard]] ScenarioResult run_scenario(const ConfigFile& cfg, const FilterRealization& filter, const Scenario& s,
                                          double bound_slack = 1e-3);

struct VerifyReport {
    bool margins_passed = false;
    bool realization_consistent = false;
    MarginsReport margins;
    std::vector<ScenarioResult> scenarios;
    std::vector<std::string> problems;

    [[nodiscard]] bool passed() const;
};

[[nodiscard]] VerifyReport verify(const ConfigFile& cfg, const FilterFile& filter, bool parallel = true);

} // namespace descfilter
