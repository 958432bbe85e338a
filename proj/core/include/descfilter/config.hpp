#pragma once

// Sectioned key = value files: plant configurations and filter files.
//
//   # comment
//   [section]
//   key = value
//
// Matrices are written as rows separated by ';' and entries by ','
// ("1, 2; 3, 4"); an empty matrix is written with its shape, "[0x2]".

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "descfilter/dae_sim.hpp"
#include "descfilter/synthesis.hpp"

namespace descfilter {

struct IniValue {
    std::string text;
    int line = 0;
    int column = 0;  // 1-based column of the first value character
};

struct IniSection {
    std::string name;
    int line = 0;
    std::map<std::string, IniValue> values;
};

struct IniDocument {
    std::string file;
    std::vector<IniSection> sections;

    [[nodiscard]] const IniSection* find(const std::string& name) const;
};

// Throws ParseError on lines that are neither comments, headers nor
// key = value pairs, and on duplicate sections or keys.
[[nodiscard]] IniDocument parse_ini(std::string_view text, const std::string& file = {});

// Throws ParseError (InvalidInput) with the given position on bad input.
[[nodiscard]] Mat parse_matrix(std::string_view text, int line = 0, int column = 0, const std::string& file = {});
[[nodiscard]] std::string format_matrix(const Mat& m);
[[nodiscard]] std::string format_double(double v);

struct SimulationSettings {
    double t_end = 30.0;
    double dt = 1e-3;
    std::string w = "0";
    std::string u;
    std::string F;
    Vec x0_guess;
    Vec xf0_guess;
    InitOptions x0_init;
    InitOptions xf0_init;
};

struct ConfigFile {
    std::string path;
    DescriptorPlant plant;
    FilterStructure structure;
    SynthesisOptions synthesis;
    SimulationSettings simulation;
};

/// Sections: [dims] n, m, p, q, qw; [matrices] E, A, B, C, D, H and
/// optionally M1, M2, N; [nonlinearity] phi, psi, gamma1, gamma2;
/// [filter] preset, e1, e2, e3, e3_mode, lambda, xi2_mode, mode, xi1;
/// [simulation] t_end, dt, w, u, F, x0_guess, xF0_guess, x0_init, xF0_init.
/// Init modes are min-norm, hold-differential or free:i,j (1-based).
[[nodiscard]] ConfigFile parse_config(std::string_view text, const std::string& file = {});
[[nodiscard]] ConfigFile load_config(const std::string& path);

[[nodiscard]] InitOptions parse_init_mode(const std::string& s);
[[nodiscard]] std::string format_init_mode(const InitOptions& opts);

// Signals in t for the simulator; an empty string yields an empty expression.
[[nodiscard]] VectorExpr parse_signal(const std::string& text, int components, const std::string& what);
[[nodiscard]] SimConfig make_sim_config(const ConfigFile& cfg);

struct FilterFile {
    FilterRealization realization;
    std::optional<SynthesisCertificate> certificate;
};

/// [realization] AF, BF, CF, E1, E2, E3, mu_star; [certificate] mode,
/// xi2_mode, xi1, zeta, epsilon, alpha, lambda, peak_bound, min_margin;
/// [variables] P1, P2, G1, G2, CF, E3 and X1, X2, Y1, Y2 in corollary mode;
/// [margins] one line per constraint. Floats use 17 significant digits.
[[nodiscard]] std::string format_filter_file(const FilterRealization& f, const SynthesisCertificate& cert);
[[nodiscard]] FilterFile parse_filter_file(std::string_view text, const std::string& file = {});
[[nodiscard]] FilterFile load_filter_file(const std::string& path);

[[nodiscard]] std::string read_text_file(const std::string& path);

} // namespace descfilter
