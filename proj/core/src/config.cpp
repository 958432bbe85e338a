#include "descfilter/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "descfilter/error.hpp"

namespace descfilter {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Trims blanks and returns the number of leading characters removed.
std::string_view trim(std::string_view s, std::size_t* lead = nullptr) {
    std::size_t a = 0;
    while (a < s.size() && is_space(s[a])) ++a;
    std::size_t b = s.size();
    while (b > a && is_space(s[b - 1])) --b;
    if (lead) *lead = a;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& msg, int line, int column, const std::string& file) {
    throw ParseError(ErrorKind::Parse, msg, line, column, file);
}

bool parse_number(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

} // namespace

const IniSection* IniDocument::find(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

IniDocument parse_ini(std::string_view text, const std::string& file) {
    IniDocument doc;
    doc.file = file;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::size_t lead = 0;
        const std::string_view line = trim(raw, &lead);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') fail("section header must end with ']'", line_no, static_cast<int>(lead + line.size()), file);
            const std::string name(trim(line.substr(1, line.size() - 2)));
            if (name.empty()) fail("empty section name", line_no, static_cast<int>(lead + 1), file);
            if (doc.find(name)) fail("duplicate section [" + name + "]", line_no, static_cast<int>(lead + 1), file);
            doc.sections.push_back({name, line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'", line_no, static_cast<int>(lead + 1), file);
        if (doc.sections.empty()) fail("key outside of any section", line_no, static_cast<int>(lead + 1), file);
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) fail("missing key before '='", line_no, static_cast<int>(lead + 1), file);
        std::size_t vlead = 0;
        const std::string_view value = trim(line.substr(eq + 1), &vlead);
        auto& values = doc.sections.back().values;
        if (values.count(key)) fail("duplicate key '" + key + "'", line_no, static_cast<int>(lead + 1), file);
        values[key] = {std::string(value), line_no, static_cast<int>(lead + eq + 1 + vlead + 1)};
        if (end == text.size()) break;
    }
    return doc;
}

Mat parse_matrix(std::string_view text, int line, int column, const std::string& file) {
    std::size_t lead = 0;
    const std::string_view s = trim(text, &lead);
    const int base = column + static_cast<int>(lead);
    if (!s.empty() && s.front() == '[') {
        int r = -1, c = -1;
        if (std::sscanf(std::string(s).c_str(), "[%dx%d]", &r, &c) != 2 || r < 0 || c < 0 || (r != 0 && c != 0)) {
            fail("empty matrix must be written as [0xC] or [Rx0]", line, base, file);
        }
        return Mat(r, c);
    }
    if (s.empty()) fail("empty matrix value", line, base, file);
    std::vector<std::vector<double>> rows;
    std::size_t row_start = 0;
    while (row_start <= s.size()) {
        std::size_t row_end = s.find(';', row_start);
        if (row_end == std::string_view::npos) row_end = s.size();
        const std::string_view row = s.substr(row_start, row_end - row_start);
        if (!(trim(row).empty() && row_end == s.size() && !rows.empty())) {
            std::vector<double> entries;
            std::size_t e_start = 0;
            while (e_start <= row.size()) {
                std::size_t e_end = row.find(',', e_start);
                if (e_end == std::string_view::npos) e_end = row.size();
                const std::string_view entry = row.substr(e_start, e_end - e_start);
                double v = 0.0;
                if (!parse_number(entry, v)) {
                    std::size_t elead = 0;
                    trim(entry, &elead);
                    fail("matrix row " + std::to_string(rows.size() + 1) + ": '" + std::string(trim(entry)) +
                             "' is not a number",
                         line, base + static_cast<int>(row_start + e_start + elead), file);
                }
                entries.push_back(v);
                e_start = e_end + 1;
            }
            if (!rows.empty() && entries.size() != rows.front().size()) {
                fail("matrix row " + std::to_string(rows.size() + 1) + " has " + std::to_string(entries.size()) +
                         " entries, expected " + std::to_string(rows.front().size()),
                     line, base + static_cast<int>(row_start), file);
            }
            rows.push_back(std::move(entries));
        }
        row_start = row_end + 1;
    }
    Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_matrix(const Mat& m) {
    if (m.size() == 0) return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += "; ";
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ", ";
            out += format_double(m(i, j));
        }
    }
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

// Typed access to one section with position-aware errors.
class SectionReader {
public:
    SectionReader(const IniDocument& doc, const std::string& name, bool required)
        : doc_(doc), name_(name), section_(doc.find(name)) {
        if (!section_ && required) fail("missing required section [" + name + "]", 1, 1, doc.file);
    }

    [[nodiscard]] bool present() const { return section_ != nullptr; }

    [[nodiscard]] const IniValue* get(const std::string& key) const {
        if (!section_) return nullptr;
        used_.insert(key);
        auto it = section_->values.find(key);
        return it == section_->values.end() ? nullptr : &it->second;
    }

    [[nodiscard]] const IniValue& require(const std::string& key) const {
        const IniValue* v = get(key);
        if (!v) fail("[" + name_ + "] is missing '" + key + "'", section_ ? section_->line : 1, 1, doc_.file);
        return *v;
    }

    [[nodiscard]] double number(const std::string& key, double fallback) const {
        const IniValue* v = get(key);
        if (!v) return fallback;
        double out = 0.0;
        if (!parse_number(v->text, out)) fail("'" + key + "' must be a number", v->line, v->column, doc_.file);
        return out;
    }

    [[nodiscard]] int integer(const std::string& key) const {
        const IniValue& v = require(key);
        double out = 0.0;
        if (!parse_number(v.text, out) || out < 0 || out != std::floor(out) || out > 1e6) {
            fail("'" + key + "' must be a non-negative integer", v.line, v.column, doc_.file);
        }
        return static_cast<int>(out);
    }

    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const {
        const IniValue* v = get(key);
        return v ? v->text : fallback;
    }

    [[nodiscard]] Mat matrix(const std::string& key, Eigen::Index rows, Eigen::Index cols, bool required) const {
        const IniValue* v = required ? &require(key) : get(key);
        if (!v) return Mat::Zero(rows, cols);
        Mat m = parse_matrix(v->text, v->line, v->column, doc_.file);
        if (m.rows() != rows || m.cols() != cols) {
            fail(key + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols),
                 v->line, v->column, doc_.file);
        }
        return m;
    }

    [[nodiscard]] Mat any_matrix(const std::string& key) const {
        const IniValue& v = require(key);
        return parse_matrix(v.text, v.line, v.column, doc_.file);
    }

    [[nodiscard]] VectorExpr expression(const std::string& key, int components, int n, int m) const {
        const IniValue* v = get(key);
        if (!v || v->text.empty()) return VectorExpr::zero(components, n, m);
        try {
            VectorExpr e = parse_expr(v->text, n, m);
            if (e.size() != components) {
                fail("'" + key + "' has " + std::to_string(e.size()) + " components, expected " + std::to_string(components),
                     v->line, v->column, doc_.file);
            }
            return e;
        } catch (const ParseError& e) {
            if (!e.file().empty()) throw;
            const int line = v->line + e.line() - 1;
            const int col = e.line() == 1 ? v->column + e.column() - 1 : e.column();
            throw ParseError(e.kind(), "in '" + key + "': " + e.detail(), line, col, doc_.file);
        }
    }

    void reject_unknown() const {
        if (!section_) return;
        for (const auto& [key, v] : section_->values) {
            if (!used_.count(key)) fail("unknown key '" + key + "' in [" + name_ + "]", v.line, 1, doc_.file);
        }
    }

private:
    const IniDocument& doc_;
    std::string name_;
    const IniSection* section_;
    mutable std::set<std::string> used_;
};

Vec vector_value(const SectionReader& r, const std::string& key, int n, const std::string& file) {
    const IniValue* v = r.get(key);
    if (!v) return Vec::Zero(n);
    const Mat m = parse_matrix(v->text, v->line, v->column, file);
    if (m.size() != n || (m.rows() != 1 && m.cols() != 1)) {
        fail("'" + key + "' needs " + std::to_string(n) + " entries", v->line, v->column, file);
    }
    return Eigen::Map<const Vec>(m.data(), n);
}

FilterPreset parse_preset(const std::string& s, const IniValue* where, const std::string& file) {
    if (s == "dynamic") return FilterPreset::Dynamic;
    if (s == "static-gain" || s == "static_gain") return FilterPreset::StaticGain;
    if (s == "custom") return FilterPreset::Custom;
    fail("unknown filter preset '" + s + "' (dynamic, static-gain, custom)", where ? where->line : 1,
         where ? where->column : 1, file);
}

template <typename F>
auto with_position(const IniValue* v, const std::string& file, F&& f) {
    try {
        return f();
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        fail(e.what(), v ? v->line : 1, v ? v->column : 1, file);
    }
}

} // namespace

InitOptions parse_init_mode(const std::string& s) {
    InitOptions o;
    if (s.empty() || s == "min-norm") return o;
    if (s == "hold-differential") {
        o.mode = InitMode::HoldDifferential;
        return o;
    }
    if (s.rfind("free:", 0) == 0) {
        o.mode = InitMode::FreeCoordinates;
        std::stringstream ss(s.substr(5));
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            if (!parse_number(item, v) || v < 1 || v != std::floor(v)) {
                throw Error(ErrorKind::InvalidInput, "bad coordinate '" + item + "' in init mode (1-based indices)");
            }
            o.free.push_back(static_cast<int>(v) - 1);
        }
        if (o.free.empty()) throw Error(ErrorKind::InvalidInput, "free: needs at least one coordinate");
        return o;
    }
    throw Error(ErrorKind::InvalidInput, "unknown init mode '" + s + "' (min-norm, hold-differential, free:i,j)");
}

std::string format_init_mode(const InitOptions& o) {
    switch (o.mode) {
    case InitMode::MinimumNorm: return "min-norm";
    case InitMode::HoldDifferential: return "hold-differential";
    case InitMode::FreeCoordinates: {
        std::string out = "free:";
        for (std::size_t i = 0; i < o.free.size(); ++i) out += (i ? "," : "") + std::to_string(o.free[i] + 1);
        return out;
    }
    }
    return "?";
}

ConfigFile parse_config(std::string_view text, const std::string& file) {
    const IniDocument doc = parse_ini(text, file);
    static const std::set<std::string> known = {"dims", "matrices", "nonlinearity", "filter", "simulation"};
    for (const auto& s : doc.sections) {
        if (!known.count(s.name)) fail("unknown section [" + s.name + "]", s.line, 1, file);
    }
    ConfigFile cfg;
    cfg.path = file;

    const SectionReader dims(doc, "dims", true);
    const int n = dims.integer("n");
    const int m = dims.get("m") ? dims.integer("m") : 0;
    const int p = dims.integer("p");
    const int q = dims.integer("q");
    const int qw = dims.integer("qw");
    if (n == 0) fail("n must be positive", dims.require("n").line, dims.require("n").column, file);
    dims.reject_unknown();

    const SectionReader mats(doc, "matrices", true);
    DescriptorPlant& pl = cfg.plant;
    pl.inputs = m;
    pl.E = mats.matrix("E", n, n, true);
    pl.A = mats.matrix("A", n, n, true);
    pl.B = mats.matrix("B", n, qw, true);
    pl.C = mats.matrix("C", p, n, true);
    pl.D = mats.matrix("D", p, qw, true);
    pl.H = mats.matrix("H", q, n, true);
    if (mats.get("M1") || mats.get("M2") || mats.get("N")) {
        pl.M1 = mats.any_matrix("M1");
        pl.N = mats.any_matrix("N");
        const auto k = pl.M1.cols();
        const auto l = pl.N.rows();
        if (pl.M1.rows() != n) fail("M1 must have n rows", mats.require("M1").line, mats.require("M1").column, file);
        if (pl.N.cols() != n) fail("N must have n columns", mats.require("N").line, mats.require("N").column, file);
        pl.M2 = mats.matrix("M2", p, k, true);
        (void)l;
    } else {
        pl.M1 = Mat(n, 0);
        pl.M2 = Mat(p, 0);
        pl.N = Mat(0, n);
    }
    mats.reject_unknown();

    const SectionReader nl(doc, "nonlinearity", false);
    pl.phi = nl.expression("phi", n, n, m);
    pl.psi = nl.expression("psi", p, n, m);
    pl.gamma1 = nl.number("gamma1", 0.0);
    pl.gamma2 = nl.number("gamma2", 0.0);
    if (pl.gamma1 < 0.0 || pl.gamma2 < 0.0) {
        const IniValue* v = nl.get(pl.gamma1 < 0.0 ? "gamma1" : "gamma2");
        fail("Lipschitz constants must be >= 0", v->line, v->column, file);
    }
    nl.reject_unknown();

    const SectionReader flt(doc, "filter", false);
    const FilterPreset preset = parse_preset(flt.text("preset", "dynamic"), flt.get("preset"), file);
    FilterStructure st = preset == FilterPreset::StaticGain ? FilterStructure::static_gain(n, p, q)
                                                            : FilterStructure::dynamic(n, p, q);
    st.preset = preset;
    if (flt.get("e1")) st.e1 = flt.matrix("e1", n, n, true);
    if (flt.get("e2")) st.e2 = flt.matrix("e2", n, p, true);
    if (flt.get("e3")) st.e3 = flt.matrix("e3", q, p, true);
    const std::string e3_mode = flt.text("e3_mode", "fixed");
    if (e3_mode == "decision") {
        st.e3_mode = E3Mode::Decision;
    } else if (e3_mode != "fixed") {
        fail("e3_mode must be fixed or decision", flt.get("e3_mode")->line, flt.get("e3_mode")->column, file);
    }
    cfg.structure = st;
    SynthesisOptions& so = cfg.synthesis;
    so.lambda = flt.number("lambda", 0.0);
    if (so.lambda < 0.0) fail("lambda must be >= 0", flt.get("lambda")->line, flt.get("lambda")->column, file);
    const std::string xi2 = flt.text("xi2_mode", "ladder");
    if (xi2 != "ladder") so.xi2 = with_position(flt.get("xi2_mode"), file, [&] { return parse_xi2_mode(xi2); });
    so.mode = with_position(flt.get("mode"), file, [&] { return parse_synthesis_mode(flt.text("mode", "corollary")); });
    so.xi1 = with_position(flt.get("xi1"), file, [&] { return parse_xi1_form(flt.text("xi1", "derivation")); });
    flt.reject_unknown();

    const SectionReader sim(doc, "simulation", false);
    SimulationSettings& ss = cfg.simulation;
    ss.t_end = sim.number("t_end", 30.0);
    ss.dt = sim.number("dt", 1e-3);
    if (!(ss.dt > 0.0) || !(ss.t_end >= ss.dt)) {
        const IniValue* v = sim.get("dt") ? sim.get("dt") : sim.get("t_end");
        fail("simulation needs dt > 0 and t_end >= dt", v ? v->line : 1, v ? v->column : 1, file);
    }
    ss.w = sim.text("w", "0");
    ss.u = sim.text("u", "");
    ss.F = sim.text("F", "");
    for (const auto& [key, count] : {std::pair<std::string, int>{"w", qw}, {"u", m}, {"F", pl.k() * pl.l()}}) {
        const IniValue* v = sim.get(key);
        if (!v || v->text.empty()) continue;
        try {
            const VectorExpr e = parse_expr(v->text, 0, 0);
            if (e.size() != count) {
                fail("'" + key + "' has " + std::to_string(e.size()) + " components, expected " + std::to_string(count),
                     v->line, v->column, file);
            }
        } catch (const ParseError& e) {
            if (!e.file().empty()) throw;
            throw ParseError(e.kind(), "in '" + key + "': " + e.detail(), v->line + e.line() - 1,
                             e.line() == 1 ? v->column + e.column() - 1 : e.column(), file);
        }
    }
    ss.x0_guess = vector_value(sim, "x0_guess", n, file);
    ss.xf0_guess = vector_value(sim, "xF0_guess", n, file);
    ss.x0_init = with_position(sim.get("x0_init"), file, [&] { return parse_init_mode(sim.text("x0_init", "")); });
    ss.xf0_init = with_position(sim.get("xF0_init"), file, [&] { return parse_init_mode(sim.text("xF0_init", "")); });
    for (const InitOptions* o : {&ss.x0_init, &ss.xf0_init}) {
        for (int c : o->free) {
            if (c >= n) fail("init coordinate out of range", 1, 1, file);
        }
    }
    sim.reject_unknown();
    return cfg;
}

ConfigFile load_config(const std::string& path) {
    return parse_config(read_text_file(path), path);
}

VectorExpr parse_signal(const std::string& text, int components, const std::string& what) {
    if (trim(text).empty()) return VectorExpr();
    VectorExpr e = parse_expr(text, 0, 0);
    if (e.size() != components) {
        throw Error(ErrorKind::DimensionMismatch, what + " has " + std::to_string(e.size()) + " components, expected " +
                                                      std::to_string(components));
    }
    return e;
}

SimConfig make_sim_config(const ConfigFile& cfg) {
    SimConfig sc;
    sc.t_end = cfg.simulation.t_end;
    sc.dt = cfg.simulation.dt;
    sc.w = parse_signal(cfg.simulation.w, cfg.plant.qw(), "w");
    sc.u = parse_signal(cfg.simulation.u, cfg.plant.m(), "u");
    if (!trim(cfg.simulation.F).empty()) sc.F = parse_signal(cfg.simulation.F, cfg.plant.k() * cfg.plant.l(), "F");
    return sc;
}

std::string format_filter_file(const FilterRealization& f, const SynthesisCertificate& cert) {
    std::ostringstream out;
    auto kv = [&](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
    out << "# filter realization and synthesis certificate\n";
    out << "[realization]\n";
    kv("AF", format_matrix(f.AF));
    kv("BF", format_matrix(f.BF));
    kv("CF", format_matrix(f.CF));
    kv("E1", format_matrix(f.E1));
    kv("E2", format_matrix(f.E2));
    kv("E3", format_matrix(f.E3));
    kv("mu_star", format_double(f.mu_star));
    out << "\n[certificate]\n";
    kv("mode", to_string(cert.mode));
    kv("xi2_mode", to_string(cert.xi2_mode));
    kv("xi1", to_string(cert.xi1));
    kv("zeta", format_double(cert.zeta));
    kv("epsilon", format_double(cert.epsilon));
    kv("alpha", format_double(cert.alpha));
    kv("lambda", format_double(cert.lambda));
    kv("peak_bound", cert.peak_certified() ? "certified" : "uncertified");
    kv("min_margin", format_double(cert.margins.min_margin));
    out << "\n[variables]\n";
    kv("P1", format_matrix(cert.P1));
    kv("P2", format_matrix(cert.P2));
    if (cert.mode == SynthesisMode::Corollary) {
        kv("X1", format_matrix(cert.X1));
        kv("X2", format_matrix(cert.X2));
        kv("Y1", format_matrix(cert.Y1));
        kv("Y2", format_matrix(cert.Y2));
    }
    kv("G1", format_matrix(cert.G1));
    kv("G2", format_matrix(cert.G2));
    kv("CF", format_matrix(cert.CF));
    kv("E3", format_matrix(cert.E3));
    out << "\n[margins]\n";
    for (const auto& c : cert.margins.constraints) {
        kv(c.name, to_string(c.sense) + " extreme " + format_double(c.extreme) + " margin " + format_double(c.margin));
    }
    return out.str();
}

FilterFile parse_filter_file(std::string_view text, const std::string& file) {
    const IniDocument doc = parse_ini(text, file);
    FilterFile ff;
    const SectionReader real(doc, "realization", true);
    FilterRealization& f = ff.realization;
    f.AF = real.any_matrix("AF");
    f.BF = real.any_matrix("BF");
    f.CF = real.any_matrix("CF");
    f.E1 = real.any_matrix("E1");
    f.E2 = real.any_matrix("E2");
    f.E3 = real.any_matrix("E3");
    f.mu_star = real.number("mu_star", NAN);
    if (!std::isfinite(f.mu_star)) fail("[realization] needs a finite mu_star", 1, 1, file);
    real.reject_unknown();

    const SectionReader cs(doc, "certificate", false);
    if (!cs.present()) return ff;
    SynthesisCertificate c;
    const IniValue& mode = cs.require("mode");
    c.mode = with_position(&mode, file, [&] { return parse_synthesis_mode(mode.text); });
    const IniValue& xi2 = cs.require("xi2_mode");
    c.xi2_mode = with_position(&xi2, file, [&] { return parse_xi2_mode(xi2.text); });
    c.xi1 = with_position(cs.get("xi1"), file, [&] { return parse_xi1_form(cs.text("xi1", "derivation")); });
    c.zeta = cs.number("zeta", NAN);
    c.epsilon = cs.number("epsilon", NAN);
    c.alpha = cs.number("alpha", 0.0);
    c.lambda = cs.number("lambda", 0.0);
    c.margins.min_margin = cs.number("min_margin", 0.0);
    (void)cs.get("peak_bound");
    if (!std::isfinite(c.zeta) || !std::isfinite(c.epsilon)) fail("[certificate] needs zeta and epsilon", 1, 1, file);
    cs.reject_unknown();

    const SectionReader vars(doc, "variables", true);
    c.P1 = vars.any_matrix("P1");
    c.P2 = vars.any_matrix("P2");
    if (c.mode == SynthesisMode::Corollary) {
        c.X1 = vars.any_matrix("X1");
        c.X2 = vars.any_matrix("X2");
        c.Y1 = vars.any_matrix("Y1");
        c.Y2 = vars.any_matrix("Y2");
    }
    c.G1 = vars.any_matrix("G1");
    c.G2 = vars.any_matrix("G2");
    c.CF = vars.any_matrix("CF");
    c.E3 = vars.any_matrix("E3");
    vars.reject_unknown();
    ff.certificate = std::move(c);
    return ff;
}

FilterFile load_filter_file(const std::string& path) {
    return parse_filter_file(read_text_file(path), path);
}

} // namespace descfilter
