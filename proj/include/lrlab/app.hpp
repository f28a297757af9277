#pragma once

#include "lrlab/evolution.hpp"
#include "lrlab/expansionals.hpp"
#include "lrlab/gibbs.hpp"
#include "lrlab/peps.hpp"
#include "lrlab/transfer.hpp"

#include <json.hpp>

#include <chrono>
#include <climits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace lrlab::app {

using json = nlohmann::ordered_json;

enum ExitCode { kExitPass = 0, kExitViolation = 1, kExitConfig = 2, kExitRuntime = 3 };

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"certify-bounds",    "scan-strip",  "expansionals",   "transfer-spectrum",
                                            "gibbs-decay",       "peps-factorize", "audit-all"};
    return c;
}

inline const std::string kFaultCorruptEtilde = "corrupt-etilde";

class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& msg) : Error(path + ": " + msg), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// ---------------------------------------------------------------------------------------------
// schema helpers

namespace detail {

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "not finite");
    return v;
}

inline long long as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
    return j.get<long long>();
}

inline void in_range(double v, double lo, double hi, const std::string& path) {
    if (v < lo || v > hi) {
        std::ostringstream s;
        s << "value " << v << " outside [" << lo << ", " << hi << "]";
        throw ConfigError(path, s.str());
    }
}

inline cplx as_complex(const json& j, const std::string& path) {
    if (j.is_number()) return {as_number(j, path), 0.0};
    if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected a number or an [re, im] pair");
    return {as_number(j[0], path + "[0]"), as_number(j[1], path + "[1]")};
}

// rows x cols, either nested rows or one flat row-major list
inline Mat as_matrix(const json& j, std::int64_t rows, std::int64_t cols, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array");
    Mat m(rows, cols);
    auto entry = [](const json& e) { return e.is_number() || (e.is_array() && e.size() == 2 && e[0].is_number()); };
    if (static_cast<std::int64_t>(j.size()) == rows * cols && (cols != 1 || j.empty() || entry(j[0]))) {
        for (std::int64_t i = 0; i < rows * cols; ++i)
            m(i / cols, i % cols) = as_complex(j[i], path + "[" + std::to_string(i) + "]");
        return m;
    }
    if (static_cast<std::int64_t>(j.size()) != rows)
        throw ConfigError(path, "expected " + std::to_string(rows) + " rows or " + std::to_string(rows * cols) +
                                    " row-major entries");
    for (std::int64_t i = 0; i < rows; ++i) {
        const std::string pi = path + "[" + std::to_string(i) + "]";
        if (!j[i].is_array() || static_cast<std::int64_t>(j[i].size()) != cols)
            throw ConfigError(pi, "expected " + std::to_string(cols) + " entries");
        for (std::int64_t c = 0; c < cols; ++c) m(i, c) = as_complex(j[i][c], pi + "[" + std::to_string(c) + "]");
    }
    return m;
}

class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string sub(const std::string& k) const { return path_ + "." + k; }
    bool present(const std::string& k) {
        if (!j_.contains(k)) return false;
        used_.insert(k);
        return true;
    }
    bool has(const std::string& k) { return present(k) && !j_.at(k).is_null(); }
    const json& at(const std::string& k) {
        if (!has(k)) throw ConfigError(sub(k), "missing");
        return j_.at(k);
    }

    double number(const std::string& k, std::optional<double> def, double lo = -kInf, double hi = kInf) {
        if (!has(k)) {
            if (!def) throw ConfigError(sub(k), "missing");
            return *def;
        }
        double v = as_number(j_.at(k), sub(k));
        in_range(v, lo, hi, sub(k));
        return v;
    }
    long long integer(const std::string& k, std::optional<long long> def, long long lo = LLONG_MIN,
                      long long hi = LLONG_MAX) {
        if (!has(k)) {
            if (!def) throw ConfigError(sub(k), "missing");
            return *def;
        }
        long long v = as_integer(j_.at(k), sub(k));
        in_range(static_cast<double>(v), static_cast<double>(lo), static_cast<double>(hi), sub(k));
        return v;
    }
    bool flag(const std::string& k, bool def) {
        if (!has(k)) return def;
        if (!j_.at(k).is_boolean()) throw ConfigError(sub(k), "expected true or false");
        return j_.at(k).get<bool>();
    }
    std::string text(const std::string& k, std::optional<std::string> def, const std::vector<std::string>& allowed) {
        std::string v;
        if (!has(k)) {
            if (!def) throw ConfigError(sub(k), "missing");
            v = *def;
        } else {
            if (!j_.at(k).is_string()) throw ConfigError(sub(k), "expected a string");
            v = j_.at(k).get<std::string>();
        }
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(sub(k), "'" + v + "' is not one of {" + list + "}");
        }
        return v;
    }
    std::vector<double> numbers(const std::string& k, std::vector<double> def, double lo = -kInf, double hi = kInf) {
        if (!has(k)) return def;
        const json& a = j_.at(k);
        if (!a.is_array() || a.empty()) throw ConfigError(sub(k), "expected a non-empty array");
        std::vector<double> out;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string p = sub(k) + "[" + std::to_string(i) + "]";
            out.push_back(as_number(a[i], p));
            in_range(out.back(), lo, hi, p);
        }
        return out;
    }
    std::vector<int> integers(const std::string& k, std::vector<int> def, int lo = INT_MIN, int hi = INT_MAX) {
        if (!has(k)) return def;
        const json& a = j_.at(k);
        if (!a.is_array() || a.empty()) throw ConfigError(sub(k), "expected a non-empty array");
        std::vector<int> out;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const std::string p = sub(k) + "[" + std::to_string(i) + "]";
            long long v = as_integer(a[i], p);
            in_range(static_cast<double>(v), lo, hi, p);
            out.push_back(static_cast<int>(v));
        }
        return out;
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k)) throw ConfigError(sub(k), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

}  // namespace detail

// ---------------------------------------------------------------------------------------------
// configuration

struct Caps {
    int max_sites = 12;  // longest dense chain frame
    int max_phys = peps::kMaxPhys;
    int max_bond = peps::kMaxBond;
};

struct Overrides {
    std::string command;  // from the command line; must agree with config.command when both are given
    std::optional<std::uint64_t> seed;
    std::optional<std::string> fault_inject;
};

struct ExperimentConfig {
    std::string command;
    std::uint64_t seed = 1;
    std::optional<std::string> output_dir;
    std::optional<std::string> fault_inject;
    Caps caps;
    json model;  // materialized
    json grids;  // materialized
    bool chain_model = true;
    InteractionSpec spec;
    std::optional<peps::TensorGrid> grid;
    std::string peps_family;

    bool fault() const { return fault_inject && *fault_inject == kFaultCorruptEtilde; }

    json resolved() const {
        json j;
        j["command"] = command;
        j["seed"] = seed;
        j["output_dir"] = output_dir ? json(*output_dir) : json(nullptr);
        j["fault_inject"] = fault_inject ? json(*fault_inject) : json(nullptr);
        j["caps"] = {{"max_sites", caps.max_sites}, {"max_phys", caps.max_phys}, {"max_bond", caps.max_bond}};
        j["model"] = model;
        j["grids"] = grids;
        return j;
    }
};

namespace detail {

inline const char* tail_name(TailKind t) {
    switch (t) {
        case TailKind::explicit_values: return "explicit";
        case TailKind::finite_range: return "finite_range";
        case TailKind::exponential: return "exponential";
    }
    return "explicit";
}

inline json spec_json(const InteractionSpec& spec) {
    json j;
    j["d"] = spec.d;
    j["tail_kind"] = tail_name(spec.tail);
    j["tail_range"] = spec.tail_range;
    j["tail_lambda"] = spec.tail_lambda;
    j["tail_prefactor"] = spec.tail_prefactor;
    json gen = json::array();
    for (const auto& t : spec.generator) {
        json m = json::array();
        for (Eigen::Index r = 0; r < t.matrix.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < t.matrix.cols(); ++c) row.push_back(complex_json(t.matrix(r, c)));
            m.push_back(row);
        }
        gen.push_back({{"offsets", t.offsets}, {"matrix", m}});
    }
    j["generator"] = gen;
    j["replication_range"] =
        spec.replication ? json::array({spec.replication->first, spec.replication->second}) : json(nullptr);
    return j;
}

inline InteractionSpec parse_generator_model(Fields& f) {
    InteractionSpec spec;
    spec.d = static_cast<int>(f.integer("d", 2, 2, 64));
    std::string tk = f.text("tail_kind", "explicit", {"explicit", "finite_range", "exponential"});
    spec.tail = tk == "finite_range" ? TailKind::finite_range
                : tk == "exponential" ? TailKind::exponential
                                      : TailKind::explicit_values;
    spec.tail_range = static_cast<int>(f.integer("tail_range", 0, 0, 1 << 20));
    spec.tail_lambda = f.number("tail_lambda", 0.0, 0.0);
    spec.tail_prefactor = f.number("tail_prefactor", 0.0, 0.0);
    const json& gen = f.at("generator");
    const std::string gp = f.sub("generator");
    if (!gen.is_array()) throw ConfigError(gp, "expected an array");
    for (std::size_t i = 0; i < gen.size(); ++i) {
        const std::string p = gp + "[" + std::to_string(i) + "]";
        Fields t(gen[i], p);
        std::vector<int> off = t.integers("offsets", {}, -4096, 4096);
        if (off.empty()) throw ConfigError(t.sub("offsets"), "missing");
        if (off.size() > 12) throw ConfigError(t.sub("offsets"), "term acts on too many sites");
        const auto dim = ipow(spec.d, static_cast<int>(off.size()));
        if (dim > 4096) throw ConfigError(t.sub("matrix"), "term dimension exceeds 4096");
        Mat m = as_matrix(t.at("matrix"), dim, dim, t.sub("matrix"));
        t.finish();
        spec.generator.push_back({off, m});
    }
    if (f.has("replication_range")) {
        const json& r = f.at("replication_range");
        if (!r.is_array() || r.size() != 2) throw ConfigError(f.sub("replication_range"), "expected [first, last]");
        int a = static_cast<int>(as_integer(r[0], f.sub("replication_range") + "[0]"));
        int b = static_cast<int>(as_integer(r[1], f.sub("replication_range") + "[1]"));
        if (b < a) throw ConfigError(f.sub("replication_range"), "last < first");
        spec.replication = std::make_pair(a, b);
    }
    try {
        normalize_generator(spec);
        validate_spec(spec);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(gp, e.what());
    }
    return spec;
}

inline peps::TensorGrid parse_tensors(const json& j, const std::string& path, const Caps& caps) {
    Fields f(j, path);
    const int d = static_cast<int>(f.integer("d", std::nullopt, 1, caps.max_phys));
    const int D = static_cast<int>(f.integer("D", std::nullopt, 1, caps.max_bond));
    const json& g = f.at("grid");
    const std::string gp = f.sub("grid");
    f.finish();
    if (!g.is_array() || g.empty()) throw ConfigError(gp, "expected an array of rows");
    peps::TensorGrid grid;
    grid.height = static_cast<int>(g.size());
    grid.width = -1;
    const auto cols = ipow(D, 4);
    for (std::size_t y = 0; y < g.size(); ++y) {
        const std::string py = gp + "[" + std::to_string(y) + "]";
        if (!g[y].is_array() || g[y].empty()) throw ConfigError(py, "expected a row of site tensors");
        if (grid.width < 0) grid.width = static_cast<int>(g[y].size());
        if (static_cast<int>(g[y].size()) != grid.width) throw ConfigError(py, "ragged grid");
        for (std::size_t x = 0; x < g[y].size(); ++x) {
            const std::string px = py + "[" + std::to_string(x) + "]";
            peps::SiteTensor t;
            t.d = d;
            t.D = D;
            t.data = as_matrix(g[y][x], d, cols, px);
            grid.sites.push_back(t);
        }
    }
    try {
        grid.validate();
    } catch (const Error& e) {
        throw ConfigError(gp, e.what());
    }
    return grid;
}

inline json load_json(const std::string& path, const std::string& field) {
    std::ifstream in(path);
    if (!in) throw ConfigError(field, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(field, std::string("parse error: ") + e.what());
    }
}

// frames of the chain commands against the site cap
inline void check_sites(const std::string& path, int n, const ExperimentConfig& c) {
    if (n > c.caps.max_sites)
        throw ConfigError(path, "frame of " + std::to_string(n) + " sites exceeds cap of " +
                                    std::to_string(c.caps.max_sites) + " sites at d = " + std::to_string(c.spec.d));
}

inline json s_list_json(const std::vector<cplx>& s) {
    json a = json::array();
    for (auto z : s) a.push_back(complex_json(z));
    return a;
}

// 8 real points on [-r, r] plus 4 conjugate pairs on the circle of radius r
inline std::vector<cplx> default_s_grid(double r) {
    std::vector<cplx> g;
    for (int i = 0; i < 8; ++i) g.emplace_back(-r + 2.0 * r * i / 7.0, 0.0);
    for (int i = 0; i < 4; ++i) {
        const double th = 2 * M_PI * (i + 0.5) / 8;
        cplx z = r * cplx(std::cos(th), std::sin(th));
        g.push_back(z);
        g.push_back(std::conj(z));
    }
    return g;
}

inline std::vector<int> range_list(int a, int b) {
    std::vector<int> v;
    for (int i = a; i <= b; ++i) v.push_back(i);
    return v;
}

}  // namespace detail

inline void parse_model(detail::Fields& top, ExperimentConfig& c, const std::string& base_dir,
                        std::optional<double>& model_lambda) {
    using detail::Fields;
    const json& m = top.at("model");
    Fields f(m, "config.model");
    int forms = 0;
    for (const char* k : {"preset", "generator", "peps", "tensors"}) forms += m.is_object() && m.contains(k);
    if (forms != 1) throw ConfigError("config.model", "expected exactly one of preset, generator, peps, tensors");
    json out;
    if (m.contains("preset")) {
        std::string p = f.text("preset", std::nullopt, {"tfim", "classical_ising", "zero", "field", "random"});
        out["preset"] = p;
        if (p == "tfim") {
            double J = f.number("J", 1.0), g = f.number("g", 1.0);
            c.spec = transverse_ising(J, g);
            out["J"] = J;
            out["g"] = g;
        } else if (p == "classical_ising") {
            double J = f.number("J", 1.0);
            c.spec = classical_ising(J);
            out["J"] = J;
        } else if (p == "zero") {
            c.spec = InteractionSpec{};
            c.spec.d = static_cast<int>(f.integer("d", 2, 2, 64));
            out["d"] = c.spec.d;
        } else if (p == "field") {
            double h = f.number("h", 1.0);
            c.spec = field_spec(h);
            out["h"] = h;
        } else {
            const double om0 = f.number("omega0", 0.25, 0.0);
            const double lam = f.number("lambda", 1.0, 1e-12);
            const int ms = static_cast<int>(f.integer("max_support", 4, 1, 12));
            const int d = static_cast<int>(f.integer("d", 2, 2, 16));
            const auto seed = static_cast<std::uint64_t>(f.integer("seed", static_cast<long long>(c.seed), 0));
            if (ipow(d, ms) > 4096) throw ConfigError(f.sub("max_support"), "term dimension exceeds 4096");
            std::vector<double> om;
            for (int n = 0; n < ms; ++n) om.push_back(om0 * std::exp(-lam * n));
            c.spec = sample_random_interaction(seed, d, make_profile(om), ms);
            model_lambda = lam;
            out["omega0"] = om0;
            out["lambda"] = lam;
            out["max_support"] = ms;
            out["d"] = d;
            out["seed"] = seed;
        }
        c.chain_model = true;
    } else if (m.contains("generator")) {
        c.spec = detail::parse_generator_model(f);
        out = detail::spec_json(c.spec);
        c.chain_model = true;
    } else if (m.contains("peps")) {
        Fields pf(f.at("peps"), "config.model.peps");
        c.peps_family = pf.text("family", "product", {"product", "isometric", "random", "ghz"});
        const auto seed = static_cast<std::uint64_t>(pf.integer("seed", static_cast<long long>(c.seed), 0));
        json po{{"family", c.peps_family}, {"seed", seed}};
        if (c.peps_family == "random") {
            const int d = static_cast<int>(pf.integer("d", 4, 1, peps::kMaxPhys));
            const int D = static_cast<int>(pf.integer("D", 2, 1, peps::kMaxBond));
            const bool cx = pf.flag("complex", false);
            po["d"] = d;
            po["D"] = D;
            po["complex"] = cx;
            c.grid = peps::random_grid(4, 2, d, D, seed, cx);
        } else if (c.peps_family == "ghz") {
            c.grid = peps::ghz_grid(4, 2);
        } else {
            auto geo = peps::minimal_abc();
            c.grid = peps::product_grid(4, 2, {geo.abc, geo.ab, geo.bc, geo.b}, seed, c.peps_family == "isometric");
        }
        pf.finish();
        out["peps"] = po;
        c.chain_model = false;
    } else {
        const json& t = f.at("tensors");
        if (t.is_string()) {
            std::filesystem::path p(t.get<std::string>());
            if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
            c.grid = detail::parse_tensors(detail::load_json(p.string(), "config.model.tensors"),
                                           "config.model.tensors", c.caps);
            out["tensors"] = t;
        } else {
            c.grid = detail::parse_tensors(t, "config.model.tensors", c.caps);
            out["tensors"] = t;
        }
        c.peps_family = "tensors";
        c.chain_model = false;
    }
    f.finish();
    c.model = out;
}

inline void parse_grids(detail::Fields& top, ExperimentConfig& c, std::optional<double> model_lambda) {
    using detail::Fields;
    static const json empty = json::object();
    const json& gj = top.has("grids") ? top.at("grids") : empty;
    Fields g(gj, "config.grids");
    json out;
    const int d = c.spec.d;
    const std::string& cmd = c.command;
    const bool chain_cmd = cmd != "peps-factorize";
    if (chain_cmd && !c.chain_model) throw ConfigError("config.model", cmd + " needs a chain model");
    if (!chain_cmd && c.chain_model) throw ConfigError("config.model", cmd + " needs a peps or tensors model");

    auto lambda_field = [&](bool required) -> std::optional<double> {
        std::optional<double> lam = model_lambda ? model_lambda : std::optional<double>(1.0);
        if (g.present("lambda")) {
            if (gj.at("lambda").is_null()) lam.reset();
            else lam = g.number("lambda", std::nullopt, 1e-12);
        }
        if (required && !lam) throw ConfigError(g.sub("lambda"), "required by " + cmd);
        out["lambda"] = lam ? json(*lam) : json(nullptr);
        return lam;
    };
    auto observable_field = [&](const std::string& key, const std::string& def, int J) {
        std::string o = g.text(key, def, {"random", "X", "Y", "Z"});
        if (o != "random" && (d != 2 || J != 1))
            throw ConfigError(g.sub(key), "Pauli observables need d = 2 and a single-site support");
        out[key] = o;
    };

    if (cmd == "certify-bounds" || cmd == "scan-strip") {
        const int J = static_cast<int>(g.integer("support", 2, 1, 12));
        int defN = std::min(10, c.caps.max_sites);
        if ((defN - J) % 2) --defN;
        const int N = static_cast<int>(g.integer("N", defN, 1, 1 << 20));
        detail::check_sites(g.sub("N"), N, c);
        if (N < J || (N - J) % 2) throw ConfigError(g.sub("N"), "N - support must be even and >= 0");
        const int L = (N - J) / 2;
        out["N"] = N;
        out["support"] = J;
        if (cmd == "certify-bounds") {
            out["ells"] = g.integers("ells", detail::range_list(0, std::max(0, L - 1)), 0, L);
            std::vector<cplx> s;
            if (g.has("s")) {
                const json& a = g.at("s");
                if (!a.is_array() || a.empty()) throw ConfigError(g.sub("s"), "expected a non-empty array");
                for (std::size_t i = 0; i < a.size(); ++i)
                    s.push_back(detail::as_complex(a[i], g.sub("s") + "[" + std::to_string(i) + "]"));
            } else {
                s = detail::default_s_grid(0.9);
            }
            out["s"] = detail::s_list_json(s);
            lambda_field(false);
            out["surface"] = g.flag("surface", true);
        } else {
            if (L < 1) throw ConfigError(g.sub("N"), "scan-strip needs L = (N - support) / 2 >= 1");
            out["ells"] = g.integers("ells", detail::range_list(1, L), 1, L);
            out["s_re"] = g.numbers("s_re", {0.0, 0.5, 1.0, 2.0});
            out["s_im"] = g.numbers("s_im", {0.0, 0.25, 0.5, 0.75});
            lambda_field(true);
        }
        observable_field("observable", "random", J);
        out["norm_tol"] = g.number("norm_tol", 1e-10, 1e-15, 1e-3);
    } else if (cmd == "expansionals") {
        out["beta"] = g.numbers("beta", {0.25, 0.5, 1.0}, 1e-12);
        auto p = g.integers("p", {0, 1, 2}, 0, 64);
        auto q = g.integers("q", {1, 2, 3}, 0, 64);
        for (std::size_t i = 0; i < q.size(); ++i)
            detail::check_sites(g.sub("q") + "[" + std::to_string(i) + "]", 2 * (q[i] + 1), c);
        auto n = g.integers("n", {1, 2}, 1, 64);
        auto a = g.integers("a", {4, 6, 8}, 2, 1 << 20);
        for (std::size_t i = 0; i < a.size(); ++i)
            detail::check_sites(g.sub("a") + "[" + std::to_string(i) + "]", a[i], c);
        out["p"] = p;
        out["q"] = q;
        out["n"] = n;
        out["a"] = a;
        out["ode_step"] = g.number("ode_step", 1e-3, 1e-6, 0.1);
        out["ode_max_sites"] = g.integer("ode_max_sites", std::min(4, c.caps.max_sites), 1, c.caps.max_sites);
    } else if (cmd == "transfer-spectrum") {
        const int a = static_cast<int>(g.integer("a", std::min(8, c.caps.max_sites), 3, 1 << 20));
        detail::check_sites(g.sub("a"), a, c);
        auto n = g.integers("n", {1, 2}, 1, a - 2);
        auto ell = g.integers("ell", {1, 2}, 1, a - 2);
        out["a"] = a;
        out["n"] = n;
        out["ell"] = ell;
        out["samples"] = g.integer("samples", 3, 0, 1000);
        out["x"] = g.number("x", 1.5, 1.0);
        const int wa = static_cast<int>(g.integer("window_a", std::min(7, c.caps.max_sites), 2, 1 << 20));
        detail::check_sites(g.sub("window_a"), wa, c);
        out["window_a"] = wa;
        out["window_m"] = g.integer("window_m", std::min(3, wa - 1), 1, std::min(wa - 1, 6));
        out["tol"] = g.number("tol", 1e-12, 1e-15, 1e-2);
        out["max_iter"] = g.integer("max_iter", 500, 1, 100000);
        out["mu_nmax"] = g.integer("mu_nmax", std::min(4, c.caps.max_sites), 1, c.caps.max_sites);
    } else if (cmd == "gibbs-decay") {
        out["beta"] = g.numbers("beta", {1.0}, 0.0);
        const int N = static_cast<int>(g.integer("N", std::min(12, c.caps.max_sites), 2, 1 << 20));
        detail::check_sites(g.sub("N"), N, c);
        out["N"] = N;
        out["k"] = g.integers("k", detail::range_list(1, std::min(6, N - 1)), 0, 1 << 20);
        observable_field("observable", d == 2 ? "Z" : "random", 1);
        out["fit_min_points"] = g.integer("fit_min_points", 3, 2, 1000);
    } else if (cmd == "peps-factorize") {
        std::vector<int> pr = g.integers("parent_rect", {2, 2}, 1, 4);
        if (pr.size() != 2 || pr[0] > c.grid->width || pr[1] > c.grid->height)
            throw ConfigError(g.sub("parent_rect"), "expected [w, h] inside the tensor grid");
        if (ipow(c.grid->d(), pr[0] * pr[1]) > peps::kMaxParentDim)
            throw ConfigError(g.sub("parent_rect"), "physical dimension exceeds " + std::to_string(peps::kMaxParentDim));
        if (c.grid->width != 4 || c.grid->height != 2)
            throw ConfigError("config.model.tensors.grid", "peps-factorize needs a 2 x 4 grid (2 rows of 4 tensors)");
        out["parent_rect"] = pr;
    } else if (cmd == "audit-all") {
        detail::check_sites("config.grids", 6, c);
    }
    g.finish();
    c.grids = out.is_null() ? json::object() : out;
}

// Schema check of a parsed config; every default is written back into the record.
inline ExperimentConfig validate_config(const json& root, const Overrides& ov = {}, const std::string& base_dir = "") {
    using detail::Fields;
    ExperimentConfig c;
    Fields top(root, "config");
    if (top.has("command")) {
        c.command = top.text("command", std::nullopt, commands());
        if (!ov.command.empty() && ov.command != c.command)
            throw ConfigError("config.command", "'" + c.command + "' disagrees with command line '" + ov.command + "'");
    } else {
        if (ov.command.empty()) throw ConfigError("config.command", "missing");
        c.command = ov.command;
        if (std::find(commands().begin(), commands().end(), c.command) == commands().end())
            throw ConfigError("command", "unknown command '" + c.command + "'");
    }
    c.seed = static_cast<std::uint64_t>(top.integer("seed", 1, 0));
    if (ov.seed) c.seed = *ov.seed;
    if (top.has("output_dir")) {
        if (!top.at("output_dir").is_string()) throw ConfigError("config.output_dir", "expected a string");
        c.output_dir = top.at("output_dir").get<std::string>();
    }
    if (top.has("fault_inject")) c.fault_inject = top.text("fault_inject", std::nullopt, {kFaultCorruptEtilde});
    if (ov.fault_inject) {
        if (*ov.fault_inject != kFaultCorruptEtilde)
            throw ConfigError("--fault-inject", "unknown fault '" + *ov.fault_inject + "'");
        c.fault_inject = ov.fault_inject;
    }

    // caps first: tensor models are checked against them while parsing
    static const json empty = json::object();
    const json& cj = top.has("caps") ? top.at("caps") : empty;
    Fields cf(cj, "config.caps");
    const int model_d = root.contains("model") && root["model"].is_object() && root["model"].contains("d") &&
                                root["model"]["d"].is_number_integer()
                            ? root["model"]["d"].get<int>()
                            : 2;
    const int hard = max_sites(std::max(2, model_d));
    c.caps.max_sites = static_cast<int>(cf.integer("max_sites", hard, 1));
    if (c.caps.max_sites > hard)
        throw ConfigError("config.caps.max_sites", std::to_string(c.caps.max_sites) + " exceeds hard limit of " +
                                                       std::to_string(hard) + " sites at d = " +
                                                       std::to_string(std::max(2, model_d)));
    c.caps.max_phys = static_cast<int>(cf.integer("max_phys", peps::kMaxPhys, 1, peps::kMaxPhys));
    c.caps.max_bond = static_cast<int>(cf.integer("max_bond", peps::kMaxBond, 1, peps::kMaxBond));
    cf.finish();

    std::optional<double> model_lambda;
    parse_model(top, c, base_dir, model_lambda);
    if (c.chain_model && max_sites(c.spec.d) < c.caps.max_sites) c.caps.max_sites = max_sites(c.spec.d);
    if (c.chain_model && c.model.contains("max_support"))
        detail::check_sites("config.model.max_support", c.model["max_support"].get<int>(), c);
    if (!c.chain_model && (c.grid->d() > c.caps.max_phys || c.grid->D() > c.caps.max_bond))
        throw ConfigError("config.model", "tensor dimensions exceed config.caps");
    parse_grids(top, c, model_lambda);
    top.finish();
    return c;
}

inline ExperimentConfig validate_config(const std::string& path, const Overrides& ov = {}) {
    if (!std::filesystem::exists(path)) throw ConfigError("--config", "file '" + path + "' does not exist");
    json root = detail::load_json(path, "config");
    return validate_config(root, ov, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------------------------
// result tables

using Cell = std::variant<std::monostate, long long, double, std::string>;

enum class Status { pass, fail, reported };

struct Row {
    std::vector<Cell> key;
    std::vector<Cell> values;
    Status status = Status::reported;
    double margin = 0.0;  // rhs - lhs for certified rows
    std::string note;
};

struct Table {
    std::vector<std::string> key_cols, value_cols;
    std::vector<Row> rows;
    json extras = json::object();
    std::string plot_x;
    std::vector<std::string> plot_y;
    bool plot_logy = true;

    // lhs <= rhs + slack; values are the two sides unless given
    void check(std::vector<Cell> key, double lhs, double rhs, double slack = kSlack, std::string note = "",
               std::vector<Cell> values = {}) {
        Row r;
        r.key = std::move(key);
        r.values = values.empty() ? std::vector<Cell>{lhs, rhs} : std::move(values);
        r.status = lhs <= rhs + slack ? Status::pass : Status::fail;
        r.margin = std::isinf(rhs) && rhs > 0 ? kInf : rhs - lhs;
        r.note = std::move(note);
        rows.push_back(std::move(r));
    }
    void report(std::vector<Cell> key, std::vector<Cell> values, std::string note = "") {
        Row r;
        r.key = std::move(key);
        r.values = std::move(values);
        r.note = std::move(note);
        rows.push_back(std::move(r));
    }
    int count(Status s) const {
        int n = 0;
        for (const auto& r : rows) n += r.status == s;
        return n;
    }
};

inline Cell cell(int v) { return static_cast<long long>(v); }
inline Cell cell(double v) { return v; }
inline Cell cell(const std::string& v) { return v; }
inline Cell cell(const char* v) { return std::string(v); }
inline Cell none() { return std::monostate{}; }

namespace detail {

inline std::string fmt_double(double v, const std::string& column) {
    if (std::isnan(v)) throw Error("emit_report: NaN in column " + column);
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_text(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"') o += '"';
        o += ch;
    }
    return o + "\"";
}

inline std::string fmt_cell(const Cell& c, const std::string& column) {
    if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
    if (std::holds_alternative<double>(c)) return fmt_double(std::get<double>(c), column);
    if (std::holds_alternative<std::string>(c)) return csv_text(std::get<std::string>(c));
    return "";
}

inline json jnum(double v) {
    if (std::isnan(v)) throw Error("emit_report: NaN in summary");
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline std::string status_name(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::reported: return "reported";
    }
    return "reported";
}

}  // namespace detail

inline std::string csv_string(Table t) {
    std::stable_sort(t.rows.begin(), t.rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    std::ostringstream o;
    std::vector<std::string> head = t.key_cols;
    head.insert(head.end(), t.value_cols.begin(), t.value_cols.end());
    for (const char* c : {"margin", "status", "note"}) head.push_back(c);
    for (std::size_t i = 0; i < head.size(); ++i) o << (i ? "," : "") << head[i];
    o << "\n";
    for (const auto& r : t.rows) {
        if (r.key.size() != t.key_cols.size() || r.values.size() != t.value_cols.size())
            throw Error("emit_report: row width does not match the header");
        std::vector<std::string> f;
        for (std::size_t i = 0; i < r.key.size(); ++i) f.push_back(detail::fmt_cell(r.key[i], t.key_cols[i]));
        for (std::size_t i = 0; i < r.values.size(); ++i) f.push_back(detail::fmt_cell(r.values[i], t.value_cols[i]));
        f.push_back(r.status == Status::reported ? "" : detail::fmt_double(r.margin, "margin"));
        f.push_back(detail::status_name(r.status));
        f.push_back(detail::csv_text(r.note));
        for (std::size_t i = 0; i < f.size(); ++i) o << (i ? "," : "") << f[i];
        o << "\n";
    }
    return o.str();
}

inline json summary_json(const Table& t, const ExperimentConfig& c, double runtime) {
    json s;
    s["command"] = c.command;
    s["pass_count"] = t.count(Status::pass);
    s["fail_count"] = t.count(Status::fail);
    s["reported_count"] = t.count(Status::reported);
    std::optional<double> worst;
    for (const auto& r : t.rows)
        if (r.status != Status::reported) worst = worst ? std::min(*worst, r.margin) : r.margin;
    s["worst_margin"] = worst ? detail::jnum(*worst) : json(nullptr);
    s["runtime"] = runtime;
    s["exit_code"] = t.count(Status::fail) ? kExitViolation : kExitPass;
    s["config"] = c.resolved();
    s["extras"] = t.extras;
    return s;
}

inline std::string plot_script(const Table& t, const std::string& csv_name, const std::string& title) {
    std::ostringstream o;
    o << "# gnuplot script for " << csv_name << "\n";
    o << "set datafile separator ','\n";
    o << "set datafile columnheaders\n";
    o << "set title '" << title << "'\n";
    o << "set xlabel '" << (t.plot_x.empty() ? "row" : t.plot_x) << "'\n";
    if (t.plot_logy) o << "set logscale y\n";
    o << "set key outside\n";
    o << "plot";
    const std::string x = t.plot_x.empty() ? "0" : "(column('" + t.plot_x + "'))";
    for (std::size_t i = 0; i < t.plot_y.size(); ++i) {
        o << (i ? ", \\\n    " : " ") << "'" << csv_name << "' using " << x << ":(column('" << t.plot_y[i]
          << "')) with points title '" << t.plot_y[i] << "'";
    }
    if (t.plot_y.empty()) o << " '" << csv_name << "' using 0:(column('margin')) with points title 'margin'";
    o << "\n";
    return o.str();
}

struct ReportFiles {
    std::filesystem::path csv, summary, plot;
};

// results.csv, summary.json and plot.gp in dir
inline ReportFiles emit_report(const Table& t, const ExperimentConfig& c, const std::filesystem::path& dir,
                               double runtime) {
    std::string csv = csv_string(t);
    std::string sum = summary_json(t, c, runtime).dump(2) + "\n";
    std::string gp = plot_script(t, "results.csv", c.command);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("emit_report: cannot create '" + dir.string() + "': " + ec.message());
    ReportFiles f{dir / "results.csv", dir / "summary.json", dir / "plot.gp"};
    auto put = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("emit_report: cannot write '" + p.string() + "'");
        out << text;
        if (!out.flush()) throw Error("emit_report: write failed for '" + p.string() + "'");
    };
    put(f.csv, csv);
    put(f.summary, sum);
    put(f.plot, gp);
    return f;
}

// ---------------------------------------------------------------------------------------------
// commands

namespace detail {

template <class F>
auto with_context(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(what + ": " + e.what());
    }
}

inline LocalOperator make_observable(const ExperimentConfig& c, const std::string& kind, int J, std::uint64_t stream) {
    const int d = c.spec.d;
    if (kind != "random") return LocalOperator::on(pauli(kind[0]), d, 1);
    CounterRng rng(c.seed, stream);
    Mat m = random_hermitian(rng, ipow(d, J));
    m /= spectral_norm(m);
    return LocalOperator::on(m, d, 1);
}

inline std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::vector<double> gvec(const json& j) { return j.get<std::vector<double>>(); }
inline std::vector<int> ivec(const json& j) { return j.get<std::vector<int>>(); }

inline std::vector<cplx> s_from_json(const json& j) {
    std::vector<cplx> s;
    for (const auto& z : j) s.emplace_back(z[0].get<double>(), z[1].get<double>());
    return s;
}

}  // namespace detail

inline Table run_certify_bounds(const ExperimentConfig& c) {
    const json& g = c.grids;
    const int N = g["N"], J = g["support"], L = (N - J) / 2;
    Table t;
    t.key_cols = {"s_re", "s_im", "ell", "L", "family"};
    t.value_cols = {"empirical_norm", "bound"};
    t.plot_x = "ell";
    t.plot_y = {"empirical_norm", "bound"};
    LocalOperator A = detail::make_observable(c, g["observable"], J, 0xA);
    CertificateOptions opt;
    if (!g["lambda"].is_null()) opt.lambda = g["lambda"].get<double>();
    opt.surface = g["surface"];
    opt.norm_tol = g["norm_tol"];
    auto certs = detail::with_context("certify-bounds (N = " + std::to_string(N) + ")", [&] {
        return locality_certificate(c.spec, A, detail::s_from_json(g["s"]), detail::ivec(g["ells"]), L, opt);
    });
    for (const auto& ct : certs) {
        const auto& p = ct.params;
        t.check({p.s.real(), p.s.imag(), cell(p.ell), cell(L), ct.label}, *ct.empirical, ct.theoretical);
    }
    t.extras["operator_norm_A"] = operator_norm(A);
    return t;
}

inline Table run_scan_strip(const ExperimentConfig& c) {
    const json& g = c.grids;
    const int N = g["N"], J = g["support"], L = (N - J) / 2;
    Table t;
    t.key_cols = {"s_re", "s_im", "ell", "L", "family"};
    t.value_cols = {"empirical_norm", "bound"};
    t.plot_x = "s_im";
    t.plot_y = {"empirical_norm", "bound"};
    LocalOperator A = detail::make_observable(c, g["observable"], J, 0xA);
    CertificateOptions opt;
    opt.lambda = g["lambda"].get<double>();
    opt.surface = false;
    opt.norm_tol = g["norm_tol"];
    std::vector<cplx> s;
    for (double re : detail::gvec(g["s_re"]))
        for (double im : detail::gvec(g["s_im"])) s.emplace_back(re, im);
    auto certs = detail::with_context("scan-strip", [&] {
        return locality_certificate(c.spec, A, s, detail::ivec(g["ells"]), L, opt);
    });
    for (const auto& ct : certs) {
        if (ct.label != "strip" && ct.label != "strip_proof") continue;
        const auto& p = ct.params;
        t.check({p.s.real(), p.s.imag(), cell(p.ell), cell(L), ct.label}, *ct.empirical, ct.theoretical);
    }
    const double om0 = build_profile(c.spec, 64).omega0();
    t.extras["strip_half_width"] = detail::jnum(om0 > 0 ? *opt.lambda / (4.0 * om0) : kInf);
    return t;
}

inline Table run_expansionals(const ExperimentConfig& c) {
    const json& g = c.grids;
    Table t;
    t.key_cols = {"check", "beta", "p", "q", "n", "a"};
    t.value_cols = {"lhs", "rhs"};
    t.plot_x = "beta";
    t.plot_y = {"lhs", "rhs"};
    const int ode_max = g["ode_max_sites"];
    const double step = g["ode_step"];
    for (double beta : detail::gvec(g["beta"])) {
        const std::string bs = "beta = " + detail::fmt_short(beta);
        for (int p : detail::ivec(g["p"]))
            for (int q : detail::ivec(g["q"])) {
                if (p > q) continue;
                auto audit = detail::with_context("expansionals (" + bs + ", p = " + std::to_string(p) +
                                                      ", q = " + std::to_string(q) + ")",
                                                  [&] { return expansional_bound_audit(c.spec, beta, p, q); });
                for (const auto& ct : audit.certs)
                    t.check({ct.label, beta, cell(p), cell(q), none(), none()}, ct.empirical.value_or(0.0),
                            ct.theoretical);
            }
        for (int n : detail::ivec(g["n"]))
            for (int a : detail::ivec(g["a"])) {
                if (n >= a) continue;
                const std::string ctx =
                    "expansionals (" + bs + ", n = " + std::to_string(n) + ", a = " + std::to_string(a) + ")";
                auto w = detail::with_context(ctx, [&] { return window_expansionals(c.spec, n, a, beta, false); });
                t.check({"window_etilde", beta, none(), none(), cell(n), cell(a)}, w.residual_tilde, 1e-10, 0.0);
                t.check({"window_e", beta, none(), none(), cell(n), cell(a)}, w.residual_E, 1e-10, 0.0);
                // H = H_[1,n] + H_[n+1,a], U = crossing terms, all scaled by beta
                InteractionSpec sp = scale_spec(c.spec, beta);
                LocalOperator h = LocalOperator::identity(c.spec.d, 1, a), u = h;
                h.matrix = frame_hamiltonian(sp, 1, n, 1, a) + frame_hamiltonian(sp, n + 1, a, 1, a);
                u.matrix = assemble_hamiltonian(sp, 1, a).matrix - h.matrix;
                auto pair = detail::with_context(ctx, [&] { return expansional_closed(h, u); });
                const auto D = h.matrix.rows();
                t.check({"pair_inverse", beta, none(), none(), cell(n), cell(a)},
                        spectral_norm(pair.left * pair.right - Mat::Identity(D, D)), 1e-10, 0.0);
                Mat ehu = hermitian_exp(h.matrix + u.matrix, -1.0), eh = hermitian_exp(h.matrix, -1.0);
                const double scale = std::max(1.0, spectral_norm(ehu));
                t.check({"pair_right_factor", beta, none(), none(), cell(n), cell(a)},
                        spectral_norm(ehu - pair.right * eh) / scale, 1e-10, 0.0, "relative to |e^{-(H+U)}|");
                if (a <= ode_max) {
                    auto f = detail::with_context(ctx, [&] { return expansional_ode(h, u, step); });
                    t.check({"ode_vs_closed", beta, none(), none(), cell(n), cell(a)},
                            spectral_norm(f.matrix - pair.left), 1e-8, 0.0, "step=" + detail::fmt_short(step));
                }
            }
    }
    return t;
}

inline Table run_transfer_spectrum(const ExperimentConfig& c) {
    const json& g = c.grids;
    Table t;
    t.key_cols = {"check", "n", "ell", "a", "sample"};
    t.value_cols = {"lhs", "rhs"};
    t.plot_x = "n";
    t.plot_y = {"lhs", "rhs"};
    const int a = g["a"], samples = g["samples"];
    FaultInjection fault;
    fault.corrupt_etilde = c.fault();
    fault.seed = c.seed;
    const int d = c.spec.d;
    for (int n : detail::ivec(g["n"])) {
        for (int ell : detail::ivec(g["ell"])) {
            if (n + ell >= a) continue;
            TransferAuditParams p;
            p.n = n;
            p.ell = ell;
            p.a = a;
            p.samples = samples;
            p.seed = c.seed;
            p.x = g["x"];
            p.fault = fault;
            auto rows = detail::with_context(
                "transfer-spectrum (n = " + std::to_string(n) + ", ell = " + std::to_string(ell) + ")",
                [&] { return transfer_audit(c.spec, p); });
            for (const auto& r : rows) {
                std::vector<Cell> key{r.check, cell(r.n), cell(r.ell), cell(a), cell(r.sample)};
                if (std::isinf(r.rhs) && r.note == "reported") t.report(key, {r.lhs, r.rhs}, r.note);
                else t.check(key, r.lhs, r.rhs, r.slack, r.note);
            }
        }
        // Gibbs identity and semigroup law on Hermitian Q over [1, 2]
        for (int s = 0; s < samples; ++s) {
            CounterRng rng(c.seed, 2000 + s);
            LocalOperator q = LocalOperator::on(random_hermitian(rng, ipow(d, 2)), d, 1);
            const std::string ctx = "transfer-spectrum (n = " + std::to_string(n) + ", sample " + std::to_string(s) + ")";
            auto gi = detail::with_context(ctx, [&] { return gibbs_identity(c.spec, n, a, q, &fault); });
            t.check({"gibbs_identity_expectation", cell(n), none(), cell(a), cell(s)}, gi.residual, 1e-10, 0.0);
            t.check({"gibbs_identity_trace", cell(n), none(), cell(a), cell(s)}, gi.trace_residual, 1e-10, 0.0,
                    "trace_convention=normalized");
            if (a - n >= 2) {
                double r = detail::with_context(ctx, [&] { return semigroup_residual(c.spec, n, a - n, q); });
                t.check({"semigroup", cell(n), none(), cell(a - n), cell(s)}, r, 1e-10, 0.0);
            }
        }
    }
    // fixed point of the one-site window
    const int wa = g["window_a"], wm = g["window_m"];
    auto w = detail::with_context("transfer-spectrum (window)", [&] { return build_window(c.spec, 1, wa, wm, &fault); });
    auto rep = detail::with_context("transfer-spectrum (fixed point)",
                                    [&] { return fixed_point_solve(w, g["tol"].get<double>(), g["max_iter"].get<int>()); });
    std::vector<Cell> wk{none(), cell(1), none(), cell(wa), none()};
    auto key = [&](const char* name) {
        auto k = wk;
        k[0] = std::string(name);
        return k;
    };
    const std::string conv = rep.converged ? "converged" : "not converged";
    t.check(key("fixed_point_nu"), rep.eigen_nu, 1e-8, 0.0, conv + ";iterations=" + std::to_string(rep.iterations));
    t.check(key("fixed_point_h"), rep.eigen_h, 1e-8, 0.0, conv);
    t.report(key("mu"), {rep.mu, none()}, "window_m=" + std::to_string(wm));
    auto hs = h_sandwich(c.spec, rep);
    t.check(key("h_sandwich_lower"), hs.lower, hs.min_eig, 1e-8);
    t.check(key("h_sandwich_upper"), hs.max_eig, hs.upper, 1e-8);
    for (const auto& b : mu_bracket(c.spec, rep.mu, g["mu_nmax"].get<int>())) {
        const bool norm = b.pass_normalized() || !b.pass_unnormalized();
        const double tr = norm ? b.tr_normalized : b.tr_unnormalized;
        const double lo = tr / (b.G * b.G), hi = tr * b.G * b.G;
        Row r;
        r.key = {std::string("mu_bracket"), cell(b.n), none(), cell(wa), none()};
        r.values = {b.mu_n, tr};
        r.status = b.pass() ? Status::pass : Status::fail;
        r.margin = std::min(b.mu_n - lo, hi - b.mu_n);
        r.note = "trace_convention=" + b.convention();
        t.rows.push_back(r);
    }
    if (rep.converged) {
        std::vector<Mat> qs;
        for (int s = 0; s < std::max(1, samples); ++s) {
            CounterRng rng(c.seed, 3000 + s);
            qs.push_back(random_hermitian(rng, w.dim()));
        }
        auto rate = detail::with_context("transfer-spectrum (rate)", [&] { return convergence_rate(w, rep, qs, 12); });
        t.report(key("spectral_ratio"), {rate.spectral_ratio, none()}, "|lambda_2|/|lambda_1|");
        t.extras["spectral_delta"] = detail::jnum(rate.spectral_delta);
        t.extras["pooled_delta"] = rate.pooled_fitted ? detail::jnum(rate.pooled_delta) : json(nullptr);
    }
    t.extras["mu"] = rep.mu;
    t.extras["fault_inject"] = c.fault() ? json(kFaultCorruptEtilde) : json(nullptr);
    return t;
}

inline Table run_gibbs_decay(const ExperimentConfig& c) {
    const json& g = c.grids;
    Table t;
    t.key_cols = {"beta", "check", "k"};
    t.value_cols = {"correlation_re", "correlation_im", "abs_correlation", "bound", "fit_delta", "fit_C", "fit_r2"};
    t.plot_x = "k";
    t.plot_y = {"abs_correlation"};
    const int N = g["N"];
    LocalOperator q = detail::make_observable(c, g["observable"], 1, 0xC);
    const double bound = 2.0 * operator_norm(q) * operator_norm(q);
    json fits = json::array();
    for (double beta : detail::gvec(g["beta"])) {
        auto pts = detail::with_context("gibbs-decay (beta = " + detail::fmt_short(beta) + ")", [&] {
            return correlation_profile(c.spec, 1, N, beta, q, q, detail::ivec(g["k"]));
        });
        std::vector<double> ks, vs;
        for (const auto& p : pts) {
            if (p.skipped) {
                t.report({beta, std::string("correlation"), cell(p.k)}, {none(), none(), none(), bound, none(), none(), none()},
                         "outside frame");
                continue;
            }
            const double v = std::abs(p.value);
            t.check({beta, std::string("correlation"), cell(p.k)}, v, bound, kSlack, "",
                    {p.value.real(), p.value.imag(), v, bound, none(), none(), none()});
            if (p.k >= 1) {
                ks.push_back(p.k);
                vs.push_back(v);
            }
        }
        json fj{{"beta", beta}};
        try {
            auto f = decay_fit(ks, vs, g["fit_min_points"].get<int>());
            if (f.ok())
                t.report({beta, std::string("decay_fit"), none()}, {none(), none(), none(), none(), f.delta, f.C, f.r2},
                         "points=" + std::to_string(f.points_used) + ";excluded=" + std::to_string(f.excluded));
            else
                t.report({beta, std::string("decay_fit"), none()}, {none(), none(), none(), none(), none(), none(), none()},
                         "degenerate");
            fj["delta"] = f.ok() ? json(f.delta) : json(nullptr);
            fj["C"] = f.ok() ? json(f.C) : json(nullptr);
            fj["r2"] = f.ok() ? json(f.r2) : json(nullptr);
            fj["degenerate"] = f.degenerate;
        } catch (const Error& e) {
            t.report({beta, std::string("decay_fit"), none()}, {none(), none(), none(), none(), none(), none(), none()},
                     e.what());
            fj["error"] = e.what();
        }
        fits.push_back(fj);
    }
    t.extras["fits"] = fits;
    return t;
}

inline Table run_peps_factorize(const ExperimentConfig& c) {
    const json& g = c.grids;
    Table t;
    t.key_cols = {"region", "check"};
    t.value_cols = {"value", "threshold"};
    t.plot_y = {"value"};
    const auto& grid = *c.grid;
    const bool exact = c.peps_family == "product" || c.peps_family == "isometric";
    auto geo = peps::minimal_abc();
    try {
        auto rep = peps::factorization_residuals(grid, geo);
        for (const auto& r : rep.regions) {
            const std::string nm = r.name;
            if (exact) t.check({nm, std::string("factorization_residual")}, r.residual, 1e-10, 0.0);
            else t.report({nm, std::string("factorization_residual")}, {r.residual, none()}, "ell=1");
            t.check({nm, std::string("reconstruction_error")}, r.reconstruction_error, 1e-10, 0.0, "frobenius");
            t.check({nm, std::string("cond_sigma")}, r.cond_sigma, 1e12, 0.0);
            t.report({nm, std::string("cond_rho")}, {r.cond_rho, none()});
            t.report({nm, std::string("slots")}, {static_cast<double>(r.slots), none()});
        }
    } catch (const Error& e) {
        Row r;
        r.key = {std::string("ABC"), std::string("factorization_residual")};
        r.values = {none(), none()};
        r.status = Status::fail;
        r.margin = -kInf;
        r.note = e.what();
        t.rows.push_back(r);
    }
    if (c.peps_family == "isometric") {
        auto bh = peps::boundary_hamiltonian(grid, geo.abc);
        t.check({std::string("ABC"), std::string("norm_G")}, bh.G.norm(), 1e-10, 0.0, "frobenius");
    }
    const std::vector<int> pr = g["parent_rect"];
    peps::Rect rect{0, 0, pr[0], pr[1]};
    const std::string rn = rect.label();
    auto pg = detail::with_context("peps-factorize (parent " + rn + ")", [&] { return peps::parent_gap(grid, rect); });
    t.check({rn, std::string("ground_energy")}, std::abs(pg.ground_energy), 1e-10, 0.0);
    t.check({rn, std::string("frustration")}, pg.frustration, 1e-10, 0.0);
    const std::string dims = "ground_dim=" + std::to_string(pg.ground_dim) + ";rank=" + std::to_string(pg.rank_TR);
    if (exact || pg.edge_injective) {
        Row r;
        r.key = {rn, std::string("ground_dim_minus_rank")};
        r.values = {static_cast<double>(pg.ground_dim - pg.rank_TR), 0.0};
        r.status = pg.ground_dim == pg.rank_TR ? Status::pass : Status::fail;
        r.margin = pg.ground_dim == pg.rank_TR ? 0.0 : -std::abs(double(pg.ground_dim - pg.rank_TR));
        r.note = dims;
        t.rows.push_back(r);
    } else {
        t.report({rn, std::string("ground_dim_minus_rank")}, {static_cast<double>(pg.ground_dim - pg.rank_TR), 0.0},
                 dims + ";edge maps not injective");
    }
    t.report({rn, std::string("gap")}, {pg.gap, none()}, pg.edge_injective ? "" : "edge maps not injective");
    t.extras["family"] = c.peps_family;
    return t;
}

inline Table run_audit_all(const ExperimentConfig& c) {
    Table t;
    t.key_cols = {"section", "check", "case"};
    t.value_cols = {"lhs", "rhs"};
    t.plot_y = {"lhs", "rhs"};
    const auto& spec = c.spec;
    const int d = spec.d;
    FaultInjection fault;
    fault.corrupt_etilde = c.fault();
    fault.seed = c.seed;
    auto sec = [](const char* s) { return std::string(s); };

    {
        CounterRng rng(c.seed, 0xA);
        Mat m = random_hermitian(rng, d);
        LocalOperator A = LocalOperator::on(m / spectral_norm(m), d, 1);
        CertificateOptions opt;
        opt.lambda = c.model.contains("lambda") ? c.model["lambda"].get<double>() : 1.0;
        std::vector<cplx> s{{0.4, 0.0}, {-0.4, 0.0}, {0.3, 0.3}, {0.3, -0.3}};
        auto certs = detail::with_context("audit-all (bounds)", [&] { return locality_certificate(spec, A, s, {0, 1}, 2, opt); });
        for (const auto& ct : certs) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "s=(%g,%g);ell=%d;L=2", ct.params.s.real(), ct.params.s.imag(), ct.params.ell);
            t.check({sec("bounds"), ct.label, std::string(buf)}, *ct.empirical, ct.theoretical);
        }
    }
    {
        auto audit = detail::with_context("audit-all (expansionals)", [&] { return expansional_bound_audit(spec, 0.5, 0, 1); });
        for (const auto& ct : audit.certs)
            t.check({sec("expansionals"), ct.label, std::string("beta=0.5;p=0;q=1")}, ct.empirical.value_or(0.0),
                    ct.theoretical);
        auto w = detail::with_context("audit-all (windows)", [&] { return window_expansionals(spec, 1, 4, 0.5, false); });
        t.check({sec("expansionals"), sec("window_etilde"), sec("beta=0.5;n=1;a=4")}, w.residual_tilde, 1e-10, 0.0);
        t.check({sec("expansionals"), sec("window_e"), sec("beta=0.5;n=1;a=4")}, w.residual_E, 1e-10, 0.0);
    }
    {
        TransferAuditParams p;
        p.n = 1;
        p.ell = 1;
        p.a = 5;
        p.samples = 2;
        p.seed = c.seed;
        p.fault = fault;
        auto rows = detail::with_context("audit-all (transfer)", [&] { return transfer_audit(spec, p); });
        for (const auto& r : rows) {
            std::vector<Cell> key{sec("transfer"), r.check, "n=1;ell=1;a=5;sample=" + std::to_string(r.sample)};
            if (std::isinf(r.rhs) && r.note == "reported") t.report(key, {r.lhs, r.rhs}, r.note);
            else t.check(key, r.lhs, r.rhs, r.slack, r.note);
        }
        CounterRng rng(c.seed, 2000);
        LocalOperator q = LocalOperator::on(random_hermitian(rng, ipow(d, 2)), d, 1);
        auto gi = detail::with_context("audit-all (gibbs identity)", [&] { return gibbs_identity(spec, 1, 5, q, &fault); });
        t.check({sec("transfer"), sec("gibbs_identity_local"), sec("n=1;a=5")}, gi.residual, 1e-10, 0.0);
        double sg = detail::with_context("audit-all (semigroup)", [&] { return semigroup_residual(spec, 2, 3, q); });
        t.check({sec("transfer"), sec("semigroup"), sec("n=2;a=3")}, sg, 1e-10, 0.0);
        auto w = build_window(spec, 1, 5, 2, &fault);
        auto rep = fixed_point_solve(w, 1e-12, 500);
        t.check({sec("fixed_point"), sec("eigen_nu"), sec("n=1;a=5;m=2")}, rep.eigen_nu, 1e-8, 0.0);
        t.check({sec("fixed_point"), sec("eigen_h"), sec("n=1;a=5;m=2")}, rep.eigen_h, 1e-8, 0.0);
        auto hs = h_sandwich(spec, rep);
        t.check({sec("fixed_point"), sec("h_sandwich_lower"), sec("n=1;a=5;m=2")}, hs.lower, hs.min_eig, 1e-8);
        t.check({sec("fixed_point"), sec("h_sandwich_upper"), sec("n=1;a=5;m=2")}, hs.max_eig, hs.upper, 1e-8);
    }
    {
        CounterRng rng(c.seed, 0xC);
        LocalOperator q = LocalOperator::on(random_hermitian(rng, d), d, 1);
        const double bound = 2.0 * operator_norm(q) * operator_norm(q);
        auto pts = detail::with_context("audit-all (correlations)",
                                        [&] { return correlation_profile(spec, 1, 6, 1.0, q, q, {1, 2, 3}); });
        for (const auto& p : pts)
            if (!p.skipped)
                t.check({sec("gibbs"), sec("correlation_norm"), "beta=1;N=6;k=" + std::to_string(p.k)}, std::abs(p.value),
                        bound);
    }
    {
        auto bh = detail::with_context("audit-all (peps)", [&] {
            return peps::boundary_hamiltonian(peps::random_grid(2, 2, 4, 2, c.seed), peps::Rect{0, 0, 2, 2});
        });
        t.check({sec("peps"), sec("reconstruction_error"), sec("random;2x2;d=4")}, bh.reconstruction_error, 1e-10, 0.0);
        t.check({sec("peps"), sec("exp_residual"), sec("random;2x2;d=4")}, bh.exp_residual, 1e-10, 0.0);
    }
    t.extras["fault_inject"] = c.fault() ? json(kFaultCorruptEtilde) : json(nullptr);
    return t;
}

inline Table run_experiment(const ExperimentConfig& c) {
    if (c.command == "certify-bounds") return run_certify_bounds(c);
    if (c.command == "scan-strip") return run_scan_strip(c);
    if (c.command == "expansionals") return run_expansionals(c);
    if (c.command == "transfer-spectrum") return run_transfer_spectrum(c);
    if (c.command == "gibbs-decay") return run_gibbs_decay(c);
    if (c.command == "peps-factorize") return run_peps_factorize(c);
    if (c.command == "audit-all") return run_audit_all(c);
    throw Error("run_experiment: unknown command " + c.command);
}

// --out, then config.output_dir, then $LRLAB_OUT_DIR, then ./lrlab_out/<command>
inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c, const std::string& cli_out) {
    if (!cli_out.empty()) return cli_out;
    if (c.output_dir) return *c.output_dir;
    if (const char* env = std::getenv("LRLAB_OUT_DIR"); env && *env) return std::filesystem::path(env) / c.command;
    return std::filesystem::path("lrlab_out") / c.command;
}

}  // namespace lrlab::app
