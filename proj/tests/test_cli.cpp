#include "lrlab/app.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

using namespace lrlab;
using app::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::path(::testing::TempDir()) / ("lrlab_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
    fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

int run(const std::string& args, const fs::path& err = {}) {
    std::string cmd = std::string(LRLAB_BIN) + " " + args + " >/dev/null";
    cmd += err.empty() ? " 2>/dev/null" : " 2>" + err.string();
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::string cur;
        bool quoted = false;
        for (char ch : line) {
            if (ch == '"') quoted = !quoted;
            else if (ch == ',' && !quoted) {
                f.push_back(cur);
                cur.clear();
            } else cur += ch;
        }
        f.push_back(cur);
        rows.push_back(f);
    }
    return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

}  // namespace

TEST(Config, MinimalIsFullyDefaulted) {
    auto c = app::validate_config(json{{"model", {{"preset", "zero"}}}}, {"certify-bounds", {}, {}});
    json r = c.resolved();
    EXPECT_EQ(r["seed"], 1);
    EXPECT_EQ(r["caps"]["max_sites"], 12);
    EXPECT_EQ(r["grids"]["N"], 10);
    EXPECT_EQ(r["grids"]["support"], 2);
    EXPECT_EQ(r["grids"]["s"].size(), 16u);
    EXPECT_EQ(r["grids"]["lambda"], 1.0);
    // the echo is itself a valid config with the same resolution
    auto again = app::validate_config(r);
    EXPECT_EQ(again.resolved(), r);
}

TEST(Config, DryRunEchoes) {
    auto dir = scratch("dry");
    auto cfg = write_config(dir, {{"model", {{"preset", "tfim"}}}});
    std::string cmd = std::string(LRLAB_BIN) + " gibbs-decay --config " + cfg.string() + " --dry-run > " +
                      (dir / "echo.json").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    json e = json::parse(slurp(dir / "echo.json"));
    EXPECT_EQ(e["command"], "gibbs-decay");
    EXPECT_EQ(e["model"]["J"], 1.0);
    EXPECT_EQ(e["grids"]["N"], 12);
}

TEST(Config, MissingModelNamesField) {
    auto dir = scratch("nomodel");
    auto cfg = write_config(dir, {{"seed", 4}});
    EXPECT_EQ(run("certify-bounds --config " + cfg.string(), dir / "err.txt"), app::kExitConfig);
    EXPECT_NE(slurp(dir / "err.txt").find("config.model: missing"), std::string::npos);
}

TEST(Config, SiteCapViolations) {
    auto dir = scratch("cap");
    auto cfg = write_config(dir, {{"model", {{"preset", "tfim"}}}, {"grids", {{"N", 20}}}});
    EXPECT_EQ(run("certify-bounds --config " + cfg.string(), dir / "err.txt"), app::kExitConfig);
    EXPECT_NE(slurp(dir / "err.txt").find("config.grids.N: frame of 20 sites exceeds cap of 12"), std::string::npos);
    try {
        app::validate_config(json{{"model", {{"preset", "zero"}}}, {"caps", {{"max_sites", 20}}}}, {"gibbs-decay", {}, {}});
        FAIL();
    } catch (const app::ConfigError& e) {
        EXPECT_EQ(e.path(), "config.caps.max_sites");
    }
    // a lowered cap binds
    EXPECT_THROW(app::validate_config(json{{"model", {{"preset", "zero"}}}, {"caps", {{"max_sites", 8}}},
                                           {"grids", {{"N", 10}}}},
                                      {"gibbs-decay", {}, {}}),
                 app::ConfigError);
}

TEST(Config, SchemaErrorsCarryPaths) {
    auto path_of = [](const json& j, const std::string& cmd) {
        try {
            app::validate_config(j, {cmd, {}, {}});
        } catch (const app::ConfigError& e) {
            return e.path();
        }
        return std::string("none");
    };
    json m{{"preset", "tfim"}};
    EXPECT_EQ(path_of({{"model", m}, {"grid", json::object()}}, "gibbs-decay"), "config.grid");
    EXPECT_EQ(path_of({{"model", m}, {"grids", {{"betas", {1.0}}}}}, "gibbs-decay"), "config.grids.betas");
    EXPECT_EQ(path_of({{"model", {{"preset", "tfim"}, {"h", 1}}}}, "gibbs-decay"), "config.model.h");
    EXPECT_EQ(path_of({{"model", {{"preset", "ising"}}}}, "gibbs-decay"), "config.model.preset");
    EXPECT_EQ(path_of({{"model", m}, {"seed", "x"}}, "gibbs-decay"), "config.seed");
    EXPECT_EQ(path_of({{"model", m}, {"grids", {{"k", {1, "2"}}}}}, "gibbs-decay"), "config.grids.k[1]");
    EXPECT_EQ(path_of({{"model", m}}, "peps-factorize"), "config.model");
    EXPECT_EQ(path_of({{"model", m}, {"command", "audit-all"}}, "gibbs-decay"), "config.command");
    EXPECT_EQ(path_of({{"model", {{"generator", {{{"offsets", {0, 1}}, {"matrix", {1, 2, 3}}}}}}}}, "audit-all"),
              "config.model.generator[0].matrix");
    EXPECT_EQ(path_of({{"model", {{"tensors", {{"d", 2}, {"D", 3}, {"grid", json::array()}}}}}}, "peps-factorize"),
              "config.model.tensors.D");
}

TEST(Config, ExplicitGeneratorMatchesPreset) {
    // -J ZZ - g X as row-major [re, im] pairs
    json zz = json::array(), x = json::array();
    const double J = 0.7, g = 0.3;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double v = i == j ? -J * ((i == 0 || i == 3) ? 1.0 : -1.0) : 0.0;
            zz.push_back({v, 0.0});
        }
    x = {{{0, 0}, {-g, 0}}, {{-g, 0}, {0, 0}}};
    json model{{"d", 2},
               {"tail_kind", "finite_range"},
               {"tail_range", 1},
               {"generator", {{{"offsets", {0, 1}}, {"matrix", zz}}, {{"offsets", {0}}, {"matrix", x}}}}};
    auto c = app::validate_config(json{{"model", model}}, {"gibbs-decay", {}, {}});
    auto h1 = assemble_hamiltonian(c.spec, 1, 5).matrix;
    auto h2 = assemble_hamiltonian(transverse_ising(J, g), 1, 5).matrix;
    EXPECT_LE((h1 - h2).norm(), 1e-14);
    // the echoed generator parses back to the same spec
    auto again = app::validate_config(json{{"model", c.model}}, {"gibbs-decay", {}, {}});
    EXPECT_LE((assemble_hamiltonian(again.spec, 1, 5).matrix - h2).norm(), 1e-14);
}

TEST(Config, TensorGridInput) {
    auto grid = peps::random_grid(4, 2, 2, 2, 3);
    json rows = json::array();
    for (int y = 0; y < 2; ++y) {
        json row = json::array();
        for (int x = 0; x < 4; ++x) {
            json t = json::array();
            const auto& m = grid.at(x, y).data;
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                json r = json::array();
                for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back({m(i, j).real(), m(i, j).imag()});
                t.push_back(r);
            }
            row.push_back(t);
        }
        rows.push_back(row);
    }
    auto dir = scratch("tensors");
    std::ofstream(dir / "grid.json") << json{{"d", 2}, {"D", 2}, {"grid", rows}}.dump();
    auto c = app::validate_config(json{{"model", {{"tensors", "grid.json"}}}}, {"peps-factorize", {}, {}}, dir.string());
    ASSERT_TRUE(c.grid.has_value());
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 4; ++x) EXPECT_EQ(c.grid->at(x, y).data, grid.at(x, y).data);
}

TEST(Report, EmptyTableIsHeaderOnly) {
    app::Table t;
    t.key_cols = {"k"};
    t.value_cols = {"v"};
    auto c = app::validate_config(json{{"model", {{"preset", "zero"}}}}, {"gibbs-decay", {}, {}});
    auto dir = scratch("empty");
    app::emit_report(t, c, dir, 0.0);
    EXPECT_EQ(slurp(dir / "results.csv"), "k,v,margin,status,note\n");
    json s = json::parse(slurp(dir / "summary.json"));
    EXPECT_EQ(s["pass_count"], 0);
    EXPECT_EQ(s["fail_count"], 0);
    EXPECT_TRUE(s["worst_margin"].is_null());
    EXPECT_NE(slurp(dir / "plot.gp").find("results.csv"), std::string::npos);
}

TEST(Report, SortedInfLiteralAndNoNan) {
    app::Table t;
    t.key_cols = {"name", "k"};
    t.value_cols = {"v"};
    t.report({std::string("b"), app::cell(2)}, {1.5});
    t.report({std::string("a"), app::cell(10)}, {kInf});
    t.report({std::string("a"), app::cell(9)}, {0.1});
    EXPECT_EQ(app::csv_string(t),
              "name,k,v,margin,status,note\n"
              "a,9,0.10000000000000001,,reported,\n"
              "a,10,inf,,reported,\n"
              "b,2,1.5,,reported,\n");
    t.report({std::string("c"), app::cell(1)}, {std::nan("")});
    EXPECT_THROW(app::csv_string(t), Error);
}

TEST(Run, ZeroInteractionMarginsEqualBounds) {
    auto dir = scratch("zero");
    auto cfg = write_config(dir, {{"model", {{"preset", "zero"}}}, {"grids", {{"N", 6}}}});
    ASSERT_EQ(run("certify-bounds --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
    auto rows = read_csv(dir / "out" / "results.csv");
    ASSERT_GT(rows.size(), 1u);
    const int b = column(rows[0], "bound"), m = column(rows[0], "margin"), e = column(rows[0], "empirical_norm");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i][e], "0");
        EXPECT_EQ(rows[i][m], rows[i][b]);
    }
}

TEST(Run, GibbsDecayMatchesTanh) {
    auto dir = scratch("gibbs");
    const double J = 0.6, beta = 0.9;
    auto cfg = write_config(dir, {{"model", {{"preset", "classical_ising"}, {"J", J}}}, {"grids", {{"beta", {beta}}}}});
    ASSERT_EQ(run("gibbs-decay --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
    auto rows = read_csv(dir / "out" / "results.csv");
    const int k = column(rows[0], "k"), v = column(rows[0], "correlation_re"), chk = column(rows[0], "check");
    int seen = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][chk] != "correlation") continue;
        const int kk = std::stoi(rows[i][k]);
        EXPECT_NEAR(std::stod(rows[i][v]), std::pow(std::tanh(beta * J), kk), 1e-10) << kk;
        ++seen;
    }
    EXPECT_EQ(seen, 6);
}

TEST(Run, FaultInjectionFails) {
    auto dir = scratch("fault");
    auto cfg = write_config(dir, {{"model", {{"preset", "random"}}}});
    EXPECT_EQ(run("audit-all --config " + cfg.string() + " --out " + (dir / "ok").string()), 0);
    EXPECT_EQ(run("audit-all --config " + cfg.string() + " --fault-inject corrupt-etilde --out " + (dir / "bad").string()),
              app::kExitViolation);
    EXPECT_NE(slurp(dir / "bad" / "results.csv").find(",fail,"), std::string::npos);
    EXPECT_EQ(run("audit-all --config " + cfg.string() + " --fault-inject nonsense"), app::kExitConfig);
}

TEST(Run, RerunIsByteIdentical) {
    auto dir = scratch("rerun");
    auto cfg = write_config(dir, {{"model", {{"preset", "random"}}}});
    ASSERT_EQ(run("audit-all --config " + cfg.string() + " --seed 5 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("audit-all --config " + cfg.string() + " --seed 5 --out " + (dir / "b").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "results.csv"), slurp(dir / "b" / "results.csv"));
    ASSERT_EQ(run("audit-all --config " + cfg.string() + " --seed 6 --out " + (dir / "c").string()), 0);
    EXPECT_NE(slurp(dir / "a" / "results.csv"), slurp(dir / "c" / "results.csv"));
}

TEST(Run, ParallelRunsMatchSerial) {
    auto dir = scratch("parallel");
    auto cfg = write_config(dir, {{"model", {{"preset", "random"}}}});
    for (int s : {7, 8})
        ASSERT_EQ(run("audit-all --config " + cfg.string() + " --seed " + std::to_string(s) + " --out " +
                      (dir / ("serial" + std::to_string(s))).string()),
                  0);
    std::string cmd = "sh -c '";
    for (int s : {7, 8})
        cmd += std::string(LRLAB_BIN) + " audit-all --config " + cfg.string() + " --seed " + std::to_string(s) +
               " --out " + (dir / ("par" + std::to_string(s))).string() + " >/dev/null & ";
    cmd += "wait'";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    for (int s : {7, 8}) {
        const std::string n = std::to_string(s);
        EXPECT_EQ(slurp(dir / ("serial" + n) / "results.csv"), slurp(dir / ("par" + n) / "results.csv")) << s;
    }
}

TEST(Run, OutputDirPrecedence) {
    auto dir = scratch("outdir");
    auto cfg = write_config(dir, {{"model", {{"preset", "zero"}}}, {"grids", {{"N", 4}, {"k", {1}}}}});
    std::string env = "LRLAB_OUT_DIR=" + (dir / "env").string() + " ";
    std::string base = std::string(LRLAB_BIN) + " gibbs-decay --config ";
    ASSERT_EQ(std::system((env + base + cfg.string() + " >/dev/null").c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "env" / "gibbs-decay" / "results.csv"));
    auto cfg2 = write_config(dir, {{"model", {{"preset", "zero"}}}, {"output_dir", (dir / "cfgdir").string()},
                                   {"grids", {{"N", 4}, {"k", {1}}}}});
    ASSERT_EQ(std::system((env + base + cfg2.string() + " >/dev/null").c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "cfgdir" / "results.csv"));
    ASSERT_EQ(std::system((env + base + cfg2.string() + " --out " + (dir / "cli").string() + " >/dev/null").c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "cli" / "results.csv"));
}

TEST(Run, GhzRowsFailWithMessage) {
    // GHZ tensors are not injective on the regions; the boundary rows fail with a message
    auto dir = scratch("ghz");
    auto cfg = write_config(dir, {{"model", {{"peps", {{"family", "ghz"}}}}}});
    const int rc = run("peps-factorize --config " + cfg.string() + " --out " + (dir / "out").string());
    EXPECT_EQ(rc, app::kExitViolation);
    EXPECT_NE(slurp(dir / "out" / "results.csv").find("rank-deficient"), std::string::npos);
}
