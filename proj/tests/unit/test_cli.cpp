#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rcm/cli.hpp"

using namespace rcm;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
    std::ostringstream out, err;
    auto store = std::make_shared<std::map<std::string, std::string>>(std::move(env));
    EnvLookup lookup = [store](const char* name) -> const char* {
        auto it = store->find(name);
        return it == store->end() ? nullptr : it->second.c_str();
    };
    const int code = cli::dispatch(args, out, err, lookup);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// A temporary directory holding a config whose output directory is inside it.
struct Workspace {
    fs::path dir;
    fs::path config;
    explicit Workspace(const std::string& name, const std::string& body) {
        dir = fs::temp_directory_path() / ("rcm_cli_" + name);
        fs::remove_all(dir);
        fs::create_directories(dir);
        config = dir / "run.toml";
        std::ofstream(config) << "out = \"" << (dir / "out").string() << "\"\n" << body;
    }
    ~Workspace() { fs::remove_all(dir); }
    fs::path out(const std::string& name) const { return dir / "out" / name; }
};

const char* kConstant = R"(
seed = 4
replicas = 5
[lattice]
kind = "full"
d = 1
[environment]
variant = "constant_one"
[process]
alpha = 1.0
[simulate]
horizon = 2.0
[exi]
theta = 0.9
R_grid = [8]
r_grid = [4, 8]
)";

}  // namespace

TEST_CASE("help, version and usage errors") {
    CHECK(run({"--help"}).code == 0);
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find(kVersion) != std::string::npos);
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"exact"}).code == cli::kUsage);
    CHECK(run({"stable", "table"}).code == cli::kUsage);  // --alpha is required
    CHECK(run({"stable", "table", "--alpha", "1", "--bogus"}).code == cli::kUsage);
    CHECK(run({"simulate", "--threads", "0"}).code == cli::kUsage);
    CHECK(run({"experiment", "run"}).code == cli::kUsage);
}

TEST_CASE("bad configs exit with the usage code and name the field") {
    Workspace ws("badcfg", "[process]\nalpha = 2.5\n");
    const auto r = run({"simulate", "--config", ws.config.string()});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("process.alpha: alpha outside (0,2)") != std::string::npos);
    CHECK(run({"simulate", "--config", (ws.dir / "missing.toml").string()}).code == cli::kUsage);
    Workspace syntax("syntax", "[process\n");
    const auto s = run({"simulate", "--config", syntax.config.string()});
    CHECK(s.code == cli::kUsage);
    CHECK(s.err.find("line") != std::string::npos);
}

TEST_CASE("grid parsing") {
    const auto g = cli::parse_grid("geometric:1,100,3");
    REQUIRE(g.size() == 3);
    CHECK(g[1] == doctest::Approx(10.0));
    CHECK(cli::parse_grid("linear:0,1,5")[4] == doctest::Approx(1.0));
    CHECK(cli::parse_grid("list:3,1,2") == std::vector<double>{3, 1, 2});
    CHECK_THROWS(cli::parse_grid("geometric:1,2"));
    CHECK_THROWS(cli::parse_grid("list:a,b"));
    CHECK_THROWS(cli::parse_grid("1,2,3"));
    CHECK_THROWS(cli::parse_grid("cubic:1,2,3"));
}

TEST_CASE("outputs stay inside the configured directory") {
    RunConfig cfg;
    cfg.out_dir = "/data/rcm";
    CHECK(cli::resolve_output(cfg, "a.csv", "") == "/data/rcm/a.csv");
    CHECK(cli::resolve_output(cfg, "sub/../b.csv", "") == "/data/rcm/b.csv");
    CHECK(cli::resolve_output(cfg, "/data/rcm/c.csv", "") == "/data/rcm/c.csv");
    CHECK(cli::resolve_output(cfg, "", "reports") == "/data/rcm/reports");
    CHECK_THROWS_AS(cli::resolve_output(cfg, "../x.csv", ""), ConfigError);
    CHECK_THROWS_AS(cli::resolve_output(cfg, "/tmp/x.csv", ""), ConfigError);
    CHECK_THROWS_AS(cli::resolve_output(cfg, "/data/rcm2/x.csv", ""), ConfigError);
    RunConfig open;
    CHECK(cli::resolve_output(open, "/anywhere/x.csv", "") == "/anywhere/x.csv");
    CHECK(cli::resolve_output(open, "", "") == "");
}

TEST_CASE("env dump writes a headed CSV of conductances") {
    Workspace ws("dump", kConstant);
    const auto r = run({"env", "dump", "--config", ws.config.string(), "--radius", "2", "--out", "env.csv"});
    REQUIRE(r.code == 0);
    const auto csv = slurp(ws.out("env.csv"));
    CHECK(csv.rfind(std::string("# rcm ") + kVersion + " config_hash=", 0) == 0);
    CHECK(csv.find("seed=4 environment_seed=") != std::string::npos);
    CHECK(csv.find("\nx,y,w\n") != std::string::npos);
    CHECK(count_lines(csv) == 2 + 10);  // C(5, 2) pairs in B(0, 2)
    CHECK(run({"env", "dump", "--config", ws.config.string(), "--out", "../escape.csv"}).code == cli::kUsage);
    CHECK(run({"env", "dump", "--config", ws.config.string(), "--radius", "3000"}).code == cli::kUsage);
}

TEST_CASE("verify exi writes a JSON report") {
    Workspace ws("exi", kConstant);
    const auto r = run({"verify", "exi", "--config", ws.config.string(), "--out", "exi.json"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(ws.out("exi.json")));
    CHECK(j["kind"] == "exi");
    CHECK(j["pass"] == true);
    CHECK(j["metrics"].size() >= 5);
}

TEST_CASE("simulate writes one JSON line per replica, independent of threads") {
    Workspace ws("sim", kConstant);
    const auto a = run({"simulate", "--config", ws.config.string(), "--out", "a.jsonl", "--threads", "1"});
    const auto b = run({"simulate", "--config", ws.config.string(), "--out", "b.jsonl", "--threads", "3"});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto sa = slurp(ws.out("a.jsonl"));
    CHECK(sa == slurp(ws.out("b.jsonl")));
    CHECK(count_lines(sa) == 5);
    const auto first = nlohmann::json::parse(sa.substr(0, sa.find('\n')));
    CHECK(first["replica"] == 0);
    CHECK(first["horizon"] == 2.0);
    const auto c = run({"simulate", "--config", ws.config.string(), "--replicas", "2"});
    CHECK(count_lines(c.out) == 2);
    // Seed from the environment, then from the flag.
    const auto e1 = run({"simulate", "--config", ws.config.string(), "--replicas", "1"}, {{"RCM_SEED", "77"}});
    const auto e2 = run({"simulate", "--config", ws.config.string(), "--replicas", "1", "--seed", "77"});
    CHECK(e1.out == e2.out);
    CHECK(e1.out != c.out.substr(0, c.out.find('\n') + 1));
}

TEST_CASE("exit-times and exact verbs") {
    Workspace ws("exact", kConstant);
    const auto e = run({"exit-times", "--config", ws.config.string(), "--r", "2,4"});
    REQUIRE(e.code == 0);
    CHECK(e.out.find("r,tau,exit_distance,censored\n") != std::string::npos);
    CHECK(count_lines(e.out) == 2 + 2 * 5);
    CHECK(run({"exit-times", "--config", ws.config.string(), "--r", "x"}).code == cli::kUsage);

    const auto hk = run({"exact", "heatkernel", "--config", ws.config.string(), "--t-grid", "list:1", "--window", "4"});
    REQUIRE(hk.code == 0);
    CHECK(count_lines(hk.out) == 2 + 9);
    const auto nash = run({"exact", "nash", "--config", ws.config.string(), "--R", "8", "--t-grid", "geometric:1,64,4"});
    CHECK(nash.code == 0);
    CHECK(nash.out.find("t,M,Q,K") != std::string::npos);
    const auto cdf = run({"exact", "exitcdf", "--config", ws.config.string(), "--r", "4", "--t-grid", "linear:1,3,3"});
    CHECK(cdf.code == 0);
    CHECK(count_lines(cdf.out) == 2 + 3);
    const auto osc = run({"exact", "oscillation", "--config", ws.config.string(), "--r", "8", "--levels", "1"});
    CHECK(osc.code == 0);
    CHECK(osc.out.find("k,radius,osc") != std::string::npos);
    CHECK(run({"exact", "nash", "--config", ws.config.string(), "--t-grid", "bad"}).code == cli::kUsage);
}

TEST_CASE("stable table") {
    const auto r = run({"stable", "table", "--alpha", "1", "--scale", "1", "--grid", "list:-1,0,1"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("x,cdf") != std::string::npos);
    CHECK(r.out.find("\n0,0.5\n") != std::string::npos);
    CHECK(r.out.find("\n1,0.75\n") != std::string::npos);  // Cauchy: 1/2 + arctan(1)/pi
    CHECK(run({"stable", "table", "--alpha", "2.5"}).code == cli::kUsage);
}

TEST_CASE("experiment run exit codes follow the suite") {
    Workspace ok("suite_ok", "seed = 1\n[[experiment]]\nid = \"gate\"\nkind = \"moment_gate\"\n");
    const auto a = run({"experiment", "run", "--manifest", ok.config.string()});
    CHECK(a.code == 0);
    CHECK(a.out.find("PASS gate (moment_gate)") != std::string::npos);
    CHECK(fs::exists(ok.dir / "out" / "gate.json"));
    CHECK(fs::exists(ok.dir / "out" / "summary.csv"));

    Workspace bad("suite_bad", R"(
seed = 1
[[experiment]]
id = "tight"
kind = "marginal_convergence"
ns = [4]
paths = 500
ks_max = 1e-6
require_decrease = false
)");
    const auto b = run({"experiment", "run", "--manifest", bad.config.string(), "--out", "reports"});
    CHECK(b.code == cli::kAssertionFailure);
    CHECK(b.out.find("FAIL tight") != std::string::npos);
    CHECK(fs::exists(bad.dir / "out" / "reports" / "tight.json"));

    Workspace unknown("suite_unknown", "[[experiment]]\nkind = \"nope\"\n");
    CHECK(run({"experiment", "run", "--manifest", unknown.config.string()}).code == cli::kUsage);
}

TEST_CASE("shipped example configs load") {
    for (const char* name : {"constant_z1.toml", "paper_example.toml", "gasket.toml", "tail_probes.toml"}) {
        CAPTURE(name);
        const auto cfg = parse_config(std::string(RCM_SOURCE_DIR) + "/configs/" + name);
        CHECK_FALSE(cfg.out_dir.empty());
    }
}
