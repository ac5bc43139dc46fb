#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

#include "rcm/config.hpp"

using namespace rcm;
using json = nlohmann::json;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
    auto store = std::make_shared<std::map<std::string, std::string>>(std::move(vars));
    return [store](const char* name) -> const char* {
        auto it = store->find(name);
        return it == store->end() ? nullptr : it->second.c_str();
    };
}

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("toml: scalars, tables and arrays") {
    const auto j = parse_toml(R"(
# comment
title = "rcm"   # trailing comment
lit = 'C:\path'
esc = "tab\there \u00e9"
int = 1_000
hex = 0xff
oct = 0o17
bin = 0b101
neg = -42
flt = 6.5e-1
inf = +inf
yes = true
a.b.c = 3
"quoted key" = 1
arr = [1, 2,
       3,  # inside
      ]
mixed = [[1, 2], ["x"]]
inl = { x = 1, y = { z = "deep" } }

[lattice]
kind = "full"

[lattice.extra]
k = 2

[[experiment]]
id = "a"

[[experiment]]
id = "b"
)");
    CHECK(j["title"] == "rcm");
    CHECK(j["lit"] == "C:\\path");
    CHECK(j["esc"] == "tab\there \xc3\xa9");
    CHECK(j["int"] == 1000);
    CHECK(j["hex"] == 255);
    CHECK(j["oct"] == 15);
    CHECK(j["bin"] == 5);
    CHECK(j["neg"] == -42);
    CHECK(j["flt"].get<double>() == doctest::Approx(0.65));
    CHECK(std::isinf(j["inf"].get<double>()));
    CHECK(j["yes"] == true);
    CHECK(j["a"]["b"]["c"] == 3);
    CHECK(j["quoted key"] == 1);
    CHECK(j["arr"] == json({1, 2, 3}));
    CHECK(j["mixed"][1][0] == "x");
    CHECK(j["inl"]["y"]["z"] == "deep");
    CHECK(j["lattice"]["kind"] == "full");
    CHECK(j["lattice"]["extra"]["k"] == 2);
    REQUIRE(j["experiment"].size() == 2);
    CHECK(j["experiment"][1]["id"] == "b");
}

TEST_CASE("toml: errors carry line and column") {
    auto fails_at = [](const std::string& text, int line) {
        try {
            parse_toml(text);
        } catch (const ConfigError& e) {
            CHECK(e.line() == line);
            CHECK(e.col() > 0);
            CHECK(std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos);
            return;
        }
        FAIL("no error for: " << text);
    };
    fails_at("a = 1\na = 2\n", 2);
    fails_at("x = \n", 1);
    fails_at("[t]\nk = 1\n[t]\n", 3);
    fails_at("s = \"open\n", 1);
    fails_at("n = 012\n", 1);
    fails_at("m = \"\"\"multi\"\"\"\n", 1);
    fails_at("ok = 1\nbad value\n", 2);
    fails_at("arr = [1, 2\n", 2);
}

TEST_CASE("config: defaults and derived objects") {
    const auto cfg = parse_config_text(R"(
seed = 7
[lattice]
kind = "full"
d = 2
[environment]
variant = "paper_example"
eps = 0.1
delta = 0.1
p = 4
q = 4
[process]
alpha = 1.5
x0 = [3, -1]
)");
    CHECK(cfg.seed == 7);
    CHECK(cfg.replicas == 1000);
    CHECK(cfg.lattice.ambient_dim() == 2);
    CHECK(cfg.environment.variant == EnvVariant::PaperExample);
    CHECK(cfg.start_vertex() == Vertex{3, -1});
    CHECK(cfg.environment_seed() == mix_seed(7, "environment"));
    CHECK(cfg.module_seed("walker") == mix_seed(7, "walker"));
    CHECK(cfg.make_field()->seed() == cfg.environment_seed());
    CHECK(cfg.process_spec().alpha == 1.5);
    CHECK(cfg.section("nothing").empty());
}

TEST_CASE("config: semantic errors name the field") {
    CHECK(error_of("[process]\nalpha = 2.5\n").find("process.alpha: alpha outside (0,2)") != std::string::npos);
    CHECK(error_of("[process]\nalpha = 0.0\n").find("alpha outside (0,2)") != std::string::npos);
    CHECK(error_of(R"([process]
alpha = 0.5
[environment]
variant = "paper_example"
eps = 0.6
)")
              .find("environment.eps: envelope not summable") != std::string::npos);
    CHECK(error_of("[lattice]\nkind = \"full\"\nd = 1\nbogus = 3\n").find("lattice.bogus: unknown field") !=
          std::string::npos);
    CHECK(error_of("[lattice]\nkind = \"torus\"\n").find("lattice.kind") != std::string::npos);
    CHECK(error_of("[lattice]\nkind = \"full\"\nd = 2\n[process]\nx0 = [1]\n").find("process.x0") !=
          std::string::npos);
    CHECK(error_of("[[experiment]]\nkind = \"poincare\"\n[[experiment]]\nkind = \"poincare\"\n").find("duplicate") !=
          std::string::npos);
    CHECK(error_of("[lattice]\nkind = \"gasket\"\nlevels = 40\n").find("lattice.levels") != std::string::npos);
}

TEST_CASE("config: moment gate warnings") {
    const auto cfg = parse_config_text(R"(
[lattice]
kind = "full"
d = 1
[environment]
variant = "paper_example"
eps = 0.1
delta = 0.1
p = 4
q = 4
[process]
alpha = 1.0
)");
    // d = 1 > 4 - 2 alpha fails at alpha = 1.
    REQUIRE_FALSE(cfg.warnings.empty());
    bool dim = false;
    for (const auto& w : cfg.warnings) dim = dim || w.find("dimension") != std::string::npos;
    CHECK(dim);
    CHECK(parse_config_text("[process]\nalpha = 1.0\n").warnings.empty());
}

TEST_CASE("config: hash is stable and round-trips") {
    const std::string text = R"(
seed = 11
replicas = 500
threads = 4
[lattice]
kind = "half"
d1 = 1
d2 = 1
[environment]
variant = "discrete_mixture"
atoms = [{coeff = 2.0, power = 0.0, prob = 0.5}, {coeff = 0.0, power = 0.0, prob = 0.5}]
[process]
alpha = 0.7
variant = "truncated"
delta = 4
[exi]
theta = 0.8
)";
    const auto a = parse_config_text(text);
    const auto b = parse_config_text(text);
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    const auto c = config_from_json(a.canonical());
    CHECK(c.hash() == a.hash());
    CHECK(c.section("exi")["theta"] == 0.8);

    auto d = a;
    d.threads = 1;
    d.out_dir = "/elsewhere";
    CHECK(d.hash() == a.hash());
    d.seed = 12;
    CHECK(d.hash() != a.hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("config: environment overrides") {
    const std::string text = "seed = 1\n[process]\nalpha = 1.0\n";
    const auto cfg = parse_config_text(text, env_of({{"RCM_SEED", "99"},
                                                      {"RCM_THREADS", "3"},
                                                      {"RCM_REPLICAS", "250"},
                                                      {"RCM_OUT", "/tmp/rcm-out"},
                                                      {"RCM_PROCESS_ALPHA", "1.5"},
                                                      {"RCM_ENVIRONMENT_VARIANT", "paper_example"},
                                                      {"RCM_LATTICE_D", "2"}}));
    CHECK(cfg.seed == 99);
    CHECK(cfg.threads == 3);
    CHECK(cfg.replicas == 250);
    CHECK(cfg.out_dir == "/tmp/rcm-out");
    CHECK(cfg.process.alpha == 1.5);
    CHECK(cfg.environment.variant == EnvVariant::PaperExample);
    CHECK(cfg.lattice.ambient_dim() == 2);
    CHECK_THROWS_AS(parse_config_text(text, env_of({{"RCM_PROCESS_ALPHA", "3"}})), ConfigError);
    CHECK(parse_config_text(text, nullptr).seed == 1);
}

TEST_CASE("config: experiment blocks merge over the run tables") {
    const auto base = parse_config_text(R"(
seed = 5
threads = 2
[lattice]
kind = "full"
d = 1
[environment]
variant = "paper_example"
eps = 0.1
delta = 0.1
p = 4
q = 4
seed = 77
[process]
alpha = 1.0
[[experiment]]
id = "x"
kind = "poincare"
radii = [4, 8]
[experiment.process]
alpha = 1.4
[[experiment]]
id = "y"
kind = "poincare"
[experiment.environment]
variant = "constant_one"
)");
    REQUIRE(base.experiments.size() == 2);
    const auto x = experiment_config(base, base.experiments[0]);
    CHECK(x.process.alpha == 1.4);
    CHECK(x.environment.variant == EnvVariant::PaperExample);
    CHECK(x.environment_seed() == 77);
    CHECK(x.threads == 2);
    CHECK(x.section("experiment_block")["radii"] == json({4, 8}));
    CHECK_FALSE(x.section("experiment_block").contains("process"));
    const auto y = experiment_config(base, base.experiments[1]);
    CHECK(y.environment.variant == EnvVariant::ConstantOne);
    CHECK(y.environment_seed() == 77);
    CHECK(y.process.alpha == 1.0);
    CHECK(x.hash() != y.hash());
    CHECK(experiment_config(base, base.experiments[0]).hash() == x.hash());
}

TEST_CASE("config: missing file is a config error") {
    CHECK_THROWS_AS(parse_config("/nonexistent/rcm.toml"), ConfigError);
}
