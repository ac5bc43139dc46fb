#include "rcm/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

namespace rcm {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& reason) {
    throw ConfigError(field + ": " + reason);
}

double num(const json& t, const std::string& table, const char* key, double def) {
    if (!t.contains(key)) return def;
    const auto& v = t.at(key);
    if (!v.is_number()) bad(table + "." + key, "expected a number");
    return v.get<double>();
}

std::int64_t integer(const json& t, const std::string& table, const char* key, std::int64_t def) {
    if (!t.contains(key)) return def;
    const auto& v = t.at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return static_cast<std::int64_t>(v.get<double>());
    bad(table + "." + key, "expected an integer");
}

std::uint64_t seed_value(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    bad(field, "expected a non-negative integer");
}

bool boolean(const json& t, const std::string& table, const char* key, bool def) {
    if (!t.contains(key)) return def;
    if (!t.at(key).is_boolean()) bad(table + "." + key, "expected true or false");
    return t.at(key).get<bool>();
}

std::string str(const json& t, const std::string& table, const char* key, const std::string& def) {
    if (!t.contains(key)) return def;
    if (!t.at(key).is_string()) bad(table + "." + key, "expected a string");
    return t.at(key).get<std::string>();
}

void only_keys(const json& t, const std::string& table, std::initializer_list<const char*> keys) {
    if (!t.is_object()) bad(table, "expected a table");
    for (const auto& [k, _] : t.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
            bad(table + "." + k, "unknown field");
    }
}

LatticeSpec parse_lattice(const json& t) {
    only_keys(t, "lattice", {"kind", "d", "d1", "d2", "n_ambient", "levels", "metric", "measure_cm", "measure_seed"});
    const std::string kind = str(t, "lattice", "kind", "full");
    LatticeSpec s;
    if (kind == "full") {
        if (t.contains("d") && t.contains("d2")) bad("lattice.d", "give either d or d2");
        s = LatticeSpec::full(static_cast<int>(integer(t, "lattice", t.contains("d") ? "d" : "d2", 1)));
        if (integer(t, "lattice", "d1", 0) != 0) bad("lattice.d1", "must be 0 for the full lattice");
    } else if (kind == "half") {
        s = LatticeSpec::half(static_cast<int>(integer(t, "lattice", "d1", 1)), static_cast<int>(integer(t, "lattice", "d2", 0)));
    } else if (kind == "gasket") {
        s = LatticeSpec::gasket(static_cast<int>(integer(t, "lattice", "n_ambient", 2)),
                                static_cast<int>(integer(t, "lattice", "levels", 6)));
    } else {
        bad("lattice.kind", "expected full, half or gasket");
    }
    if (kind != "gasket" && (t.contains("n_ambient") || t.contains("levels")))
        bad("lattice.levels", "only meaningful for the gasket");
    const std::string metric = str(t, "lattice", "metric", kind == "gasket" ? "graph" : "euclidean");
    if (metric == "euclidean") s.metric = Metric::Euclidean;
    else if (metric == "graph") s.metric = Metric::GraphDistance;
    else bad("lattice.metric", "expected euclidean or graph");
    s.measure_cm = num(t, "lattice", "measure_cm", 1.0);
    if (t.contains("measure_seed")) s.measure_seed = seed_value(t.at("measure_seed"), "lattice.measure_seed");
    if (s.kind == LatticeKind::Gasket && (s.levels < 0 || s.levels > 12)) bad("lattice.levels", "must be in [0,12]");
    try {
        // Level 0 keeps the gasket check cheap; the generated region is built on use.
        LatticeSpec probe = s;
        if (probe.kind == LatticeKind::Gasket) probe.levels = 0;
        Lattice check(probe);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return s;
}

DistributionSpec parse_environment(const json& t, std::optional<std::uint64_t>& seed) {
    only_keys(t, "environment", {"variant", "seed", "eps", "delta", "p", "q", "zero_prob", "atoms"});
    if (t.contains("seed")) seed = seed_value(t.at("seed"), "environment.seed");
    const std::string v = str(t, "environment", "variant", "constant_one");
    DistributionSpec d;
    if (v == "constant_one") {
        d = DistributionSpec::constant_one();
    } else if (v == "paper_example") {
        d.variant = EnvVariant::PaperExample;
        d.eps = num(t, "environment", "eps", d.eps);
        d.delta = num(t, "environment", "delta", d.delta);
        d.p = static_cast<int>(integer(t, "environment", "p", d.p));
        d.q = static_cast<int>(integer(t, "environment", "q", d.q));
        d.zero_prob = num(t, "environment", "zero_prob", d.zero_prob);
    } else if (v == "discrete_mixture") {
        d.variant = EnvVariant::DiscreteMixture;
        if (!t.contains("atoms") || !t.at("atoms").is_array()) bad("environment.atoms", "expected an array of {coeff, power, prob}");
        for (const auto& a : t.at("atoms")) {
            only_keys(a, "environment.atoms", {"coeff", "power", "prob"});
            d.mixture.push_back({num(a, "environment.atoms", "coeff", 1.0), num(a, "environment.atoms", "power", 0.0),
                                 num(a, "environment.atoms", "prob", 0.0)});
        }
    } else {
        bad("environment.variant", "expected constant_one, paper_example or discrete_mixture");
    }
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return d;
}

ProcessBlock parse_process(const json& t) {
    only_keys(t, "process", {"alpha", "variant", "delta", "x0", "R", "truncated", "n"});
    ProcessBlock p;
    p.alpha = num(t, "process", "alpha", p.alpha);
    p.variant = str(t, "process", "variant", p.variant);
    p.delta = num(t, "process", "delta", p.delta);
    p.R = num(t, "process", "R", p.R);
    p.truncated = boolean(t, "process", "truncated", p.truncated);
    p.n = integer(t, "process", "n", p.n);
    if (t.contains("x0")) {
        if (!t.at("x0").is_array()) bad("process.x0", "expected an array of integers");
        for (const auto& c : t.at("x0")) {
            if (!c.is_number_integer()) bad("process.x0", "expected an array of integers");
            p.x0.push_back(c.get<std::int64_t>());
        }
    }
    if (!(p.alpha > 0.0 && p.alpha < 2.0)) bad("process.alpha", "alpha outside (0,2)");
    if (p.variant != "full" && p.variant != "truncated" && p.variant != "localized")
        bad("process.variant", "expected full, truncated or localized");
    if (p.variant == "truncated" && !(p.delta >= 1.0)) bad("process.delta", "must be >= 1");
    if (p.variant == "localized" && !(p.R >= 1.0)) bad("process.R", "must be >= 1");
    if (p.n < 1) bad("process.n", "must be >= 1");
    return p;
}

void check_cross(RunConfig& c) {
    const auto& env = c.environment;
    const double alpha = c.process.alpha;
    if (env.variant != EnvVariant::ConstantOne && env.tail_exponent() >= alpha)
        bad(env.variant == EnvVariant::PaperExample ? "environment.eps" : "environment.atoms", "envelope not summable");
    if (!c.process.x0.empty() && c.process.x0.size() != static_cast<std::size_t>(c.lattice.ambient_dim()))
        bad("process.x0", "dimension does not match the lattice");
    if (env.variant == EnvVariant::ConstantOne) return;
    if (c.lattice.kind == LatticeKind::Gasket) {
        c.warnings.push_back("dimension gate not evaluated on the gasket");
        return;
    }
    const int d = c.lattice.ambient_dim();
    const auto gate = validate_moment_exponents(d, alpha, env.p, env.q, alpha < 1.0);
    if (!gate.dimension_ok) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "dimension gate: d = %d does not exceed %.4g; the invariance principle is not covered",
                      d, gate.dimension_threshold);
        c.warnings.emplace_back(buf);
    }
    if (env.variant == EnvVariant::PaperExample && !gate.admissible) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "moment gate: need p > %.4g and q > %.4g, have p = %d, q = %d", gate.p_threshold,
                      gate.q_threshold, env.p, env.q);
        c.warnings.emplace_back(buf);
    }
    for (auto& w : env.warnings()) c.warnings.push_back(w);
}

const char* lattice_kind_name(LatticeKind k) {
    switch (k) {
        case LatticeKind::FullLattice: return "full";
        case LatticeKind::HalfSpace: return "half";
        case LatticeKind::Gasket: return "gasket";
    }
    return "?";
}

const char* variant_name(EnvVariant v) {
    switch (v) {
        case EnvVariant::ConstantOne: return "constant_one";
        case EnvVariant::PaperExample: return "paper_example";
        case EnvVariant::DiscreteMixture: return "discrete_mixture";
    }
    return "?";
}

}  // namespace

std::string fnv1a_hex(const std::string& s) {
    const std::uint64_t h = tag_hash(s);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig config_from_json(const json& tree) {
    if (!tree.is_object()) throw ConfigError("config: expected a table at top level");
    RunConfig c;
    for (const auto& [k, v] : tree.items()) {
        if (k == "seed") c.seed = seed_value(v, "seed");
        else if (k == "replicas") {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 1) bad("replicas", "expected a positive integer");
            c.replicas = v.get<std::size_t>();
        } else if (k == "threads") {
            if (!v.is_number_integer() || v.get<std::int64_t>() < 1) bad("threads", "expected a positive integer");
            c.threads = v.get<unsigned>();
        } else if (k == "out") {
            if (!v.is_string()) bad("out", "expected a string");
            c.out_dir = v.get<std::string>();
        } else if (k == "lattice") {
            c.lattice = parse_lattice(v);
        } else if (k == "environment") {
            c.environment = parse_environment(v, c.env_seed);
        } else if (k == "process") {
            c.process = parse_process(v);
        } else if (k == "experiment") {
            if (!v.is_array()) bad("experiment", "expected [[experiment]] tables");
            std::set<std::string> ids;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto& e = v[i];
                const std::string where = "experiment[" + std::to_string(i) + "]";
                if (!e.is_object()) bad(where, "expected a table");
                if (!e.contains("kind") || !e.at("kind").is_string()) bad(where + ".kind", "missing");
                json blk = e;
                if (!blk.contains("id")) blk["id"] = blk["kind"];
                if (!blk.at("id").is_string()) bad(where + ".id", "expected a string");
                if (!ids.insert(blk.at("id").get<std::string>()).second)
                    bad(where + ".id", "duplicate id '" + blk.at("id").get<std::string>() + "'");
                c.experiments.push_back(std::move(blk));
            }
        } else if (v.is_object()) {
            c.sections[k] = v;
        } else {
            bad(k, "unknown field");
        }
    }
    check_cross(c);
    return c;
}

void apply_env_overrides(json& tree, const EnvLookup& getenv_fn) {
    if (!getenv_fn) return;
    auto value_of = [](const std::string& name, const char* raw) {
        try {
            return parse_toml("v = " + std::string(raw)).at("v");
        } catch (const ConfigError&) {
            return json(std::string(raw));  // bare strings need no quotes
        } catch (...) {
            throw ConfigError(name + ": cannot parse value");
        }
    };
    const std::pair<const char*, const char*> top[] = {
        {"RCM_SEED", "seed"}, {"RCM_THREADS", "threads"}, {"RCM_REPLICAS", "replicas"}, {"RCM_OUT", "out"}};
    for (const auto& [var, key] : top)
        if (const char* v = getenv_fn(var)) tree[key] = value_of(var, v);
    const std::pair<const char*, std::vector<const char*>> tables[] = {
        {"lattice", {"kind", "d", "d1", "d2", "n_ambient", "levels", "metric", "measure_cm", "measure_seed"}},
        {"environment", {"variant", "seed", "eps", "delta", "p", "q", "zero_prob"}},
        {"process", {"alpha", "variant", "delta", "R", "truncated", "n"}},
    };
    for (const auto& [table, keys] : tables) {
        for (const char* key : keys) {
            std::string var = std::string("RCM_") + table + "_" + key;
            std::transform(var.begin(), var.end(), var.begin(), [](unsigned char ch) { return std::toupper(ch); });
            if (const char* v = getenv_fn(var.c_str())) tree[table][key] = value_of(var, v);
        }
    }
}

RunConfig parse_config_text(std::string_view text, const EnvLookup& getenv_fn) {
    json tree = parse_toml(text);
    apply_env_overrides(tree, getenv_fn);
    return config_from_json(tree);
}

RunConfig parse_config(const std::string& path, const EnvLookup& getenv_fn) {
    json tree = parse_toml_file(path);
    apply_env_overrides(tree, getenv_fn);
    try {
        return config_from_json(tree);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

json RunConfig::canonical() const {
    json j;
    j["seed"] = seed;
    j["replicas"] = replicas;
    json& l = j["lattice"];
    l["kind"] = lattice_kind_name(lattice.kind);
    if (lattice.kind == LatticeKind::Gasket) {
        l["n_ambient"] = lattice.n_ambient;
        l["levels"] = lattice.levels;
    } else {
        l["d1"] = lattice.d1;
        l["d2"] = lattice.d2;
    }
    l["metric"] = lattice.metric == Metric::Euclidean ? "euclidean" : "graph";
    l["measure_cm"] = lattice.measure_cm;
    l["measure_seed"] = lattice.measure_seed;
    json& e = j["environment"];
    e["variant"] = variant_name(environment.variant);
    e["seed"] = environment_seed();
    if (environment.variant == EnvVariant::PaperExample) {
        e["eps"] = environment.eps;
        e["delta"] = environment.delta;
        e["p"] = environment.p;
        e["q"] = environment.q;
        e["zero_prob"] = environment.zero_prob;
    } else if (environment.variant == EnvVariant::DiscreteMixture) {
        e["atoms"] = json::array();
        for (const auto& a : environment.mixture) e["atoms"].push_back({{"coeff", a.coeff}, {"power", a.power}, {"prob", a.prob}});
    }
    json& p = j["process"];
    p["alpha"] = process.alpha;
    p["variant"] = process.variant;
    p["delta"] = process.delta;
    p["x0"] = process.x0;
    p["R"] = process.R;
    p["truncated"] = process.truncated;
    p["n"] = process.n;
    for (const auto& [k, v] : sections.items()) j[k] = v;
    if (!experiments.empty()) j["experiment"] = experiments;
    return j;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical().dump()); }

std::uint64_t RunConfig::environment_seed() const { return env_seed ? *env_seed : mix_seed(seed, "environment"); }

std::uint64_t RunConfig::module_seed(const std::string& module) const { return mix_seed(seed, module); }

std::shared_ptr<const Lattice> RunConfig::make_lattice() const { return std::make_shared<const Lattice>(lattice); }

std::shared_ptr<const ConductanceField> RunConfig::make_field() const {
    return std::make_shared<const ConductanceField>(make_lattice(), environment, environment_seed());
}

Vertex RunConfig::start_vertex() const {
    Vertex v(lattice.ambient_dim());
    for (std::size_t i = 0; i < process.x0.size(); ++i) v[i] = process.x0[i];
    return v;
}

ProcessSpec RunConfig::process_spec() const {
    ProcessSpec s;
    if (process.variant == "truncated") s = ProcessSpec::truncated(process.alpha, process.delta);
    else if (process.variant == "localized") s = ProcessSpec::localized(process.alpha, start_vertex(), process.R, process.truncated);
    else s = ProcessSpec::full(process.alpha);
    s.n = process.n;
    return s;
}

const json& RunConfig::section(const std::string& name) const {
    static const json empty = json::object();
    auto it = sections.find(name);
    return it == sections.end() ? empty : *it;
}

RunConfig experiment_config(const RunConfig& base, const json& block) {
    json tree = base.canonical();
    tree.erase("experiment");
    // An explicit variant switch replaces the table instead of patching it.
    for (const char* t : {"lattice", "environment", "process"}) {
        if (!block.contains(t)) continue;
        const auto& over = block.at(t);
        if (!over.is_object()) bad(std::string("experiment.") + t, "expected a table");
        const bool replace = (std::string(t) == "lattice" && over.contains("kind")) ||
                             (std::string(t) == "environment" && over.contains("variant"));
        if (replace) {
            json fresh = over;
            if (std::string(t) == "environment" && !fresh.contains("seed")) fresh["seed"] = tree[t]["seed"];
            tree[t] = fresh;
        } else {
            tree[t].merge_patch(over);
        }
    }
    json exp = block;
    for (const char* t : {"lattice", "environment", "process"}) exp.erase(t);
    tree["experiment_block"] = exp;
    RunConfig c = config_from_json(tree);
    c.threads = base.threads;
    c.out_dir = base.out_dir;
    return c;
}

}  // namespace rcm
