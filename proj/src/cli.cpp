#include "rcm/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rcm/exact.hpp"
#include "rcm/experiments.hpp"
#include "rcm/parallel.hpp"
#include "rcm/stable.hpp"
#include "rcm/walker.hpp"

namespace rcm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::size_t replicas = 0;
    std::vector<CLI::Option*> seed_opt, threads_opt, replicas_opt;
};

bool given(const std::vector<CLI::Option*>& opts) {
    for (auto* o : opts)
        if (o->count() > 0) return true;
    return false;
}

void add_common(CLI::App* sc, Common& c) {
    sc->add_option("--config", c.config, "TOML config file");
    sc->add_option("--out", c.out, "output file or directory (inside the configured output directory)");
    c.seed_opt.push_back(sc->add_option("--seed", c.seed, "master seed"));
    c.threads_opt.push_back(sc->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber));
    c.replicas_opt.push_back(sc->add_option("--replicas", c.replicas, "number of replicas")->check(CLI::PositiveNumber));
}

RunConfig load(const Common& c, const EnvLookup& env) {
    json tree = c.config.empty() ? json::object() : parse_toml_file(c.config);
    apply_env_overrides(tree, env);
    if (given(c.seed_opt)) tree["seed"] = c.seed;
    if (given(c.replicas_opt)) tree["replicas"] = c.replicas;
    if (given(c.threads_opt)) tree["threads"] = c.threads;
    RunConfig cfg = config_from_json(tree);
    if (!tree.contains("threads")) cfg.threads = std::max(1u, std::thread::hardware_concurrency());
    return cfg;
}

std::string header(const RunConfig& cfg) {
    std::ostringstream os;
    os << "# rcm " << kVersion << " config_hash=" << cfg.hash() << " seed=" << cfg.seed
       << " environment_seed=" << cfg.environment_seed() << '\n';
    return os.str();
}

// Writes to `path`, or to `fallback` when path is empty.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (path.empty()) return;
        const fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        file_.open(p);
        if (!file_) throw std::runtime_error("cannot open " + path);
        os_ = &file_;
    }
    std::ostream& operator*() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError("bad number '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

// ---- verbs

int env_dump(const Common& c, double radius, std::ostream& out, const EnvLookup& env) {
    const RunConfig cfg = load(c, env);
    const auto field = cfg.make_field();
    const auto ball = field->lattice().ball(cfg.start_vertex(), radius);
    if (ball.size() > 5000) throw UsageError("env dump: ball has more than 5000 vertices; use a smaller --radius");
    Sink sink(resolve_output(cfg, c.out, ""), out);
    *sink << header(cfg) << "x,y,w\n";
    *sink << std::setprecision(17);
    for (std::size_t i = 0; i < ball.size(); ++i)
        for (std::size_t j = i + 1; j < ball.size(); ++j)
            *sink << ball[i].str() << ',' << ball[j].str() << ',' << field->conductance(ball[i], ball[j]) << '\n';
    return kOk;
}

int verify_exi(const Common& c, std::ostream& out, const EnvLookup& env) {
    RunConfig cfg = load(c, env);
    json blk = cfg.section("exi");
    blk["id"] = "exi";
    blk["kind"] = "exi";
    cfg.sections["experiment_block"] = blk;
    const auto rep = experiments::run_experiment(cfg);
    Sink sink(resolve_output(cfg, c.out, ""), out);
    *sink << rep.to_json().dump(2) << '\n';
    if (!rep.error.empty()) throw std::runtime_error(rep.error);
    return rep.pass() ? kOk : kAssertionFailure;
}

int simulate(const Common& c, std::ostream& out, const EnvLookup& env) {
    const RunConfig cfg = load(c, env);
    const auto field = cfg.make_field();
    const ProcessSpec spec = cfg.process_spec();
    const Walker walker(field, spec);
    const double horizon = cfg.section("simulate").value("horizon", 1.0);
    if (!(horizon > 0.0)) throw ConfigError("simulate.horizon: must be > 0");
    const Vertex x0 = cfg.start_vertex();
    const std::uint64_t base = cfg.module_seed("walker");
    const std::size_t n = cfg.replicas;
    std::vector<std::string> lines(n);
    const std::string hash = cfg.hash();
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const std::uint64_t seed = mix_seed(base, i);
        json rec;
        rec["replica"] = i;
        rec["seed"] = seed;
        rec["horizon"] = horizon;
        rec["n"] = spec.n;
        json ev = json::array();
        if (spec.n > 1) {
            const auto sp = simulate_scaled(walker, x0, horizon, seed);
            rec["status"] = to_string(sp.status);
            rec["start"] = std::vector<double>(sp.start.begin(), sp.start.begin() + sp.dim);
            for (const auto& e : sp.events) ev.push_back({e.time, std::vector<double>(e.pos.begin(), e.pos.begin() + sp.dim)});
        } else {
            const auto path = walker.simulate_path(x0, horizon, seed);
            rec["status"] = to_string(path.status);
            rec["start"] = std::vector<std::int64_t>(x0.c.begin(), x0.c.begin() + x0.dim);
            for (const auto& e : path.events)
                ev.push_back({e.time, std::vector<std::int64_t>(e.to.c.begin(), e.to.c.begin() + e.to.dim)});
            if (path.status != PathStatus::Complete) rec["stop_time"] = path.stop_time;
        }
        rec["events"] = ev;
        rec["config_hash"] = hash;
        rec["version"] = kVersion;
        lines[i] = rec.dump();
    });
    Sink sink(resolve_output(cfg, c.out, ""), out);
    for (const auto& l : lines) *sink << l << '\n';
    return kOk;
}

int exit_times(const Common& c, const std::string& radii, std::ostream& out, const EnvLookup& env) {
    const RunConfig cfg = load(c, env);
    const auto rs = parse_list(radii);
    const auto field = cfg.make_field();
    const Walker walker(field, cfg.process_spec());
    const Vertex x0 = cfg.start_vertex();
    const std::uint64_t base = cfg.module_seed("exit-times");
    Sink sink(resolve_output(cfg, c.out, ""), out);
    *sink << header(cfg) << "r,tau,exit_distance,censored\n" << std::setprecision(17);
    for (std::size_t k = 0; k < rs.size(); ++k) {
        if (!(rs[k] >= 1.0)) throw UsageError("exit-times: r must be >= 1");
        std::vector<Walker::ExitSample> ex(cfg.replicas);
        parallel_for(ex.size(), cfg.threads, [&](std::size_t i) { ex[i] = walker.exit_time(x0, rs[k], mix_seed(mix_seed(base, k), i)); });
        for (const auto& e : ex) *sink << rs[k] << ',' << e.tau << ',' << e.distance << ',' << (e.censored ? 1 : 0) << '\n';
    }
    return kOk;
}

struct ExactArgs {
    double window = 64.0;
    std::string t_grid = "geometric:0.5,64,16";
    double R = 32.0;
    double r = 8.0;
    int levels = 3;
};

int exact_verb(const std::string& verb, const Common& c, const ExactArgs& a, std::ostream& out, const EnvLookup& env) {
    const RunConfig cfg = load(c, env);
    const auto field = cfg.make_field();
    const double alpha = cfg.process.alpha;
    const Vertex x = cfg.start_vertex();
    Sink sink(resolve_output(cfg, c.out, ""), out);
    *sink << header(cfg) << std::setprecision(17);
    if (verb == "heatkernel") {
        auto states = field->lattice().ball(x, a.window);
        if (states.size() > 20000) throw UsageError("exact heatkernel: window has more than 20000 states");
        auto gs = exact::GeneratorSpec::conservative(alpha, std::move(states));
        gs.truncation = cfg.process_spec().truncation();
        const auto g = exact::build_generator(*field, gs);
        const auto times = parse_grid(a.t_grid);
        const auto rows = exact::heat_kernel_rows(g, x, times);
        *sink << "t,x,p,row_mass\n";
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double mass = exact::row_mass(g, rows[k]);
            for (std::size_t i = 0; i < g.size(); ++i) *sink << times[k] << ',' << g.states[i].str() << ',' << rows[k][i] << ',' << mass << '\n';
        }
    } else if (verb == "nash") {
        const auto times = parse_grid(a.t_grid);
        const auto prof = exact::nash_profile(*field, x, alpha, a.R, times);
        *sink << "t,M,Q,K\n";
        for (std::size_t k = 0; k < prof.times.size(); ++k)
            *sink << prof.times[k] << ',' << prof.M[k] << ',' << prof.Q[k] << ',' << prof.K[k] << '\n';
    } else if (verb == "exitcdf") {
        auto times = parse_grid(a.t_grid);
        std::sort(times.begin(), times.end());
        const auto g = exact::ball_generator(*field, alpha, x, a.r);
        const auto cdf = exact::dirichlet_exit_cdf_sorted(g, x, times);
        *sink << "t,cdf\n";
        for (std::size_t k = 0; k < times.size(); ++k) *sink << times[k] << ',' << cdf[k] << '\n';
    } else if (verb == "oscillation") {
        exact::OscillationSpec os;
        os.alpha = alpha;
        os.x0 = x;
        os.r = a.r;
        os.levels = a.levels;
        const double rr[] = {1.0, 4.0, 16.0, a.r};
        os.c0 = exact::fit_exit_c0(*field, alpha, x, rr, 0.25);
        const auto res = exact::parabolic_oscillation(*field, os);
        *sink << "# c0=" << os.c0 << " eta=" << res.eta << "\nk,radius,osc\n";
        for (std::size_t k = 0; k < res.osc.size(); ++k) *sink << k << ',' << res.radii[k] << ',' << res.osc[k] << '\n';
    }
    return kOk;
}

int stable_table(const Common& c, double alpha, int d, double scale, const std::string& grid, std::ostream& out,
                 const EnvLookup& env) {
    const RunConfig cfg = load(c, env);
    if (!(alpha > 0.0 && alpha <= 2.0)) throw UsageError("stable table: --alpha must lie in (0,2]");
    if (d < 1) throw UsageError("stable table: --d must be >= 1");
    if (!(scale > 0.0) && alpha == 2.0) throw UsageError("stable table: alpha = 2 needs an explicit --scale");
    stable::StableLaw law{alpha, 1, scale > 0.0 ? scale : stable::limit_scale_constant(d, alpha)};
    law.validate();
    auto xs = parse_grid(grid);
    std::sort(xs.begin(), xs.end());
    const auto cdf = stable::cdf_table(law, xs);
    Sink sink(resolve_output(cfg, c.out, ""), out);
    *sink << "# rcm " << kVersion << " config_hash=" << cfg.hash() << " alpha=" << alpha << " d=" << d << " scale=" << law.scale
          << "\nx,cdf\n"
          << std::setprecision(17);
    for (std::size_t i = 0; i < xs.size(); ++i) *sink << xs[i] << ',' << cdf[i] << '\n';
    return kOk;
}

int experiment_run(const Common& c, const std::string& manifest, std::ostream& out, const EnvLookup& env) {
    Common mc = c;
    mc.config = manifest.empty() ? c.config : manifest;
    if (mc.config.empty()) throw UsageError("experiment run: --manifest is required");
    const RunConfig cfg = load(mc, env);
    const std::string dir = resolve_output(cfg, c.out, cfg.out_dir.empty() ? "reports" : ".");
    const auto suite = experiments::run_suite(cfg);
    experiments::write_reports(suite, dir);
    for (const auto& r : suite.reports) {
        out << (r.pass() ? "PASS " : "FAIL ") << r.id << " (" << r.kind << ")";
        if (!r.error.empty()) out << " error: " << r.error;
        out << '\n';
    }
    out << suite.reports.size() << " experiment(s), reports in " << dir << '\n';
    return suite.pass ? kOk : kAssertionFailure;
}

}  // namespace

std::vector<double> parse_grid(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw UsageError("grid '" + spec + "': expected kind:values");
    const std::string kind = spec.substr(0, colon);
    const auto v = parse_list(spec.substr(colon + 1));
    if (kind == "list") return v;
    if (v.size() != 3 || v[2] < 1 || std::floor(v[2]) != v[2]) throw UsageError("grid '" + spec + "': expected lo,hi,n");
    const auto n = static_cast<std::size_t>(v[2]);
    try {
        if (kind == "geometric") return exact::geometric_grid(v[0], v[1], n);
        if (kind == "linear") return exact::linear_grid(v[0], v[1], n);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("grid: ") + e.what());
    }
    throw UsageError("grid '" + spec + "': kind must be geometric, linear or list");
}

std::string resolve_output(const RunConfig& cfg, const std::string& out, const std::string& fallback) {
    if (cfg.out_dir.empty()) return out.empty() ? fallback : out;
    const fs::path root = fs::path(cfg.out_dir).lexically_normal();
    const std::string name = out.empty() ? fallback : out;
    if (name.empty()) return name;
    fs::path p(name);
    if (p.is_relative()) p = root / p;
    p = p.lexically_normal();
    const auto rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") throw ConfigError("--out: " + name + " is outside the output directory " + cfg.out_dir);
    return p.string();
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    CLI::App app{"Random conductance models with stable-like jumps: simulation and exact computation", "rcm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));
    Common c;

    auto* envc = app.add_subcommand("env", "environment tools");
    envc->require_subcommand(1);
    auto* dump = envc->add_subcommand("dump", "realized conductances on a ball as CSV (x, y, w)");
    double radius = 4.0;
    dump->add_option("--radius", radius, "ball radius around process.x0")->check(CLI::NonNegativeNumber);
    add_common(dump, c);

    auto* verify = app.add_subcommand("verify", "assumption checks");
    verify->require_subcommand(1);
    auto* vexi = verify->add_subcommand("exi", "check (Exi.) on the grids of the [exi] table");
    add_common(vexi, c);

    auto* sim = app.add_subcommand("simulate", "sample paths as JSONL");
    add_common(sim, c);

    auto* ext = app.add_subcommand("exit-times", "exit times from balls as CSV");
    std::string radii = "8,16,32";
    ext->add_option("--r", radii, "comma-separated radii");
    add_common(ext, c);

    auto* ex = app.add_subcommand("exact", "exact finite-window computations");
    ex->require_subcommand(1);
    ExactArgs ea;
    std::string exact_verb_name;
    for (const char* v : {"heatkernel", "nash", "exitcdf", "oscillation"}) {
        auto* s = ex->add_subcommand(v, std::string("exact ") + v);
        s->add_option("--t-grid", ea.t_grid, "time grid: geometric:lo,hi,n | linear:lo,hi,n | list:a,b,...");
        if (std::string(v) == "heatkernel") s->add_option("--window", ea.window, "window radius");
        if (std::string(v) == "nash") s->add_option("--R", ea.R, "localization radius");
        if (std::string(v) == "exitcdf" || std::string(v) == "oscillation") s->add_option("--r", ea.r, "ball radius");
        if (std::string(v) == "oscillation") s->add_option("--levels", ea.levels, "nested cylinders");
        add_common(s, c);
        s->callback([&exact_verb_name, v] { exact_verb_name = v; });
    }

    auto* st = app.add_subcommand("stable", "stable-law tools");
    st->require_subcommand(1);
    auto* table = st->add_subcommand("table", "CDF of the 1-d projection on a grid");
    double alpha = 1.0, scale = 0.0;
    int d = 1;
    std::string grid = "linear:-10,10,201";
    table->add_option("--alpha", alpha, "stability index")->required();
    table->add_option("--d", d, "dimension of the limit");
    table->add_option("--scale", scale, "exponent scale (default: the lattice limit constant)");
    table->add_option("--grid", grid, "x grid");
    add_common(table, c);

    auto* exp = app.add_subcommand("experiment", "experiment suites");
    exp->require_subcommand(1);
    auto* run = exp->add_subcommand("run", "run a manifest; one JSON report per experiment plus summary.csv");
    std::string manifest;
    run->add_option("--manifest", manifest, "suite TOML");
    add_common(run, c);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (dump->parsed()) return env_dump(c, radius, out, env);
        if (vexi->parsed()) return verify_exi(c, out, env);
        if (sim->parsed()) return simulate(c, out, env);
        if (ext->parsed()) return exit_times(c, radii, out, env);
        if (!exact_verb_name.empty()) return exact_verb(exact_verb_name, c, ea, out, env);
        if (table->parsed()) return stable_table(c, alpha, d, scale, grid, out, env);
        if (run->parsed()) return experiment_run(c, manifest, out, env);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kAssertionFailure;
    }
    err << app.help();
    return kUsage;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr, [](const char* name) { return std::getenv(name); });
}

}  // namespace rcm::cli
