#include "rcm/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rcm/assumptions.hpp"
#include "rcm/exact.hpp"
#include "rcm/parallel.hpp"
#include "rcm/stable.hpp"
#include "rcm/stats.hpp"
#include "rcm/walker.hpp"

namespace rcm::experiments {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Provenance tags for metric records.
constexpr const char* kRefStep = "walker: holding time Exp(C_x), jump law C_xy mu_y / C_x";
constexpr const char* kRefMeyer = "Meyer construction: prefix identity and big-jump hazard J(x, delta)";
constexpr const char* kRefOndiag = "truncated on-diagonal bound p(t,x,x) <= C t^(-d/alpha)";
constexpr const char* kRefExitMean = "two-sided exit-time bound E tau ~ r^alpha";
constexpr const char* kRefExitProb = "exit probability bound P(tau <= C0 r^alpha) <= 1/4";
constexpr const char* kRefNash = "Nash moment bound for the localized truncated walk";
constexpr const char* kRefPoincare = "scaled Poincare inequality, constant ~ r^alpha";
constexpr const char* kRefOsc = "Holder oscillation recursion sup q - inf q <= eta^k";
constexpr const char* kRefQip = "quenched invariance principle, marginal at t = 1";
constexpr const char* kRefEnv = "example conductance law";
constexpr const char* kRefGate = "moment-exponent admissibility thresholds";
constexpr const char* kRefKrylov = "Krylov-type hitting estimate";
constexpr const char* kRefTail = "environment tail probabilities p1-p6";
constexpr const char* kRefExi = "assumption (Exi.) on a finite grid";
constexpr const char* kPlumbing = "plumbing";
constexpr const char* kEngineering = "engineering threshold (no rate is proven)";

class Params {
public:
    explicit Params(const RunConfig& c) : b_(c.section("experiment_block")) {
        id_ = b_.contains("id") && b_.at("id").is_string() ? b_.at("id").get<std::string>() : "experiment";
    }

    double num(const char* k, double def) const {
        if (!b_.contains(k)) return def;
        if (!b_.at(k).is_number()) fail(k, "expected a number");
        return b_.at(k).get<double>();
    }
    std::size_t count(const char* k, std::size_t def) const {
        const double v = num(k, static_cast<double>(def));
        if (!(v >= 0.0) || std::floor(v) != v) fail(k, "expected a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    bool flag(const char* k, bool def) const {
        if (!b_.contains(k)) return def;
        if (!b_.at(k).is_boolean()) fail(k, "expected true or false");
        return b_.at(k).get<bool>();
    }
    std::string text(const char* k, const std::string& def) const {
        if (!b_.contains(k)) return def;
        if (!b_.at(k).is_string()) fail(k, "expected a string");
        return b_.at(k).get<std::string>();
    }
    std::vector<double> list(const char* k, std::vector<double> def) const {
        if (!b_.contains(k)) return def;
        const auto& v = b_.at(k);
        if (!v.is_array() || v.empty()) fail(k, "expected a non-empty array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail(k, "expected a non-empty array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    const json& raw() const { return b_; }
    const std::string& id() const { return id_; }

private:
    [[noreturn]] void fail(const char* k, const std::string& why) const {
        throw ConfigError("experiment." + id_ + "." + k + ": " + why);
    }
    const json& b_;
    std::string id_;
};

ExperimentReport start(const RunConfig& cfg, const char* kind) {
    ExperimentReport r;
    Params p(cfg);
    r.id = p.id();
    r.kind = kind;
    r.config_hash = cfg.hash();
    r.master_seed = cfg.seed;
    r.seed = mix_seed(cfg.seed, r.id);
    return r;
}

double s_exponent(const RunConfig& cfg) { return cfg.make_lattice()->d() + cfg.process.alpha; }

std::string fmt_key(const char* stem, double v) {
    std::ostringstream os;
    os << stem << v;
    return os.str();
}

void censor_gate(std::size_t censored, std::size_t total, ExperimentReport& rep) {
    const double frac = total ? static_cast<double>(censored) / static_cast<double>(total) : 0.0;
    rep.metrics.push_back(check("censored_fraction", frac, "<=", 1e-3, kPlumbing));
    if (frac > 1e-3) throw std::runtime_error("censored-path fraction above 1e-3");
}

ConductanceField seeded(const ConductanceField& base, std::uint64_t env_seed, std::size_t k) {
    return k == 0 ? base : base.with_seed(mix_seed(env_seed, k));
}

}  // namespace

// ---------------------------------------------------------------- metrics

void MetricRecord::evaluate() {
    const double se = std::isnan(stderr_) ? 0.0 : 3.0 * stderr_;
    if (!std::isfinite(value) && op != "info") {
        pass = false;
        return;
    }
    if (op == "<=") pass = value - se <= tol;
    else if (op == "<") pass = value - se < tol;
    else if (op == ">=") pass = value + se >= tol;
    else if (op == ">") pass = value + se > tol;
    else if (op == "in") pass = value + se >= tol && value - se <= tol_hi;
    else pass = true;
}

MetricRecord info(std::string name, double value, std::string ref, double se) {
    MetricRecord m;
    m.name = std::move(name);
    m.value = value;
    m.stderr_ = se;
    m.hard = false;
    m.ref = std::move(ref);
    return m;
}

MetricRecord check(std::string name, double value, std::string op, double tol, std::string ref, double se, bool hard) {
    MetricRecord m;
    m.name = std::move(name);
    m.value = value;
    m.stderr_ = se;
    m.op = std::move(op);
    m.tol = tol;
    m.hard = hard;
    m.ref = std::move(ref);
    m.evaluate();
    return m;
}

MetricRecord check_in(std::string name, double value, double lo, double hi, std::string ref, bool hard) {
    MetricRecord m;
    m.name = std::move(name);
    m.value = value;
    m.op = "in";
    m.tol = lo;
    m.tol_hi = hi;
    m.hard = hard;
    m.ref = std::move(ref);
    m.evaluate();
    return m;
}

bool ExperimentReport::pass() const {
    if (!error.empty()) return false;
    return std::all_of(metrics.begin(), metrics.end(), [](const MetricRecord& m) { return !m.hard || m.pass; });
}

const MetricRecord& ExperimentReport::metric(const std::string& name) const {
    for (const auto& m : metrics)
        if (m.name == name) return m;
    throw std::out_of_range("report " + id + " has no metric " + name);
}

bool ExperimentReport::has_metric(const std::string& name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const MetricRecord& m) { return m.name == name; });
}

json ExperimentReport::to_json(bool with_runtime) const {
    json j;
    j["id"] = id;
    j["kind"] = kind;
    j["version"] = version;
    j["config_hash"] = config_hash;
    j["seeds"] = {{"master", master_seed}, {"experiment", seed}, {"environment", environment_seeds}};
    j["metrics"] = json::array();
    for (const auto& m : metrics) {
        json r;
        r["name"] = m.name;
        r["value"] = std::isfinite(m.value) ? json(m.value) : json(std::isnan(m.value) ? "nan" : (m.value > 0 ? "inf" : "-inf"));
        r["stderr"] = std::isnan(m.stderr_) ? json(nullptr) : json(m.stderr_);
        r["op"] = m.op;
        if (m.op != "info") r["tolerance"] = m.op == "in" ? json::array({m.tol, m.tol_hi}) : json(m.tol);
        r["hard"] = m.hard;
        r["pass"] = m.pass;
        r["paper_ref"] = m.ref;
        j["metrics"].push_back(r);
    }
    j["data"] = data;
    j["notes"] = notes;
    if (!error.empty()) j["error"] = error;
    j["pass"] = pass();
    if (with_runtime) j["runtime_s"] = runtime_s;
    return j;
}

// ---------------------------------------------------------------- one-step law

ExperimentReport one_step_law(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "one_step_law");
    const auto field = cfg.make_field();
    const Lattice& lat = field->lattice();
    const ProcessSpec spec = cfg.process_spec();
    if (spec.variant == ProcessVariant::Localized) throw std::invalid_argument("one_step_law: localized variant not supported");
    rep.environment_seeds = {field->seed()};
    const Walker walker(field, spec);
    const Vertex x = cfg.start_vertex();
    const double s = s_exponent(cfg);
    const std::size_t draws = P.count("draws", 1'000'000);
    const double radius = P.num("direct_radius", 100.0);
    const auto trunc = spec.truncation();

    // Reference law: direct sum to `radius`, remaining mass in one tail bin.
    std::vector<Vertex> targets;
    std::vector<double> q;
    std::unordered_map<Vertex, std::size_t, VertexHash> bin;
    for_each_in_shell(lat, x, 0.0, radius, [&](const Vertex& y, double r) {
        if (trunc && r > *trunc) return;
        const double w = walker.effective_conductance(x, y, r);
        bin.emplace(y, targets.size());
        targets.push_back(y);
        q.push_back(w * std::pow(r, -s) * lat.mu(y));
    });
    double tail = 0.0;
    if (!trunc) tail = kernel_tail(*field, x, s, radius, default_direct_cutoff(lat));
    else if (*trunc > radius) tail = kernel_sum(*field, x, s, radius, *trunc);
    const double direct = stats::pairwise_sum(q);
    const double Cx = direct + tail;
    if (!(Cx > 0.0)) throw std::runtime_error("one_step_law: isolated start vertex");

    const std::size_t chunks = 64;
    std::vector<std::vector<std::uint64_t>> counts(chunks, std::vector<std::uint64_t>(targets.size() + 1, 0));
    std::vector<double> hold_sum(chunks, 0.0);
    std::vector<std::size_t> censored(chunks, 0);
    parallel_for(chunks, cfg.threads, [&](std::size_t c) {
        WalkStreams streams(mix_seed(rep.seed, c));
        const std::size_t n = draws / chunks + (c < draws % chunks ? 1 : 0);
        double hs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto st = walker.step(x, streams);
            if (st.status != StepStatus::Ok) {
                ++censored[c];
                continue;
            }
            hs += st.hold;
            auto it = bin.find(st.next);
            ++counts[c][it == bin.end() ? targets.size() : it->second];
        }
        hold_sum[c] = hs;
    });
    std::vector<double> freq(targets.size() + 1, 0.0);
    std::size_t total_cens = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total_cens += censored[c];
        for (std::size_t k = 0; k < freq.size(); ++k) freq[k] += static_cast<double>(counts[c][k]);
    }
    censor_gate(total_cens, draws, rep);
    const double accepted = static_cast<double>(draws - total_cens);
    double tv = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) tv += std::abs(freq[k] / accepted - q[k] / Cx);
    tv += std::abs(freq.back() / accepted - tail / Cx);
    tv *= 0.5;
    rep.metrics.push_back(check("total_variation", tv, "<=", P.num("tv_tol", 0.005), kRefStep));

    const double mean_hold = stats::pairwise_sum(hold_sum) / accepted;
    const double hold_rel = std::abs(mean_hold * Cx - 1.0);
    rep.metrics.push_back(check("holding_mean_rel_error", hold_rel, "<=", P.num("hold_tol", 0.01), kRefStep));
    rep.metrics.push_back(info("rate_C_x", Cx, kRefStep));

    // Nearest-neighbour jumps, pooled over all unit offsets.
    double p_unit = 0.0, f_unit = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        if (lat.distance(x, targets[k]) == 1.0) {
            p_unit += q[k] / Cx;
            f_unit += freq[k] / accepted;
        }
    }
    const double se_unit = std::sqrt(p_unit * (1.0 - p_unit) / accepted);
    rep.metrics.push_back(info("p_unit_jump_reference", p_unit, kRefStep));
    rep.metrics.push_back(check("p_unit_jump_z", se_unit > 0 ? std::abs(f_unit - p_unit) / se_unit : 0.0, "<=", 3.0, kRefStep));
    rep.data["p_unit_jump_empirical"] = f_unit;
    rep.data["tail_mass_reference"] = tail / Cx;
    rep.data["tail_mass_empirical"] = freq.back() / accepted;
    rep.data["draws"] = draws;
    return rep;
}

// ---------------------------------------------------------------- Meyer coupling

ExperimentReport meyer_coupling(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "meyer_coupling");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    const double alpha = cfg.process.alpha;
    const double delta = P.num("delta", 1.0);
    const double horizon = P.num("horizon", 20.0);
    const std::size_t pairs = P.count("pairs", 1000);
    const double level = P.num("level", 0.01);
    const Vertex x0 = cfg.start_vertex();
    const double s = s_exponent(cfg);

    std::vector<double> tdelta(pairs);
    std::vector<char> ok(pairs, 0), cens(pairs, 0);
    parallel_for(pairs, cfg.threads, [&](std::size_t i) {
        const auto mp = meyer_coupled_pair(field, alpha, delta, x0, horizon, mix_seed(rep.seed, i));
        tdelta[i] = mp.t_delta;
        ok[i] = mp.prefix_identical;
        cens[i] = mp.full.status != PathStatus::Complete || mp.truncated.status != PathStatus::Complete;
    });
    const auto n_ok = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    censor_gate(static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1)), pairs, rep);
    rep.metrics.push_back(check("prefix_identical_fraction", static_cast<double>(n_ok) / static_cast<double>(pairs), ">=",
                                1.0, kRefMeyer));

    std::sort(tdelta.begin(), tdelta.end());
    const double J = kernel_tail(*field, x0, s, delta, default_direct_cutoff(field->lattice()));
    rep.metrics.push_back(info("hazard_J", J, kRefMeyer));
    const std::size_t no_jump = static_cast<std::size_t>(std::count_if(tdelta.begin(), tdelta.end(), [](double t) { return !std::isfinite(t); }));
    rep.data["no_big_jump_by_horizon"] = no_jump;
    if (field->constant()) {
        // Constant environment: J(y, delta) does not depend on y, so T_delta ~ Exp(J).
        const double ks = stats::ks_statistic(tdelta, [&](double t) { return std::isfinite(t) ? 1.0 - std::exp(-J * t) : 1.0; });
        rep.metrics.push_back(check("ks_tdelta_exponential", ks, "<=", stats::ks_critical(pairs, level), kRefMeyer));
        rep.data["ks_p_value"] = stats::kolmogorov_tail(ks * std::sqrt(static_cast<double>(pairs)));
    } else {
        rep.notes.push_back("random environment: J varies along the path, KS against Exp(J) skipped");
    }
    // Union-bound shape: P(T_delta <= t) <= t sup_y J(y, delta).
    const double supJ = field->constant() ? J : envelope_tail_mass(*field, alpha, delta);
    for (double t : P.list("union_times", {0.05, 0.1, 0.25})) {
        const auto hits = static_cast<std::size_t>(std::upper_bound(tdelta.begin(), tdelta.end(), t) - tdelta.begin());
        const auto p = stats::proportion(hits, pairs);
        rep.metrics.push_back(check(fmt_key("union_bound_t", t), p.mean, "<=", t * supJ, kRefMeyer, p.se));
    }
    return rep;
}

// ---------------------------------------------------------------- on-diagonal decay

ExperimentReport ondiag_decay(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "ondiag_decay");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    const double alpha = cfg.process.alpha;
    const double d = field->lattice().d();
    const double theta = P.num("theta_prime", 0.5);
    const std::size_t points = P.count("points", 12);
    const double margin = P.num("slope_margin", 0.15);
    const Vertex x = cfg.start_vertex();
    std::vector<double> consts;
    json rows = json::array();
    for (double delta : P.list("deltas", {64.0, 128.0})) {
        const auto win = exact::ondiag_time_window(delta, alpha, theta);
        const auto times = exact::geometric_grid(win.lo, win.hi, points);
        const auto res = exact::ondiag_decay(*field, x, alpha, delta, times, P.num("audit_tol", 1e-8));
        const std::string tag = fmt_key("_delta", delta);
        rep.metrics.push_back(check_in("slope" + tag, res.fit.slope, -d / alpha - margin, -1e-12, kRefOndiag));
        rep.metrics.push_back(info("constant" + tag, res.fit.constant, kRefOndiag));
        rep.metrics.push_back(check("killed_mass" + tag, res.audit.killed_mass, "<=", P.num("audit_tol", 1e-8), kPlumbing));
        consts.push_back(res.fit.constant);
        rows.push_back({{"delta", delta},
                        {"t_lo", win.lo},
                        {"t_hi", win.hi},
                        {"times", res.fit.times},
                        {"p", res.fit.p},
                        {"slope_se", res.fit.slope_se},
                        {"window_radius", res.audit.radius},
                        {"window_states", res.audit.states}});
    }
    if (consts.size() >= 2) {
        const auto [lo, hi] = std::minmax_element(consts.begin(), consts.end());
        rep.metrics.push_back(check("constant_ratio", *hi / *lo, "<", P.num("constant_ratio_max", 2.0), kRefOndiag));
    }
    rep.data["fits"] = rows;
    return rep;
}

// ---------------------------------------------------------------- exit-time scaling

ExperimentReport exit_scaling(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "exit_scaling");
    const auto field0 = cfg.make_field();
    const double alpha = cfg.process.alpha;
    const Vertex x = cfg.start_vertex();
    const auto radii = P.list("radii", {8.0, 16.0, 32.0});
    const std::size_t seeds = P.count("env_seeds", 20);
    const std::size_t mc = P.count("mc_samples", 10000);
    const double level = P.num("level", 0.01);
    if (seeds < 1) throw ConfigError("experiment." + P.id() + ".env_seeds: must be >= 1");
    for (double r : radii)
        if (!(r >= 1.0)) throw ConfigError("experiment." + P.id() + ".radii: r must be >= 1");

    std::vector<ConductanceField> fields;
    for (std::size_t k = 0; k < seeds; ++k) {
        fields.push_back(seeded(*field0, field0->seed(), k));
        rep.environment_seeds.push_back(fields.back().seed());
    }
    const double c0 = P.num("c0", 0.0) > 0.0 ? P.num("c0", 0.0) : exact::fit_exit_c0(*field0, alpha, x, radii, 0.25);
    rep.metrics.push_back(info("c0", c0, kRefExitProb));

    // Exact Dirichlet quantities per (seed, r).
    const std::size_t nr = radii.size();
    std::vector<double> ratio(seeds * nr), pexit(seeds * nr), beyond(seeds * nr);
    parallel_for(seeds * nr, cfg.threads, [&](std::size_t i) {
        const auto& f = fields[i / nr];
        const double r = radii[i % nr];
        const auto mom = exact::dirichlet_exit_moments(f, alpha, x, r);
        ratio[i] = mom.mean_tau / std::pow(r, alpha);
        beyond[i] = mom.p_beyond_2r;
        const auto g = exact::ball_generator(f, alpha, x, r);
        pexit[i] = exact::dirichlet_exit_cdf(g, x, c0 * std::pow(r, alpha));
    });
    const auto [rlo, rhi] = std::minmax_element(ratio.begin(), ratio.end());
    rep.metrics.push_back(check("mean_ratio_spread", *rhi / *rlo, "<=", P.num("spread_max", 2.0), kRefExitMean));
    rep.metrics.push_back(info("mean_ratio_min", *rlo, kRefExitMean));
    rep.metrics.push_back(info("mean_ratio_max", *rhi, kRefExitMean));
    rep.metrics.push_back(check("p_exit_by_c0_max", *std::max_element(pexit.begin(), pexit.end()), "<=",
                                P.num("p_exit_max", 0.3), kRefExitProb));
    rep.data["mean_ratio"] = ratio;
    rep.data["p_exit_by_c0"] = pexit;
    rep.data["p_exit_beyond_2r"] = beyond;
    rep.data["radii"] = radii;

    // Monte Carlo against the exact Dirichlet law on the first seed.
    const auto fptr = std::make_shared<const ConductanceField>(fields.front());
    const Walker walker(fptr, ProcessSpec::full(alpha));
    std::size_t cens_total = 0;
    json mc_rows = json::array();
    for (std::size_t ri = 0; ri < nr && mc > 0; ++ri) {
        const double r = radii[ri];
        std::vector<double> tau(mc);
        std::vector<char> cens(mc, 0);
        parallel_for(mc, cfg.threads, [&](std::size_t i) {
            const auto ex = walker.exit_time(x, r, mix_seed(mix_seed(rep.seed, ri), i));
            tau[i] = ex.tau;
            cens[i] = ex.censored;
        });
        cens_total += static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1));
        const auto ms = stats::mean_se(tau);
        const double exact_mean = ratio[ri] * std::pow(r, alpha);
        std::sort(tau.begin(), tau.end());
        const auto g = exact::ball_generator(fields.front(), alpha, x, r);
        const auto cdf = exact::dirichlet_exit_cdf_sorted(g, x, tau);
        double ks = 0.0;
        const double n = static_cast<double>(mc);
        for (std::size_t i = 0; i < mc; ++i)
            ks = std::max({ks, std::abs(cdf[i] - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - cdf[i])});
        const std::string tag = fmt_key("_r", r);
        rep.metrics.push_back(check("mc_mean_z" + tag, std::abs(ms.mean - exact_mean) / ms.se, "<=", 3.0, kRefExitMean));
        rep.metrics.push_back(check("ks_mc_vs_exact" + tag, ks, "<=", stats::ks_critical(mc, level), kRefExitMean));
        mc_rows.push_back({{"r", r}, {"mc_mean", ms.mean}, {"mc_se", ms.se}, {"exact_mean", exact_mean}, {"ks", ks}});
    }
    rep.data["monte_carlo"] = mc_rows;

    // Degenerate ball {x}: tau ~ Exp(C_x).
    const std::size_t ndeg = P.count("degenerate_samples", 10000);
    if (ndeg > 0) {
        const double Cx = total_rate(fields.front(), x, alpha);
        std::vector<double> tau(ndeg);
        std::vector<char> cens(ndeg, 0);
        parallel_for(ndeg, cfg.threads, [&](std::size_t i) {
            const auto ex = walker.exit_time(x, 0.5, mix_seed(mix_seed(rep.seed, "degenerate"), i));
            tau[i] = ex.tau;
            cens[i] = ex.censored;
        });
        cens_total += static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1));
        const auto ms = stats::mean_se(tau);
        rep.metrics.push_back(check("degenerate_mean_z", std::abs(ms.mean - 1.0 / Cx) / ms.se, "<=", 3.0, kPlumbing));
        rep.data["degenerate"] = {{"mc_mean", ms.mean}, {"closed_form", 1.0 / Cx}};
    }
    censor_gate(cens_total, mc * nr + ndeg, rep);
    return rep;
}

// ---------------------------------------------------------------- Nash profile

ExperimentReport nash_profile(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "nash_profile");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    const double alpha = cfg.process.alpha;
    const double R = P.num("R", 32.0);
    const double theta = P.num("theta_prime", 0.5);
    const double lo = std::pow(R, theta * alpha), hi = std::pow(R, alpha);
    const auto times = exact::geometric_grid(lo, hi, P.count("points", 16));
    const auto prof = exact::nash_profile(*field, cfg.start_vertex(), alpha, R, times, P.num("audit_tol", 1e-6));
    rep.metrics.push_back(check("q_nondecreasing", prof.q_monotone ? 1.0 : 0.0, ">=", 1.0, kRefNash));
    const double C = exact::nash_fit_constant(prof, alpha, R, lo, hi);
    rep.metrics.push_back(check("fitted_constant", C, "<", P.num("constant_ceiling", 1e3), kRefNash));
    rep.metrics.push_back(info("nash_c", prof.c, kRefNash));
    rep.metrics.push_back(info("killed_mass", prof.audit.killed_mass, kPlumbing));
    rep.data = {{"times", prof.times}, {"M", prof.M}, {"Q", prof.Q}, {"K", prof.K}, {"window_radius", prof.audit.radius}};
    return rep;
}

// ---------------------------------------------------------------- Poincare

ExperimentReport poincare(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "poincare");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    const double alpha = cfg.process.alpha;
    const auto radii = P.list("radii", {4.0, 8.0, 16.0});
    std::vector<double> lr, lq, ratios;
    bool finite = true;
    for (double r0 : radii) {
        const auto res = exact::poincare_ratio(*field, alpha, cfg.start_vertex(), r0);
        ratios.push_back(res.ratio);
        finite = finite && std::isfinite(res.ratio) && res.ratio > 0.0;
        lr.push_back(std::log(r0));
        lq.push_back(std::log(res.ratio));
    }
    rep.metrics.push_back(check("ratios_finite", finite ? 1.0 : 0.0, ">=", 1.0, kRefPoincare));
    if (finite && radii.size() >= 2) {
        const auto fit = stats::fit_line(lr, lq);
        const double tol = P.num("slope_tol", 0.2);
        rep.metrics.push_back(check_in("loglog_slope", fit.slope, alpha - tol, alpha + tol, kRefPoincare));
        rep.data["slope_se"] = fit.slope_se;
    }
    rep.data["radii"] = radii;
    rep.data["ratios"] = ratios;
    return rep;
}

// ---------------------------------------------------------------- oscillation

ExperimentReport oscillation(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "oscillation");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    exact::OscillationSpec os;
    os.alpha = cfg.process.alpha;
    os.x0 = cfg.start_vertex();
    os.r = P.num("r", 64.0);
    os.xi = P.num("xi", 0.25);
    os.levels = static_cast<int>(P.count("levels", 3));
    os.time_points = static_cast<int>(P.count("time_points", 16));
    os.c0 = P.num("c0", 0.0);
    if (!(os.c0 > 0.0)) {
        const double rr[] = {1.0, 4.0, 16.0, os.r};
        os.c0 = exact::fit_exit_c0(*field, os.alpha, os.x0, rr, 0.25);
    }
    const auto res = exact::parabolic_oscillation(*field, os);
    rep.metrics.push_back(info("c0", os.c0, kRefExitProb));
    rep.metrics.push_back(check("eta", res.eta, "<", 1.0, kRefOsc));
    rep.metrics.push_back(info("osc_monotone", res.monotone ? 1.0 : 0.0, kRefOsc));
    rep.data = {{"radii", res.radii}, {"osc", res.osc}, {"horizon", res.horizon}};
    if (P.flag("constant_check", true)) {
        os.data = exact::BoundaryData::Constant;
        const auto flat = exact::parabolic_oscillation(*field, os);
        rep.metrics.push_back(check("constant_data_osc", *std::max_element(flat.osc.begin(), flat.osc.end()), "<=", 1e-10, kPlumbing));
    }
    return rep;
}

// ---------------------------------------------------------------- marginal convergence

ExperimentReport marginal_convergence(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "marginal_convergence");
    const auto field0 = cfg.make_field();
    const Lattice& lat = field0->lattice();
    if (lat.kind() != LatticeKind::FullLattice) throw std::invalid_argument("marginal_convergence: needs the full lattice");
    const double alpha = cfg.process.alpha;
    const int d = lat.dim();
    if (!field0->constant()) {
        const auto gate = validate_moment_exponents(d, alpha, cfg.environment.p, cfg.environment.q, alpha < 1.0);
        rep.metrics.push_back(check("dimension_gate_margin", d - gate.dimension_threshold, ">", 0.0, kRefQip));
        if (!gate.dimension_ok) throw std::invalid_argument("marginal_convergence: dimension gate d > threshold fails");
    }
    std::vector<double> ns = P.list("ns", {4.0, 16.0, 64.0});
    std::sort(ns.begin(), ns.end());
    const std::size_t paths = P.count("paths", 10000);
    const std::size_t seeds = P.count("env_seeds", 1);
    const double t = P.num("t", 1.0);
    const double ks_max = P.num("ks_max", 0.05);
    const Vertex x0 = lat.origin();
    const double c = stable::limit_scale_constant(d, alpha);

    rep.notes.push_back("KS thresholds are engineering tolerances; the limit theorem gives no rate");
    json rows = json::array();
    double kappa = 0.0;
    std::size_t cens_total = 0;
    const double sd = stats::ks_null_sd(paths);
    for (std::size_t k = 0; k < seeds; ++k) {
        const auto fk = std::make_shared<const ConductanceField>(seeded(*field0, field0->seed(), k));
        rep.environment_seeds.push_back(fk->seed());
        std::vector<std::vector<double>> samples(ns.size());
        // Largest n first, since the time factor is fitted there.
        for (std::size_t ni = ns.size(); ni-- > 0;) {
            ProcessSpec spec = ProcessSpec::full(alpha);
            spec.n = static_cast<std::int64_t>(ns[ni]);
            const Walker walker(fk, spec);
            const double n = ns[ni];
            const double T = std::pow(n, alpha) * t;
            std::vector<double> v(paths);
            std::vector<char> cens(paths, 0);
            parallel_for(paths, cfg.threads, [&](std::size_t i) {
                const auto e = walker.simulate_endpoint(x0, T, mix_seed(mix_seed(mix_seed(rep.seed, k), ni), i));
                v[i] = static_cast<double>(e.position[0]) / n;
                cens[i] = e.status != PathStatus::Complete;
            });
            cens_total += static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1));
            std::sort(v.begin(), v.end());
            samples[ni] = std::move(v);
        }
        if (k == 0) {
            // Time factor kappa: reference scale c * kappa * t matched on the IQR at the largest n.
            const auto& top = samples.back();
            const double iqr = stats::quantile_sorted(top, 0.75) - stats::quantile_sorted(top, 0.25);
            const double iqr_unit = 2.0 * stable::quantile_1d({alpha, 1, c * t}, 0.75);
            kappa = std::pow(iqr / iqr_unit, alpha);
            rep.metrics.push_back(info("time_factor", kappa, kEngineering));
        }
        const stable::StableLaw law{alpha, 1, c * kappa * t};
        std::vector<double> ks(ns.size());
        for (std::size_t ni = 0; ni < ns.size(); ++ni) {
            std::map<double, double> cache;
            ks[ni] = stats::ks_statistic(samples[ni], [&](double v) {
                auto it = cache.find(v);
                if (it != cache.end()) return it->second;
                const double f = stable::cdf_1d(law, v);
                cache.emplace(v, f);
                return f;
            });
        }
        const std::string tag = seeds > 1 ? "_seed" + std::to_string(k) : "";
        for (std::size_t ni = 0; ni < ns.size(); ++ni)
            rep.metrics.push_back(info(fmt_key(("ks" + tag + "_n").c_str(), ns[ni]), ks[ni], kEngineering, sd));
        if (P.flag("require_decrease", true))
            for (std::size_t ni = 1; ni < ns.size(); ++ni)
                rep.metrics.push_back(check(fmt_key(("ks_increase" + tag + "_n").c_str(), ns[ni]), ks[ni] - ks[ni - 1], "<=",
                                            3.0 * sd * std::sqrt(2.0), kEngineering));
        rep.metrics.push_back(check("ks_max_n" + tag, ks.back(), "<", ks_max, kEngineering));
        rows.push_back({{"env_seed", fk->seed()}, {"ns", ns}, {"ks", ks}});
    }
    censor_gate(cens_total, paths * ns.size() * seeds, rep);
    rep.data = {{"runs", rows}, {"limit_scale_constant", c}, {"paths", paths}};
    return rep;
}

// ---------------------------------------------------------------- environment law

ExperimentReport environment_law(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "environment_law");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    const std::size_t draws = P.count("draws", 1'000'000);
    const double atom_sigma = P.num("atom_sigma", 4.0);
    const double mean_sigma = P.num("mean_sigma", 3.0);
    const auto& spec = field->spec();
    json rows = json::array();
    for (double r : P.list("radii", {2.0, 8.0, 64.0})) {
        const auto k = static_cast<std::int64_t>(r);
        if (static_cast<double>(k) != r || k < 1) throw ConfigError("experiment." + P.id() + ".radii: expected integers >= 1");
        const auto pairs = line_pairs(field->lattice(), k, draws);
        std::vector<double> w(pairs.size());
        parallel_for(pairs.size(), cfg.threads, [&](std::size_t i) { w[i] = field->conductance(pairs[i].first, pairs[i].second); });
        // Atoms with equal values are indistinguishable; merge them.
        const AtomLaw law = spec.law(r);
        std::map<double, double> atoms;
        for (std::size_t a = 0; a < law.n; ++a) atoms[law.value[a]] += law.prob[a];
        std::map<double, std::size_t> hits;
        std::size_t unmatched = 0;
        for (double v : w) {
            if (atoms.count(v)) ++hits[v];
            else ++unmatched;
        }
        const double n = static_cast<double>(w.size());
        const std::string tag = fmt_key("_r", r);
        rep.metrics.push_back(check("unmatched_values" + tag, static_cast<double>(unmatched), "<=", 0.0, kPlumbing));
        double worst = 0.0;
        json freq = json::array();
        for (const auto& [val, p] : atoms) {
            const double f = static_cast<double>(hits[val]) / n;
            const double se = std::sqrt(p * (1.0 - p) / n);
            const double z = se > 0.0 ? std::abs(f - p) / se : (f == p ? 0.0 : kNaN);
            worst = std::max(worst, std::isnan(z) ? std::numeric_limits<double>::infinity() : z);
            freq.push_back({{"value", val}, {"prob", p}, {"freq", f}, {"z", z}});
            if (val == 0.0) rep.metrics.push_back(check("zero_atom_z" + tag, z, "<=", atom_sigma, kRefEnv));
        }
        rep.metrics.push_back(check("atom_z_max" + tag, worst, "<=", atom_sigma, kRefEnv));
        const auto ms = stats::mean_se(w);
        const double mz = ms.se > 0.0 ? std::abs(ms.mean - spec.mean(r)) / ms.se : std::abs(ms.mean - spec.mean(r));
        rep.metrics.push_back(check("mean_z" + tag, mz, "<=", mean_sigma, kRefEnv));
        rows.push_back({{"r", r}, {"atoms", freq}, {"mean", ms.mean}, {"mean_se", ms.se}, {"mean_reference", spec.mean(r)}});
    }
    rep.data["radii"] = rows;
    return rep;
}

// ---------------------------------------------------------------- moment gate

ExperimentReport moment_gate(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "moment_gate");
    json cases = P.raw().contains("cases") ? P.raw().at("cases")
                                           : json::array({{{"d", 5}, {"alpha", 1.0}, {"p_threshold", 3.0}, {"q_threshold", 1.4}}});
    json rows = json::array();
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& cs = cases[i];
        const int d = cs.at("d").get<int>();
        const double a = cs.at("alpha").get<double>();
        const bool lt1 = cs.value("alpha_lt1_rule", false);
        const auto g = validate_moment_exponents(d, a, cs.value("p", 0), cs.value("q", 0), lt1);
        const std::string tag = "_case" + std::to_string(i);
        if (cs.contains("p_threshold"))
            rep.metrics.push_back(check("p_threshold_error" + tag, std::abs(g.p_threshold - cs.at("p_threshold").get<double>()), "<=",
                                        1e-12, kRefGate));
        if (cs.contains("q_threshold"))
            rep.metrics.push_back(check("q_threshold_error" + tag, std::abs(g.q_threshold - cs.at("q_threshold").get<double>()), "<=",
                                        1e-12, kRefGate));
        rows.push_back({{"d", d}, {"alpha", a}, {"p_threshold", g.p_threshold}, {"q_threshold", g.q_threshold},
                        {"dimension_threshold", g.dimension_threshold}, {"dimension_ok", g.dimension_ok}});
    }
    // The configured environment, for the record.
    if (cfg.environment.variant == EnvVariant::PaperExample && cfg.lattice.kind != LatticeKind::Gasket) {
        const auto g = validate_moment_exponents(cfg.lattice.ambient_dim(), cfg.process.alpha, cfg.environment.p,
                                                 cfg.environment.q, cfg.process.alpha < 1.0);
        rep.metrics.push_back(info("configured_admissible", g.admissible ? 1.0 : 0.0, kRefGate));
    }
    rep.data["cases"] = rows;
    return rep;
}

// ---------------------------------------------------------------- Krylov probe

ExperimentReport krylov_probe(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "krylov_probe");
    const auto field0 = cfg.make_field();
    const Lattice& lat = field0->lattice();
    const double alpha = cfg.process.alpha;
    const Vertex x = cfg.start_vertex();
    const auto radii = P.list("radii", {16.0, 32.0});
    const std::size_t samples = P.count("samples", 2000);
    const std::size_t seeds = P.count("env_seeds", 3);
    const std::string set = P.text("set", "upper_half");
    if (set != "upper_half" && set != "full" && set != "empty")
        throw ConfigError("experiment." + P.id() + ".set: expected upper_half, full or empty");
    for (double r : radii)
        if (lat.kind() == LatticeKind::Gasket && r > static_cast<double>(lat.gasket_exit_distance(x)))
            throw std::invalid_argument("krylov_probe: cylinder exceeds the generated window");
    double c0 = P.num("c0", 0.0);
    if (!(c0 > 0.0)) c0 = exact::fit_exit_c0(*field0, alpha, x, radii, 0.25);
    rep.metrics.push_back(info("c0", c0, kRefExitProb));
    auto dist = [&](const Vertex& v) { return lat.kind() == LatticeKind::Gasket ? lat.distance(v, x) : std::sqrt(squared_norm(v - x)); };

    double worst = 1.0, worst_se = 0.0;
    json rows = json::array();
    std::size_t cens_total = 0;
    for (std::size_t k = 0; k < seeds; ++k) {
        const auto fk = std::make_shared<const ConductanceField>(seeded(*field0, field0->seed(), k));
        rep.environment_seeds.push_back(fk->seed());
        const Walker walker(fk, ProcessSpec::full(alpha));
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            const double r = radii[ri];
            // A = [a, b] x B(x, r/2) inside Q(0, x, r/2); the walk must reach A before leaving B(x, r).
            const double b = c0 * std::pow(r / 2.0, alpha);
            const double a = set == "upper_half" ? b / 2.0 : 0.0;
            std::vector<char> hit(samples, 0), cens(samples, 0);
            if (set != "empty") {
                parallel_for(samples, cfg.threads, [&](std::size_t i) {
                    const auto path = walker.simulate_path(x, b, mix_seed(mix_seed(mix_seed(rep.seed, k), ri), i));
                    cens[i] = path.status != PathStatus::Complete;
                    // The walk sits at pos on [previous event, e.time); that interval meets [a, b] iff e.time > a.
                    Vertex pos = x;
                    for (const auto& e : path.events) {
                        if (e.time > a && dist(pos) <= r / 2.0) {
                            hit[i] = 1;
                            return;
                        }
                        pos = e.to;
                        if (dist(pos) > r) return;
                    }
                    hit[i] = dist(pos) <= r / 2.0;
                });
            }
            cens_total += static_cast<std::size_t>(std::count(cens.begin(), cens.end(), 1));
            const auto p = stats::proportion(static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1)), samples);
            rows.push_back({{"env_seed", fk->seed()}, {"r", r}, {"p", p.mean}, {"se", p.se}, {"a", a}, {"b", b}});
            if (p.mean < worst) {
                worst = p.mean;
                worst_se = p.se;
            }
        }
    }
    censor_gate(cens_total, samples * radii.size() * seeds, rep);
    if (set == "empty") rep.metrics.push_back(check("hit_probability_max", worst, "<=", 0.0, kPlumbing));
    else rep.metrics.push_back(check("hit_probability_min", worst, ">=", P.num("min_probability", 0.05), kRefKrylov, worst_se));
    rep.data["runs"] = rows;
    return rep;
}

// ---------------------------------------------------------------- tail probes

ExperimentReport tail_probe(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "tail_probe");
    const auto lattice = cfg.make_lattice();
    rep.environment_seeds = {cfg.environment_seed()};
    assumptions::TailProbeSpec sp;
    sp.which = assumptions::parse_tail_kind(P.text("which", "p2"));
    sp.x = cfg.start_vertex();
    sp.R = P.num("R", 8.0);
    sp.c0_star = P.num("c0_star", 2.0);
    sp.c0 = P.num("c0", 0.75);
    sp.volume_ratio = P.num("volume_ratio", 1.0);
    sp.alpha = cfg.process.alpha;
    sp.n = static_cast<std::int64_t>(P.count("n", 1));
    sp.replications = P.count("replications", 1000);
    sp.seed = cfg.environment_seed();
    const auto eps = P.list("eps", {0.1});
    sp.eps0 = eps.front();
    const auto rs = P.list("r_grid", {8.0, 16.0, 32.0});
    json rows = json::array();
    std::vector<std::vector<double>> lx(eps.size()), ly(eps.size());
    for (double r : rs) {
        sp.r = r;
        const auto curve = assumptions::estimate_tail_curve(sp, cfg.environment, lattice, eps, cfg.threads);
        for (std::size_t e = 0; e < eps.size(); ++e) {
            rows.push_back({{"r", r}, {"eps", eps[e]}, {"p", curve[e].estimate}, {"se", curve[e].stderr_}, {"hits", curve[e].hits}});
            if (curve[e].hits > 0) {
                lx[e].push_back(std::log(r));
                ly[e].push_back(std::log(curve[e].estimate));
            }
        }
    }
    for (std::size_t e = 0; e < eps.size(); ++e) {
        if (lx[e].size() < 2) continue;
        const auto fit = stats::fit_line(lx[e], ly[e]);
        const std::string name = fmt_key("slope_eps", eps[e]);
        if (P.raw().contains("slope_max")) rep.metrics.push_back(check(name, fit.slope, "<=", P.num("slope_max", 0.0), kRefTail, fit.slope_se));
        else rep.metrics.push_back(info(name, fit.slope, kRefTail, fit.slope_se));
    }
    rep.data["which"] = assumptions::to_string(sp.which);
    rep.data["estimates"] = rows;
    return rep;
}

// ---------------------------------------------------------------- (Exi.) check

ExperimentReport exi(const RunConfig& cfg) {
    Params P(cfg);
    auto rep = start(cfg, "exi");
    const auto field = cfg.make_field();
    rep.environment_seeds = {field->seed()};
    assumptions::ExiOptions opts;
    opts.ceiling = P.num("ceiling", opts.ceiling);
    opts.exi_prime = P.flag("exi_prime", false);
    opts.seed = rep.seed;
    const auto Rg = P.list("R_grid", {16.0, 32.0, 64.0});
    const auto rg = P.list("r_grid", {2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0});
    const auto res = assumptions::verify_exi(*field, cfg.process.alpha, P.num("theta", 0.9), Rg, rg, opts);
    for (const auto& c : res.conditions) {
        auto m = check(c.condition, c.worst, c.lower ? ">=" : "<=", c.lower ? (c.condition == "volume_c0" ? 0.5 : 1.0 / opts.ceiling) : opts.ceiling, kRefExi);
        m.pass = c.pass;
        rep.metrics.push_back(m);
    }
    rep.metrics.push_back(check("lemma_consistent", res.lemma_consistent ? 1.0 : 0.0, ">=", 1.0, kRefExi));
    rep.metrics.push_back(info("c_g", res.c_g, kRefExi));
    rep.metrics.push_back(info("lemma_lower_bound", res.lemma_lower_bound, kRefExi));
    json recs = json::array();
    for (const auto& r : res.records)
        recs.push_back({{"condition", r.condition}, {"R", r.R}, {"r", r.r}, {"x", r.x.str()}, {"value", r.value},
                        {"constant", r.constant}, {"pass", r.pass}});
    rep.data = {{"records", recs}, {"vertices_checked", res.vertices_checked}, {"sampled", res.sampled}};
    return rep;
}

// ---------------------------------------------------------------- suite

namespace {

using Runner = ExperimentReport (*)(const RunConfig&);

const std::vector<std::pair<std::string, Runner>>& registry() {
    static const std::vector<std::pair<std::string, Runner>> r = {
        {"one_step_law", one_step_law},   {"meyer_coupling", meyer_coupling},
        {"ondiag_decay", ondiag_decay},   {"exit_scaling", exit_scaling},
        {"nash_profile", nash_profile},   {"poincare", poincare},
        {"oscillation", oscillation},     {"marginal_convergence", marginal_convergence},
        {"environment_law", environment_law}, {"moment_gate", moment_gate},
        {"krylov_probe", krylov_probe},   {"tail_probe", tail_probe},
        {"exi", exi},
    };
    return r;
}

}  // namespace

std::vector<std::string> experiment_kinds() {
    std::vector<std::string> out;
    for (const auto& [k, _] : registry()) out.push_back(k);
    return out;
}

ExperimentReport run_experiment(const RunConfig& cfg) {
    const auto& blk = cfg.section("experiment_block");
    const std::string kind = blk.value("kind", "");
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    const auto& reg = registry();
    auto it = std::find_if(reg.begin(), reg.end(), [&](const auto& e) { return e.first == kind; });
    if (it == reg.end()) throw ConfigError("experiment." + blk.value("id", kind) + ".kind: unknown kind '" + kind + "'");
    try {
        rep = it->second(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        rep = start(cfg, kind.c_str());
        rep.error = e.what();
    }
    for (const auto& w : cfg.warnings) rep.notes.push_back("config: " + w);
    rep.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

SuiteResult run_suite(const RunConfig& manifest) {
    SuiteResult out;
    // Parse every block first so a bad entry fails before any work starts.
    std::vector<RunConfig> cfgs;
    for (const auto& blk : manifest.experiments) {
        auto c = experiment_config(manifest, blk);
        const std::string kind = blk.at("kind").get<std::string>();
        const auto kinds = experiment_kinds();
        if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
            throw ConfigError("experiment." + blk.at("id").get<std::string>() + ".kind: unknown kind '" + kind + "'");
        cfgs.push_back(std::move(c));
    }
    for (const auto& c : cfgs) {
        out.reports.push_back(run_experiment(c));
        out.pass = out.pass && out.reports.back().pass();
    }
    return out;
}

std::string summary_csv(const SuiteResult& suite) {
    std::ostringstream os;
    os << "id,kind,pass,hard_failures,metrics,config_hash,version,seed,runtime_s\n";
    for (const auto& r : suite.reports) {
        const auto fails = std::count_if(r.metrics.begin(), r.metrics.end(), [](const MetricRecord& m) { return m.hard && !m.pass; });
        os << r.id << ',' << r.kind << ',' << (r.pass() ? 1 : 0) << ',' << fails << ',' << r.metrics.size() << ','
           << r.config_hash << ',' << r.version << ',' << r.seed << ',' << r.runtime_s << '\n';
    }
    return os.str();
}

void write_reports(const SuiteResult& suite, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    for (const auto& r : suite.reports) {
        std::ofstream f(fs::path(out_dir) / (r.id + ".json"));
        if (!f) throw std::runtime_error("cannot write report to " + out_dir);
        f << r.to_json().dump(2) << '\n';
    }
    std::ofstream f(fs::path(out_dir) / "summary.csv");
    if (!f) throw std::runtime_error("cannot write summary to " + out_dir);
    f << summary_csv(suite);
}

}  // namespace rcm::experiments
