#include "rcm/exact.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "rcm/stats.hpp"

namespace rcm::exact {

namespace {

double dist(const Lattice& lat, const Vertex& x, const Vertex& y) {
    if (lat.kind() != LatticeKind::Gasket) return std::sqrt(squared_norm(x - y));
    return lat.distance(x, y);
}

struct Effective {
    const ConductanceField& field;
    const GeneratorSpec& spec;
    bool in_loc(const Vertex& v) const {
        const Lattice& lat = field.lattice();
        if (lat.kind() == LatticeKind::Gasket) return lat.distance(v, *spec.loc_center) <= spec.loc_radius;
        return squared_norm(v - *spec.loc_center) <= spec.loc_radius * spec.loc_radius + 1e-9;
    }
    double operator()(const Vertex& x, const Vertex& y, double r) const {
        if (spec.loc_center && !in_loc(x) && !in_loc(y)) return 1.0;
        return field.conductance_at(x, y, r);
    }
};

// Direct radius for exterior sums from x, and whether a mean-field tail is added beyond it.
struct ExteriorPlan {
    double direct = 0.0;
    bool tail = false;
    double tail_from = 0.0;
    double tail_to = std::numeric_limits<double>::infinity();
};

ExteriorPlan exterior_plan(const ConductanceField& field, const GeneratorSpec& spec, const Vertex& x) {
    const Lattice& lat = field.lattice();
    double cutoff = spec.leak_cutoff > 0.0 ? spec.leak_cutoff : default_direct_cutoff(lat);
    if (lat.kind() == LatticeKind::Gasket) cutoff = std::min(cutoff, static_cast<double>(lat.gasket_exit_distance(x)));
    ExteriorPlan p;
    if (spec.truncation && *spec.truncation <= cutoff) {
        p.direct = *spec.truncation;
        return p;
    }
    p.direct = cutoff;
    p.tail = true;
    p.tail_from = cutoff;
    if (spec.truncation) p.tail_to = *spec.truncation;
    return p;
}

double tail_between(const ConductanceField& field, const Vertex& x, double s, double from, double to) {
    double t = mean_field_tail(field, x, s, from);
    if (std::isfinite(to)) t -= mean_field_tail(field, x, s, to);
    return std::max(0.0, t);
}

// sum over y outside the window with pred(y) of effective rates; the mean-field
// tail is multiplied by tail_fraction.
template <class Pred>
double exterior_rate(const ConductanceField& field, const GeneratorSpec& spec, const GeneratorMatrix& g,
                     const Vertex& x, Pred pred, double tail_fraction) {
    const Lattice& lat = field.lattice();
    const bool counting = lat.spec().counting_measure();
    const double s = lat.d() + spec.alpha;
    const Effective eff{field, spec};
    const ExteriorPlan plan = exterior_plan(field, spec, x);
    double acc = 0.0, comp = 0.0;
    for_each_in_shell(lat, x, 0.0, plan.direct, [&](const Vertex& y, double r) {
        if (g.index.count(y) || !pred(y)) return;
        const double w = eff(x, y, r);
        if (w <= 0.0) return;
        const double v = w * std::pow(r, -s) * (counting ? 1.0 : lat.mu(y));
        const double t = acc + v;
        comp += (std::abs(acc) >= std::abs(v)) ? (acc - t) + v : (v - t) + acc;
        acc = t;
    });
    double total = acc + comp;
    if (plan.tail && tail_fraction > 0.0) total += tail_fraction * tail_between(field, x, s, plan.tail_from, plan.tail_to);
    return total;
}

}  // namespace

GeneratorSpec GeneratorSpec::conservative(double alpha, std::vector<Vertex> window) {
    GeneratorSpec s;
    s.alpha = alpha;
    s.window = std::move(window);
    return s;
}

GeneratorSpec GeneratorSpec::dirichlet(double alpha, std::vector<Vertex> window) {
    GeneratorSpec s = conservative(alpha, std::move(window));
    s.boundary = Boundary::Dirichlet;
    return s;
}

std::int32_t GeneratorMatrix::index_of(const Vertex& v) const {
    auto it = index.find(v);
    return it == index.end() ? -1 : it->second;
}

double GeneratorMatrix::max_rate() const {
    double m = 0.0;
    for (double d : diag) m = std::max(m, -d);
    return m;
}

double GeneratorMatrix::offdiag(std::size_t i, std::size_t j) const {
    for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        if (static_cast<std::size_t>(col[k]) == j) return val[k];
    return 0.0;
}

GeneratorMatrix build_generator(const ConductanceField& field, const GeneratorSpec& spec) {
    if (!(spec.alpha > 0.0 && spec.alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (spec.window.empty()) throw std::invalid_argument("build_generator: empty window");
    if (spec.truncation && !(*spec.truncation >= 1.0)) throw std::invalid_argument("build_generator: truncation must be >= 1");
    const Lattice& lat = field.lattice();
    const bool counting = lat.spec().counting_measure();
    const double s = lat.d() + spec.alpha;
    GeneratorMatrix g;
    g.volume_dim = lat.d();
    g.states = spec.window;
    const std::size_t n = g.states.size();
    g.index.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        lat.require(g.states[i]);
        if (!g.index.emplace(g.states[i], static_cast<std::int32_t>(i)).second)
            throw std::invalid_argument("build_generator: duplicate vertex in window");
    }
    g.mu.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.mu[i] = counting ? 1.0 : lat.mu(g.states[i]);
    const Effective eff{field, spec};
    g.row_ptr.assign(n + 1, 0);
    g.diag.assign(n, 0.0);
    g.leak.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double r = dist(lat, g.states[i], g.states[j]);
            if (spec.truncation && r > *spec.truncation) continue;
            const double w = eff(g.states[i], g.states[j], r);
            if (w <= 0.0) continue;
            const double q = w * std::pow(r, -s) * g.mu[j];
            g.col.push_back(static_cast<std::int32_t>(j));
            g.val.push_back(q);
            row += q;
        }
        g.row_ptr[i + 1] = static_cast<std::int64_t>(g.col.size());
        if (spec.boundary == Boundary::Dirichlet)
            g.leak[i] = exterior_rate(field, spec, g, g.states[i], [](const Vertex&) { return true; }, 1.0);
        g.diag[i] = -row - g.leak[i];
    }
    // Irreducibility of the window chain (positive rates only).
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        for (auto k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) {
            const auto j = static_cast<std::size_t>(g.col[k]);
            if (!seen[j]) {
                seen[j] = 1;
                ++reached;
                stack.push_back(j);
            }
        }
    }
    g.irreducible = reached == n;
    return g;
}

// ---------------------------------------------------------------- uniformization

PoissonWeights poisson_weights(double m, double tol) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("poisson_weights: bad mean");
    PoissonWeights pw;
    if (m == 0.0) {
        pw.w = {1.0};
        pw.mass = 1.0;
        return pw;
    }
    const double lm = std::log(m);
    auto lw = [&](double k) { return -m + k * lm - std::lgamma(k + 1.0); };
    const auto mode = static_cast<std::size_t>(std::floor(m));
    const double cut = tol * 1e-2;
    std::size_t lo = mode;
    while (lo > 0 && std::exp(lw(static_cast<double>(lo - 1))) >= cut) --lo;
    std::size_t hi = mode;
    for (;;) {
        const double next = std::exp(lw(static_cast<double>(hi + 1)));
        if (next < cut && static_cast<double>(hi + 1) > m) break;
        ++hi;
    }
    pw.left = lo;
    pw.w.resize(hi - lo + 1);
    for (std::size_t k = lo; k <= hi; ++k) pw.w[k - lo] = std::exp(lw(static_cast<double>(k)));
    pw.mass = stats::pairwise_sum(pw.w);
    return pw;
}

Uniformizer::Uniformizer(const GeneratorMatrix& g, UniformizationOptions opts) : g_(g), opts_(opts) {
    lambda_ = g.max_rate();
    if (!(lambda_ > 0.0)) lambda_ = 1.0;
}

void Uniformizer::check_budget(double t) const {
    if (!(t >= 0.0)) throw std::invalid_argument("uniformization: t must be >= 0");
    if (lambda_ * t > opts_.budget) throw std::runtime_error("uniformization budget exceeded");
}

void Uniformizer::step_row(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = g_.size();
    const double inv = 1.0 / lambda_;
    for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * (1.0 + g_.diag[i] * inv);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = in[i] * inv;
        if (a == 0.0) continue;
        for (auto k = g_.row_ptr[i]; k < g_.row_ptr[i + 1]; ++k) out[g_.col[k]] += a * g_.val[k];
    }
}

void Uniformizer::step_col(std::span<const double> in, std::span<double> out) const {
    const std::size_t n = g_.size();
    const double inv = 1.0 / lambda_;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (auto k = g_.row_ptr[i]; k < g_.row_ptr[i + 1]; ++k) s += g_.val[k] * in[g_.col[k]];
        out[i] = in[i] * (1.0 + g_.diag[i] * inv) + s * inv;
    }
}

namespace {

template <class Step>
std::vector<std::vector<double>> uniformize(std::span<const double> v0, std::span<const double> times, double lambda,
                                            double tol, Step step) {
    const std::size_t n = v0.size();
    std::vector<PoissonWeights> pws;
    std::size_t kmax = 0;
    for (double t : times) {
        pws.push_back(poisson_weights(lambda * t, tol));
        kmax = std::max(kmax, pws.back().left + pws.back().w.size() - 1);
    }
    std::vector<std::vector<double>> acc(times.size(), std::vector<double>(n, 0.0));
    // Weights are renormalized to unit mass, so constants and total mass are kept to rounding.
    std::vector<double> v(v0.begin(), v0.end()), next(n);
    for (std::size_t k = 0; k <= kmax; ++k) {
        for (std::size_t j = 0; j < times.size(); ++j) {
            const auto& pw = pws[j];
            if (k < pw.left || k >= pw.left + pw.w.size()) continue;
            const double w = pw.w[k - pw.left] / pw.mass;
            auto& a = acc[j];
            for (std::size_t i = 0; i < n; ++i) a[i] += w * v[i];
        }
        if (k == kmax) break;
        step(v, next);
        v.swap(next);
    }
    return acc;
}

}  // namespace

std::vector<std::vector<double>> Uniformizer::evolve_row(std::span<const double> v0, std::span<const double> times) const {
    if (v0.size() != g_.size()) throw std::invalid_argument("evolve_row: size mismatch");
    for (double t : times) check_budget(t);
    return uniformize(v0, times, lambda_, opts_.tol,
                      [this](const std::vector<double>& in, std::vector<double>& out) { step_row(in, out); });
}

std::vector<std::vector<double>> Uniformizer::evolve_col(std::span<const double> v0, std::span<const double> times,
                                                         std::span<const double> source) const {
    if (v0.size() != g_.size()) throw std::invalid_argument("evolve_col: size mismatch");
    if (!source.empty() && source.size() != g_.size()) throw std::invalid_argument("evolve_col: source size mismatch");
    for (double t : times) check_budget(t);
    const double inv = 1.0 / lambda_;
    return uniformize(v0, times, lambda_, opts_.tol, [&](const std::vector<double>& in, std::vector<double>& out) {
        step_col(in, out);
        for (std::size_t i = 0; i < source.size(); ++i) out[i] += source[i] * inv;
    });
}

std::vector<std::vector<double>> heat_kernel_rows(const GeneratorMatrix& g, const Vertex& x,
                                                  std::span<const double> times, const UniformizationOptions& opts) {
    const auto ix = g.index_of(x);
    if (ix < 0) throw std::invalid_argument("heat_kernel: start vertex outside the window");
    std::vector<double> v0(g.size(), 0.0);
    v0[static_cast<std::size_t>(ix)] = 1.0;
    auto rows = Uniformizer(g, opts).evolve_row(v0, times);
    for (auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) r[i] /= g.mu[i];
    return rows;
}

std::vector<double> heat_kernel(const GeneratorMatrix& g, double t, const Vertex& x, const UniformizationOptions& opts) {
    const double ts[1] = {t};
    return heat_kernel_rows(g, x, ts, opts).front();
}

double row_mass(const GeneratorMatrix& g, std::span<const double> p) {
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = p[i] * g.mu[i];
    return stats::pairwise_sum(m);
}

// ---------------------------------------------------------------- on-diagonal decay

TimeWindow ondiag_time_window(double delta, double alpha, double theta_prime) {
    if (!(theta_prime > 0.0 && theta_prime < 1.0)) throw std::invalid_argument("theta' outside (0,1)");
    TimeWindow w{2.0 * std::pow(delta, theta_prime * alpha), std::pow(delta, alpha)};
    if (!(w.lo < w.hi)) throw std::invalid_argument("empty time window [2 delta^{theta' alpha}, delta^alpha]");
    return w;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi >= lo) || n == 0) throw std::invalid_argument("geometric_grid: bad range");
    if (n == 1) return {lo};
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
    g.back() = hi;
    return g;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
    if (!(hi >= lo) || n == 0) throw std::invalid_argument("linear_grid: bad range");
    if (n == 1) return {lo};
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    g.back() = hi;
    return g;
}

OndiagFit ondiag_decay_fit(const GeneratorMatrix& g, const Vertex& x, std::span<const double> times, double alpha,
                           const UniformizationOptions& opts) {
    if (times.size() < 2) throw std::invalid_argument("ondiag_decay_fit: need at least two times");
    const auto ix = static_cast<std::size_t>(g.index_of(x));
    const auto rows = heat_kernel_rows(g, x, times, opts);
    OndiagFit f;
    f.times.assign(times.begin(), times.end());
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < times.size(); ++j) {
        const double p = rows[j][ix];
        if (!(p > 1e-300)) throw std::runtime_error("ondiag_decay_fit: kernel underflow");
        if (!(times[j] > 0.0)) throw std::invalid_argument("ondiag_decay_fit: times must be > 0");
        f.p.push_back(p);
        lx.push_back(std::log(times[j]));
        ly.push_back(std::log(p));
        f.constant = std::max(f.constant, p * std::pow(times[j], g.volume_dim / alpha));
    }
    const auto lf = stats::fit_line(lx, ly);
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.slope_se = lf.slope_se;
    return f;
}

OndiagResult ondiag_decay(const ConductanceField& field, const Vertex& x, double alpha, double delta,
                          std::span<const double> times, double audit_tol) {
    const double tmax = *std::max_element(times.begin(), times.end());
    double radius = 4.0 * delta;
    for (int attempt = 0; attempt < 8; ++attempt, radius *= 2.0) {
        auto spec = GeneratorSpec::dirichlet(alpha, field.lattice().ball(x, radius));
        spec.truncation = delta;
        const auto g = build_generator(field, spec);
        const auto row = heat_kernel(g, tmax, x);
        const double killed = 1.0 - row_mass(g, row);
        if (killed < audit_tol) {
            OndiagResult res;
            res.fit = ondiag_decay_fit(g, x, times, alpha);
            res.audit = {radius, g.size(), killed};
            return res;
        }
    }
    throw std::runtime_error("ondiag_decay: window audit failed");
}

// ---------------------------------------------------------------- Nash profile

NashProfile nash_profile(const ConductanceField& field, const Vertex& x, double alpha, double R,
                         std::span<const double> times, double audit_tol) {
    if (times.empty()) throw std::invalid_argument("nash_profile: empty time grid");
    if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0.0)
        throw std::invalid_argument("nash_profile: times must be ascending and >= 0");
    const Lattice& lat = field.lattice();
    const double d = lat.d();
    double radius = 4.0 * R;
    for (int attempt = 0; attempt < 8; ++attempt, radius *= 2.0) {
        auto spec = GeneratorSpec::dirichlet(alpha, lat.ball(x, radius));
        spec.truncation = R;
        spec.loc_center = x;
        spec.loc_radius = R;
        const auto g = build_generator(field, spec);
        const auto rows = heat_kernel_rows(g, x, times);
        const double killed = 1.0 - row_mass(g, rows.back());
        // Killed mass sits at distance <= radius + R when it leaves; 4 radius bounds its displacement.
        if (killed * 4.0 * radius >= audit_tol) continue;
        NashProfile prof;
        prof.times.assign(times.begin(), times.end());
        prof.audit = {radius, g.size(), killed};
        for (const auto& p : rows) {
            double m = 0.0, q = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (p[i] <= 0.0) continue;
                m += dist(lat, g.states[i], x) * p[i] * g.mu[i];
                q -= p[i] * std::log(p[i]) * g.mu[i];
            }
            prof.M.push_back(m);
            prof.Q.push_back(q);
        }
        prof.c = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < times.size(); ++j)
            if (times[j] > 0.0) prof.c = std::max(prof.c, (d / alpha) * std::log(times[j]) - prof.Q[j]);
        if (!std::isfinite(prof.c)) prof.c = 0.0;
        for (std::size_t j = 0; j < times.size(); ++j) {
            prof.K.push_back(times[j] > 0.0 ? (prof.Q[j] + prof.c - (d / alpha) * std::log(times[j])) / d : 0.0);
            if (j > 0 && prof.Q[j] < prof.Q[j - 1] - 1e-12) prof.q_monotone = false;
        }
        return prof;
    }
    throw std::runtime_error("nash_profile: window audit failed");
}

double nash_fit_constant(const NashProfile& prof, double alpha, double R, double lo, double hi) {
    const double Ra = std::pow(R, alpha);
    double c = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < prof.times.size(); ++j) {
        const double t = prof.times[j];
        if (t < lo || t > hi || t <= 0.0) continue;
        any = true;
        const double shape = R * std::sqrt(t / Ra) * (1.0 + std::log(Ra / t));
        c = std::max(c, prof.M[j] / shape);
    }
    if (!any) throw std::invalid_argument("nash_fit_constant: no grid point in the window");
    return c;
}

// ---------------------------------------------------------------- exit laws

GeneratorMatrix ball_generator(const ConductanceField& field, double alpha, const Vertex& x, double r) {
    return build_generator(field, GeneratorSpec::dirichlet(alpha, field.lattice().ball(x, r)));
}

std::vector<double> dirichlet_exit_cdf_sorted(const GeneratorMatrix& g, const Vertex& x,
                                              std::span<const double> sorted_times, const UniformizationOptions& opts) {
    if (!std::is_sorted(sorted_times.begin(), sorted_times.end()))
        throw std::invalid_argument("dirichlet_exit_cdf_sorted: times must be ascending");
    const auto ix = g.index_of(x);
    if (ix < 0) throw std::invalid_argument("dirichlet_exit_cdf: start outside the ball");
    const Uniformizer u(g, opts);
    std::vector<double> v(g.size(), 0.0);
    v[static_cast<std::size_t>(ix)] = 1.0;
    std::vector<double> out;
    out.reserve(sorted_times.size());
    double prev = 0.0;
    for (double t : sorted_times) {
        if (t < 0.0) throw std::invalid_argument("dirichlet_exit_cdf: t must be >= 0");
        if (t > prev) {
            const double dt[1] = {t - prev};
            v = u.evolve_row(v, dt).front();
            prev = t;
        }
        out.push_back(std::clamp(1.0 - stats::pairwise_sum(v), 0.0, 1.0));
    }
    // The mass deficit is nondecreasing; remove roundoff wiggles.
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
    return out;
}

double dirichlet_exit_cdf(const GeneratorMatrix& g, const Vertex& x, double t, const UniformizationOptions& opts) {
    const double ts[1] = {t};
    return dirichlet_exit_cdf_sorted(g, x, ts, opts).front();
}

ExitMoments dirichlet_exit_moments(const ConductanceField& field, double alpha, const Vertex& x, double r) {
    const Lattice& lat = field.lattice();
    const auto g = ball_generator(field, alpha, x, r);
    const auto n = static_cast<Eigen::Index>(g.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < g.size(); ++i) {
        trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -g.diag[i]);
        for (auto k = g.row_ptr[i]; k < g.row_ptr[i + 1]; ++k) trip.emplace_back(static_cast<int>(i), g.col[k], -g.val[k]);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw std::runtime_error("dirichlet_exit_moments: factorization failed");
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd tau = lu.solve(ones);
    // Rate of landing outside B(x, 2r) = leak minus the rate into the annulus r < rho <= 2r.
    const bool counting = lat.spec().counting_measure();
    const double s = lat.d() + alpha;
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vertex& z = g.states[i];
        double mid = 0.0;
        for_each_in_shell(lat, z, 0.0, 3.0 * r, [&](const Vertex& y, double rr) {
            if (g.index.count(y)) return;
            if (dist(lat, y, x) > 2.0 * r) return;
            const double w = field.conductance_at(z, y, rr);
            if (w > 0.0) mid += w * std::pow(rr, -s) * (counting ? 1.0 : lat.mu(y));
        });
        b[static_cast<Eigen::Index>(i)] = std::max(0.0, g.leak[i] - mid);
    }
    const Eigen::VectorXd h = lu.solve(b);
    const auto ix = static_cast<Eigen::Index>(g.index_of(x));
    return {tau[ix], std::clamp(h[ix], 0.0, 1.0)};
}

double fit_exit_c0(const ConductanceField& field, double alpha, const Vertex& x, std::span<const double> radii,
                   double level) {
    if (radii.empty()) throw std::invalid_argument("fit_exit_c0: no radii");
    std::vector<GeneratorMatrix> gens;
    for (double r : radii) gens.push_back(ball_generator(field, alpha, x, r));
    auto worst = [&](double c0) {
        double m = 0.0;
        for (std::size_t i = 0; i < radii.size(); ++i)
            m = std::max(m, dirichlet_exit_cdf(gens[i], x, c0 * std::pow(radii[i], alpha)));
        return m;
    };
    double lo = 0.0, hi = 1.0;
    while (worst(hi) <= level) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw std::runtime_error("fit_exit_c0: bracket failed");
    }
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (worst(mid) <= level ? lo : hi) = mid;
    }
    return lo;
}

// ---------------------------------------------------------------- Poincare

PoincareResult poincare_ratio(const ConductanceField& field, double alpha, const Vertex& x, double r0) {
    if (!(r0 >= 1.0)) throw std::invalid_argument("poincare_ratio: r0 must be >= 1");
    const Lattice& lat = field.lattice();
    const bool counting = lat.spec().counting_measure();
    const double s = lat.d() + alpha;
    const auto outer = lat.ball(x, 2.0 * r0);
    const auto n = static_cast<Eigen::Index>(outer.size());
    if (n < 2) throw std::invalid_argument("poincare_ratio: ball too small");
    std::unordered_map<Vertex, Eigen::Index, VertexHash> idx;
    for (Eigen::Index i = 0; i < n; ++i) idx.emplace(outer[static_cast<std::size_t>(i)], i);
    auto mu = [&](const Vertex& v) { return counting ? 1.0 : lat.mu(v); };
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index zi = 0; zi < n; ++zi) {
        const Vertex& z = outer[static_cast<std::size_t>(zi)];
        if (dist(lat, z, x) > r0 + 1e-9) continue;
        // f(z) - (f)_{B^w(z, r0)} as a linear functional.
        Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
        double mass = 0.0;
        for_each_in_shell(lat, z, 0.0, r0, [&](const Vertex& y, double r) {
            if (field.conductance_at(z, y, r) <= 0.0) return;
            const double m = mu(y);
            a[idx.at(y)] -= m;
            mass += m;
        });
        if (!(mass > 0.0)) throw std::runtime_error("poincare_ratio: empty B^w");
        a /= mass;
        a[zi] += 1.0;
        A.noalias() += mu(z) * a * a.transpose();
        for (Eigen::Index yi = 0; yi < n; ++yi) {
            if (yi == zi) continue;
            const Vertex& y = outer[static_cast<std::size_t>(yi)];
            const double r = dist(lat, z, y);
            const double w = field.conductance_at(z, y, r);
            if (w <= 0.0) continue;
            const double k = w * std::pow(r, -s) * mu(z) * mu(y);
            B(zi, zi) += k;
            B(yi, yi) += k;
            B(zi, yi) -= k;
            B(yi, zi) -= k;
        }
    }
    // Deflate constants: orthonormal basis of the complement of 1.
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(n, 1);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(one);
    const Eigen::MatrixXd Qfull = qr.householderQ();
    const Eigen::MatrixXd Q = Qfull.rightCols(n - 1);
    const Eigen::MatrixXd Ad = Q.transpose() * A * Q;
    const Eigen::MatrixXd Bd = Q.transpose() * B * Q;
    Eigen::LLT<Eigen::MatrixXd> llt(Bd);
    if (llt.info() != Eigen::Success) throw std::runtime_error("poincare_ratio: degenerate Dirichlet form");
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Ad, Bd);
    if (ges.info() != Eigen::Success) throw std::runtime_error("poincare_ratio: eigen solver failed");
    return {ges.eigenvalues().maxCoeff(), static_cast<std::size_t>(n)};
}

// ---------------------------------------------------------------- oscillation

OscillationResult parabolic_oscillation(const ConductanceField& field, const OscillationSpec& os) {
    if (!(os.xi > 0.0 && os.xi < 1.0)) throw std::invalid_argument("oscillation: xi outside (0,1)");
    if (os.levels < 1 || os.time_points < 1) throw std::invalid_argument("oscillation: need levels >= 1");
    if (!(os.c0 > 0.0)) throw std::invalid_argument("oscillation: C0 must be > 0");
    const Lattice& lat = field.lattice();
    const auto spec = GeneratorSpec::dirichlet(os.alpha, lat.ball(os.x0, 2.0 * os.r));
    const auto g = build_generator(field, spec);
    auto data = [&](const Vertex& y) {
        if (os.data == BoundaryData::Constant) return 1.0;
        return y[0] > os.x0[0] ? 1.0 : 0.0;
    };
    std::vector<double> phi(g.size()), src(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        phi[i] = data(g.states[i]);
        if (os.data == BoundaryData::Constant) {
            src[i] = g.leak[i];
        } else {
            // Far exterior splits evenly between the two half-spaces.
            src[i] = exterior_rate(field, spec, g, g.states[i], [&](const Vertex& y) { return data(y) > 0.0; }, 0.5);
        }
    }
    OscillationResult res;
    res.horizon = os.c0 * std::pow(2.0 * os.r, os.alpha);
    // Backward time tau = T - t for every cylinder grid point.
    std::vector<double> taus;
    std::vector<std::vector<double>> level_t(static_cast<std::size_t>(os.levels) + 1);
    for (int k = 0; k <= os.levels; ++k) {
        const double rho = os.r * std::pow(os.xi, k);
        res.radii.push_back(rho);
        const double len = os.c0 * std::pow(rho, os.alpha);
        for (int j = 0; j <= os.time_points; ++j) {
            const double t = len * j / os.time_points;
            level_t[static_cast<std::size_t>(k)].push_back(t);
            taus.push_back(res.horizon - t);
        }
    }
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    const auto cols = Uniformizer(g).evolve_col(phi, taus, src);
    auto col_at = [&](double t) -> const std::vector<double>& {
        const auto it = std::lower_bound(taus.begin(), taus.end(), res.horizon - t);
        return cols[static_cast<std::size_t>(it - taus.begin())];
    };
    for (int k = 0; k <= os.levels; ++k) {
        double hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
        for (double t : level_t[static_cast<std::size_t>(k)]) {
            const auto& u = col_at(t);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (dist(lat, g.states[i], os.x0) > res.radii[static_cast<std::size_t>(k)] + 1e-9) continue;
                hi = std::max(hi, u[i]);
                lo = std::min(lo, u[i]);
            }
        }
        res.osc.push_back(std::max(0.0, hi - lo));
    }
    for (std::size_t k = 1; k < res.osc.size(); ++k) {
        if (res.osc[k] > res.osc[k - 1] + 1e-12) res.monotone = false;
        if (res.osc[0] > 0.0) res.eta = std::max(res.eta, std::pow(res.osc[k] / res.osc[0], 1.0 / static_cast<double>(k)));
    }
    return res;
}

}  // namespace rcm::exact
