#include "rcm/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rcm/rng.hpp"

namespace rcm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier-compensated accumulator; closed-form checks need ~1e-13 relative accuracy.
struct Accum {
    double s = 0.0;
    double c = 0.0;
    void add(double v) {
        const double t = s + v;
        if (std::abs(s) >= std::abs(v)) c += (s - t) + v;
        else c += (v - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

double sphere_area(double d) {
    // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
    return 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
}

double mean_measure(const Lattice& lat) {
    const double c = lat.mu_max();
    if (c == 1.0) return 1.0;
    return (c - 1.0 / c) / (2.0 * std::log(c));
}

}  // namespace

// ---------------------------------------------------------------- DistributionSpec

DistributionSpec DistributionSpec::constant_one() { return DistributionSpec{}; }

DistributionSpec DistributionSpec::paper_example(double eps, double delta, int p, int q, double zero_prob) {
    DistributionSpec s;
    s.variant = EnvVariant::PaperExample;
    s.eps = eps;
    s.delta = delta;
    s.p = p;
    s.q = q;
    s.zero_prob = zero_prob;
    s.validate();
    return s;
}

DistributionSpec DistributionSpec::discrete_mixture(std::vector<MixtureAtom> atoms) {
    DistributionSpec s;
    s.variant = EnvVariant::DiscreteMixture;
    s.mixture = std::move(atoms);
    s.validate();
    return s;
}

void DistributionSpec::validate() const {
    switch (variant) {
        case EnvVariant::ConstantOne:
            return;
        case EnvVariant::PaperExample:
            if (!(eps > 0.0)) throw std::invalid_argument("environment.eps must be > 0");
            if (!(delta > 0.0)) throw std::invalid_argument("environment.delta must be > 0");
            if (p < 1) throw std::invalid_argument("environment.p must be >= 1");
            if (q < 1) throw std::invalid_argument("environment.q must be >= 1");
            // At r = 1 the two power atoms already take 2/3 of the mass.
            if (!(zero_prob >= 0.0 && zero_prob < 1.0 / 3.0))
                throw std::invalid_argument("environment.zero_prob must lie in [0, 1/3) for the example law");
            return;
        case EnvVariant::DiscreteMixture: {
            if (mixture.empty() || mixture.size() > kMaxAtoms)
                throw std::invalid_argument("environment.atoms must list 1 to 8 atoms");
            double total = 0.0;
            for (const auto& a : mixture) {
                if (!(a.coeff >= 0.0) || !(a.prob >= 0.0) || !std::isfinite(a.power))
                    throw std::invalid_argument("environment.atoms: coefficients and probabilities must be >= 0");
                total += a.prob;
            }
            if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("environment.atoms: probabilities must sum to 1");
            return;
        }
    }
}

std::vector<std::string> DistributionSpec::warnings() const {
    std::vector<std::string> w;
    double p0 = 0.0;
    if (variant == EnvVariant::PaperExample) p0 = zero_prob;
    if (variant == EnvVariant::DiscreteMixture)
        for (const auto& a : mixture)
            if (a.coeff == 0.0) p0 += a.prob;
    if (p0 >= 1.0 / 16.0)
        w.push_back("zero probability " + std::to_string(p0) + " is not below 2^-4; degeneracy bound not guaranteed");
    return w;
}

std::string DistributionSpec::name() const {
    switch (variant) {
        case EnvVariant::ConstantOne: return "constant";
        case EnvVariant::PaperExample: return "paper";
        case EnvVariant::DiscreteMixture: return "mixture";
    }
    return "?";
}

AtomLaw DistributionSpec::law(double r) const {
    AtomLaw L;
    switch (variant) {
        case EnvVariant::ConstantOne:
            L.n = 1;
            L.value[0] = 1.0;
            L.prob[0] = 1.0;
            break;
        case EnvVariant::PaperExample: {
            const double lr = std::log(r);
            const double hi = std::exp(eps * lr);
            const double lo = std::exp(-delta * lr);
            const double a = std::exp(-2.0 * p * eps * lr) / 3.0;
            const double b = std::exp(-2.0 * q * delta * lr) / 3.0;
            const double rem = 1.0 - a - b - zero_prob;
            L.n = 4;
            L.value = {hi, lo, 0.0, (1.0 - a * hi - b * lo) / rem};
            L.prob = {a, b, zero_prob, rem};
            break;
        }
        case EnvVariant::DiscreteMixture:
            L.n = mixture.size();
            for (std::size_t i = 0; i < L.n; ++i) {
                L.value[i] = mixture[i].coeff * std::pow(r, mixture[i].power);
                L.prob[i] = mixture[i].prob;
            }
            break;
    }
    double c = 0.0;
    for (std::size_t i = 0; i < L.n; ++i) {
        c += L.prob[i];
        L.cum[i] = c;
        if (L.prob[i] > 0.0) L.envelope = std::max(L.envelope, L.value[i]);
    }
    return L;
}

double DistributionSpec::g(double r) const {
    if (variant != EnvVariant::PaperExample) throw std::logic_error("g is defined for the example law only");
    return law(r).value[3];
}

double DistributionSpec::envelope(double r) const { return law(r).envelope; }

double DistributionSpec::tail_exponent() const {
    switch (variant) {
        case EnvVariant::ConstantOne: return 0.0;
        case EnvVariant::PaperExample: return eps;
        case EnvVariant::DiscreteMixture: {
            double t = 0.0;
            for (const auto& a : mixture)
                if (a.coeff > 0.0 && a.prob > 0.0) t = std::max(t, a.power);
            return t;
        }
    }
    return 0.0;
}

double DistributionSpec::tail_coeff(double s0) const {
    switch (variant) {
        case EnvVariant::ConstantOne: return 1.0;
        case EnvVariant::PaperExample: {
            // g(s) <= 1/rem(s) and rem is increasing, so g <= 1/rem(s0) beyond s0.
            const double s = std::max(1.0, s0);
            const double rem = 1.0 - std::pow(s, -2.0 * p * eps) / 3.0 - std::pow(s, -2.0 * q * delta) / 3.0 - zero_prob;
            return std::max(1.0, 1.0 / rem);
        }
        case EnvVariant::DiscreteMixture: {
            double c = 0.0;
            for (const auto& a : mixture)
                if (a.prob > 0.0) c = std::max(c, a.coeff);
            return c;
        }
    }
    return 1.0;
}

double DistributionSpec::envelope_sup(double lo, double hi) const {
    lo = std::max(lo, 1.0);
    switch (variant) {
        case EnvVariant::ConstantOne: return 1.0;
        case EnvVariant::PaperExample: {
            const double top = std::isfinite(hi) ? std::pow(hi, eps) : kInf;
            return std::max(top, tail_coeff(lo));
        }
        case EnvVariant::DiscreteMixture: {
            double m = 0.0;
            for (const auto& a : mixture) {
                if (a.prob <= 0.0 || a.coeff <= 0.0) continue;
                const double v_lo = a.coeff * std::pow(lo, a.power);
                const double v_hi = std::isfinite(hi) ? a.coeff * std::pow(hi, a.power) : (a.power > 0.0 ? kInf : 0.0);
                m = std::max({m, v_lo, v_hi});
            }
            return m;
        }
    }
    return 1.0;
}

double DistributionSpec::mean(double r) const { return moment(r, 1.0); }

double DistributionSpec::moment(double r, double s) const {
    const AtomLaw L = law(r);
    double m = 0.0;
    for (std::size_t i = 0; i < L.n; ++i) {
        if (L.value[i] <= 0.0) continue;
        m += L.prob[i] * std::pow(L.value[i], s);
    }
    return m;
}

std::vector<std::pair<double, double>> DistributionSpec::mean_power_terms() const {
    if (variant != EnvVariant::DiscreteMixture) return {{1.0, 0.0}};
    std::vector<std::pair<double, double>> t;
    for (const auto& a : mixture)
        if (a.prob > 0.0 && a.coeff > 0.0) t.emplace_back(a.prob * a.coeff, a.power);
    return t;
}

DistributionSpec::GRange DistributionSpec::g_range() const {
    GRange out;
    if (variant != EnvVariant::PaperExample) return out;
    out.g_min = kInf;
    out.g_max = 0.0;
    for (int i = 0; i <= 2400; ++i) {
        const double r = std::pow(10.0, i * 0.005);  // 1 .. 1e12
        const double gv = g(r);
        out.g_min = std::min(out.g_min, gv);
        out.g_max = std::max(out.g_max, gv);
    }
    const double limit = 1.0 / (1.0 - zero_prob);
    out.g_min = std::min(out.g_min, limit);
    out.g_max = std::max(out.g_max, limit);
    out.c = std::max(out.g_max, 1.0 / out.g_min);
    return out;
}

// ---------------------------------------------------------------- ConductanceField

ConductanceField::ConductanceField(std::shared_ptr<const Lattice> lattice, DistributionSpec spec, std::uint64_t seed)
    : lattice_(std::move(lattice)), spec_(std::move(spec)), seed_(seed) {
    if (!lattice_) throw std::invalid_argument("ConductanceField: null lattice");
    spec_.validate();
    if (constant()) return;
    int_keys_ = lattice_->integer_distances();
    const std::size_t n = int_keys_ ? (std::size_t{1} << 15) : (std::size_t{1} << 14);
    auto cache = std::make_shared<std::vector<AtomLaw>>(n);
    for (std::size_t k = 1; k < n; ++k) {
        const double r = int_keys_ ? static_cast<double>(k) : std::sqrt(static_cast<double>(k));
        (*cache)[k] = spec_.law(r);
    }
    cache_ = std::move(cache);
}

ConductanceField ConductanceField::with_seed(std::uint64_t seed) const {
    ConductanceField f = *this;
    f.seed_ = seed;
    return f;
}

const AtomLaw& ConductanceField::law_at(double r, AtomLaw& scratch) const {
    if (int_keys_) {
        const double k = std::round(r);
        if (k >= 1.0 && k < static_cast<double>(cache_->size()) && std::abs(r - k) < 1e-9)
            return (*cache_)[static_cast<std::size_t>(k)];
    } else {
        const double r2 = r * r;
        const double k = std::round(r2);
        if (k >= 1.0 && k < static_cast<double>(cache_->size()) && std::abs(r2 - k) < 1e-7)
            return (*cache_)[static_cast<std::size_t>(k)];
    }
    scratch = spec_.law(r);
    return scratch;
}

double ConductanceField::edge_uniform(const Vertex& x, const Vertex& y) const {
    const Vertex* a = &x;
    const Vertex* b = &y;
    if (y < x) std::swap(a, b);
    std::uint64_t h = mix64(seed_ ^ 0x6a09e667f3bcc909ULL);
    for (int i = 0; i < a->dim; ++i) h = mix64(h ^ static_cast<std::uint64_t>(a->c[i]));
    h = mix64(h ^ 0xbb67ae8584caa73bULL);
    for (int i = 0; i < b->dim; ++i) h = mix64(h ^ static_cast<std::uint64_t>(b->c[i]));
    return to_unit_open(h);
}

double ConductanceField::conductance_at(const Vertex& x, const Vertex& y, double r) const {
    if (constant()) return 1.0;
    AtomLaw scratch;
    const AtomLaw& L = law_at(r, scratch);
    return L.sample(edge_uniform(x, y));
}

double ConductanceField::conductance(const Vertex& x, const Vertex& y) const {
    if (x == y) {
        lattice_->require(x);
        return 0.0;
    }
    return conductance_at(x, y, lattice_->distance(x, y));
}

// ---------------------------------------------------------------- moments

std::vector<std::pair<Vertex, Vertex>> line_pairs(const Lattice& lattice, std::int64_t k, std::size_t count) {
    if (lattice.kind() == LatticeKind::Gasket) throw std::invalid_argument("line_pairs: lattice kinds only");
    if (k < 1) throw std::invalid_argument("line_pairs: distance must be >= 1");
    std::vector<std::pair<Vertex, Vertex>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vertex x = lattice.origin();
        x[0] = static_cast<std::int64_t>(i) * k;
        Vertex y = x;
        y[0] += k;
        out.emplace_back(x, y);
    }
    return out;
}

MomentEstimate empirical_moment(const ConductanceField& field, double exponent,
                                std::span<const std::pair<Vertex, Vertex>> pairs) {
    if (exponent == 0.0) throw std::invalid_argument("empirical_moment: exponent must be nonzero");
    MomentEstimate m;
    m.n_pairs = pairs.size();
    if (pairs.empty()) {
        m.defined = false;
        return m;
    }
    Accum s, s2;
    for (const auto& [x, y] : pairs) {
        const double w = field.conductance(x, y);
        double v = 0.0;
        if (w > 0.0) {
            ++m.n_positive;
            v = std::pow(w, exponent);
        }
        s.add(v);
        s2.add(v * v);
    }
    if (exponent < 0.0 && m.n_positive == 0) {
        m.defined = false;
        return m;
    }
    const double n = static_cast<double>(pairs.size());
    m.value = s.value() / n;
    const double var = std::max(0.0, s2.value() / n - m.value * m.value);
    m.se = std::sqrt(var / n);
    return m;
}

MomentGate validate_moment_exponents(int d, double alpha, int p, int q, bool alpha_lt1_rule) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    MomentGate g;
    const double dd = d;
    g.alpha_lt1_rule = alpha_lt1_rule && alpha < 1.0;
    const double second = g.alpha_lt1_rule ? (dd + 1.0) / (2.0 * (1.0 - alpha)) : (dd + 1.0) / (2.0 * (2.0 - alpha));
    g.p_threshold = std::max((dd + 2.0) / dd, second);
    g.q_threshold = (dd + 2.0) / dd;
    g.p_ok = p > g.p_threshold;
    g.q_ok = q > g.q_threshold;
    g.admissible = g.p_ok && g.q_ok;
    g.dimension_threshold = g.alpha_lt1_rule ? 2.0 - 2.0 * alpha : 4.0 - 2.0 * alpha;
    g.dimension_ok = dd > g.dimension_threshold;
    return g;
}

// ---------------------------------------------------------------- kernel sums

void for_each_in_shell(const Lattice& lattice, const Vertex& x, double lo, double hi,
                       const std::function<void(const Vertex&, double)>& fn) {
    if (hi <= lo) return;
    if (lattice.kind() == LatticeKind::Gasket) {
        const auto row = lattice.gasket_distance_row(x);
        const auto& verts = lattice.gasket_vertices();
        for (std::size_t i = 0; i < row->size(); ++i) {
            const double r = (*row)[i];
            if (r > lo && r <= hi) fn(verts[i], r);
        }
        return;
    }
    const int d = lattice.dim();
    const auto k = static_cast<std::int64_t>(std::floor(hi + 1e-9));
    if (d == 1) {
        const auto start = static_cast<std::int64_t>(std::floor(lo + 1e-9)) + 1;
        for (std::int64_t m = std::max<std::int64_t>(start, 1); m <= k; ++m) {
            for (int sgn : {-1, 1}) {
                Vertex y = x;
                y[0] += sgn * m;
                if (lattice.contains(y)) fn(y, static_cast<double>(m));
            }
        }
        return;
    }
    const double lo2 = lo * lo + 1e-9;
    const double hi2 = hi * hi + 1e-9;
    Vertex off(d);
    for (int i = 0; i < d; ++i) off[i] = -k;
    for (;;) {
        const double r2 = squared_norm(off);
        if (r2 > lo2 && r2 <= hi2 && r2 > 0.0) {
            Vertex y = x + off;
            if (lattice.contains(y)) fn(y, std::sqrt(r2));
        }
        int i = d - 1;
        while (i >= 0 && off[i] == k) {
            off[i] = -k;
            --i;
        }
        if (i < 0) break;
        ++off[i];
    }
}

double kernel_sum(const ConductanceField& field, const Vertex& x, double s, double lo, double hi, SumWeight weight) {
    const Lattice& lat = field.lattice();
    const bool counting = lat.spec().counting_measure();
    Accum acc;
    for_each_in_shell(lat, x, lo, hi, [&](const Vertex& y, double r) {
        const double w = field.conductance_at(x, y, r);
        double v = 0.0;
        switch (weight) {
            case SumWeight::Conductance: v = w; break;
            case SumWeight::Indicator: v = w > 0.0 ? 1.0 : 0.0; break;
            case SumWeight::Inverse: v = w > 0.0 ? 1.0 / w : 0.0; break;
        }
        if (v == 0.0) return;
        acc.add(v * std::pow(r, -s) * (counting ? 1.0 : lat.mu(y)));
    });
    return acc.value();
}

double default_direct_cutoff(const Lattice& lattice) {
    if (lattice.kind() == LatticeKind::Gasket) return kInf;
    switch (lattice.dim()) {
        case 1: return 16384.0;
        case 2: return 256.0;
        case 3: return 48.0;
        default: return 16.0;
    }
}

namespace {

// sum_{k >= a} k^beta for integer a >= 1 and beta < -1: direct terms up to 16,
// then Euler-Maclaurin through the seventh derivative.
double power_sum_from(double a, double beta) {
    double total = 0.0;
    for (; a < 16.0; a += 1.0) total += std::pow(a, beta);
    const double b = beta;
    const double f = std::pow(a, b);
    const double d1 = b * f / a;
    const double d3 = d1 * (b - 1.0) * (b - 2.0) / (a * a);
    const double d5 = d3 * (b - 3.0) * (b - 4.0) / (a * a);
    const double d7 = d5 * (b - 5.0) * (b - 6.0) / (a * a);
    total += -a * f / (b + 1.0) + 0.5 * f - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0 + d7 / 1209600.0;
    return total;
}

}  // namespace

double mean_field_tail(const ConductanceField& field, const Vertex& x, double s, double cutoff) {
    const Lattice& lat = field.lattice();
    const auto terms = field.spec().mean_power_terms();
    const double mbar = mean_measure(lat);
    // integral_a^b u^beta du for beta < -1 (b may be +inf).
    auto power_integral = [](double a, double b, double beta) {
        const double fa = std::pow(a, beta + 1.0);
        const double fb = std::isfinite(b) ? std::pow(b, beta + 1.0) : 0.0;
        return (fa - fb) / (-beta - 1.0);
    };
    auto m_integral = [&](double a, double b, double extra_power) {
        double total = 0.0;
        for (const auto& [c, pw] : terms) {
            const double beta = pw + extra_power;
            if (beta >= -1.0) return kInf;
            total += c * power_integral(a, b, beta);
        }
        return total;
    };
    if (lat.kind() == LatticeKind::Gasket) {
        const double ext = static_cast<double>(lat.gasket_exit_distance(x));
        const double cut = std::min(cutoff, ext);
        if (ext < 1.0) return kInf;
        const double cg = lat.mu_ball(x, ext) / std::pow(ext, lat.d());
        return cg * lat.d() * mbar * m_integral(std::max(cut, 1.0), kInf, lat.d() - 1.0 - s);
    }
    const int d = lat.dim();
    if (d == 1) {
        // sum_{k >= a} of the mean-field summand, exact up to rounding.
        auto sum_from = [&](double a) {
            double total = 0.0;
            for (const auto& [c, pw] : terms) {
                const double beta = pw - s;
                if (beta >= -1.0) return kInf;
                total += c * power_sum_from(a, beta);
            }
            return total;
        };
        const double a = std::floor(cutoff) + 1.0;
        double total = sum_from(a);
        if (lat.kind() == LatticeKind::FullLattice) {
            total *= 2.0;
        } else if (static_cast<double>(x[0]) >= a) {
            total += sum_from(a) - sum_from(static_cast<double>(x[0]) + 1.0);
        }
        return mbar * total;
    }
    const double dd = d;
    double frac = 1.0;
    if (lat.kind() == LatticeKind::HalfSpace) frac = std::pow(0.5, lat.spec().d1);
    return mbar * frac * sphere_area(dd) * m_integral(cutoff, kInf, dd - 1.0 - s);
}

double kernel_tail(const ConductanceField& field, const Vertex& x, double s, double r, double cutoff) {
    const Lattice& lat = field.lattice();
    double cut = std::max(cutoff, r);
    if (lat.kind() == LatticeKind::Gasket) cut = std::max(r, std::min(cut, static_cast<double>(lat.gasket_exit_distance(x))));
    return kernel_sum(field, x, s, r, cut) + mean_field_tail(field, x, s, cut);
}

double total_rate(const ConductanceField& field, const Vertex& x, double alpha) {
    const Lattice& lat = field.lattice();
    return kernel_tail(field, x, lat.d() + alpha, 0.0, default_direct_cutoff(lat));
}

double envelope_integral_tail(const DistributionSpec& spec, int d, double alpha, double K) {
    const double tau = spec.tail_exponent();
    if (tau >= alpha) throw std::invalid_argument("envelope not summable");
    // Every lattice point z with |z| > K owns the unit cube around it, on which
    // |u| - h <= |z| with h = sqrt(d)/2; the envelope kernel is decreasing.
    const double dv = d;
    const double h = std::sqrt(dv) / 2.0;
    if (!(K > 2.0 * h)) throw std::invalid_argument("envelope_integral_tail: cutoff too small");
    const double c = (K - h) / (K - 2.0 * h);
    return spec.tail_coeff(K - 2.0 * h) * sphere_area(dv) * std::pow(c, dv - 1.0) * std::pow(K - 2.0 * h, tau - alpha) /
           (alpha - tau);
}

double envelope_tail_mass(const ConductanceField& field, double alpha, double r) {
    if (!(r >= 1.0)) throw std::invalid_argument("envelope_tail_mass: cutoff must be >= 1");
    const auto& spec = field.spec();
    const double tau = spec.tail_exponent();
    if (tau >= alpha) throw std::invalid_argument("envelope not summable");
    const Lattice& lat = field.lattice();
    const double dv = lat.d();
    const double cm = lat.mu_max();
    if (lat.kind() == LatticeKind::Gasket) {
        // Dyadic shells with the generated region's d-set constant.
        const double ext = static_cast<double>(lat.gasket_exit_distance(lat.origin()));
        std::vector<double> radii;
        for (double rr = 1.0; rr <= ext; rr *= 2.0) radii.push_back(rr);
        const Vertex o = lat.origin();
        const double cg = lat.dset_diagnostic(std::span<const Vertex>(&o, 1), radii).c_upper;
        return cm * cg * spec.tail_coeff(r) * std::pow(2.0, dv + tau) * std::pow(r, tau - alpha) /
               (1.0 - std::pow(2.0, tau - alpha));
    }
    const int d = lat.dim();
    double kd = 16.0;
    switch (d) {
        case 1: kd = 1048576.0; break;
        case 2: kd = 512.0; break;
        case 3: kd = 64.0; break;
        default: break;
    }
    const double K = std::max(kd, std::ceil(r));
    // Direct part over the full lattice (an upper bound for half-spaces as well).
    Accum acc;
    const Lattice full(LatticeSpec::full(d));
    const double s = dv + alpha;
    for_each_in_shell(full, full.origin(), r, K, [&](const Vertex&, double rho) {
        acc.add(spec.envelope(rho) * std::pow(rho, -s));
    });
    const double tail = envelope_integral_tail(spec, d, alpha, K);
    return cm * (acc.value() + tail);
}

}  // namespace rcm
