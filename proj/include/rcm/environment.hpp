#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcm/lattice.hpp"

namespace rcm {

enum class EnvVariant { ConstantOne, PaperExample, DiscreteMixture };

// value = coeff * r^power, taken with a fixed probability.
struct MixtureAtom {
    double coeff = 1.0;
    double power = 0.0;
    double prob = 1.0;
};

inline constexpr std::size_t kMaxAtoms = 8;

// Finite atom law of w_{x,y} at distance r. Atoms are listed in sampling order.
struct AtomLaw {
    std::size_t n = 0;
    std::array<double, kMaxAtoms> value{};
    std::array<double, kMaxAtoms> prob{};
    std::array<double, kMaxAtoms> cum{};
    double envelope = 0.0;  // max atom value
    double sample(double u) const {
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (u < cum[i]) return value[i];
        return value[n - 1];
    }
};

struct DistributionSpec {
    EnvVariant variant = EnvVariant::ConstantOne;
    // Paper example: w = r^eps w.p. 1/(3 r^{2 p eps}), w = r^{-delta} w.p.
    // 1/(3 r^{2 q delta}), w = 0 w.p. zero_prob, w = g(r) otherwise, with g
    // fixed by E[w] = 1.
    double eps = 0.1;
    double delta = 0.1;
    int p = 4;
    int q = 4;
    double zero_prob = 1.0 / 32.0;
    std::vector<MixtureAtom> mixture;

    static DistributionSpec constant_one();
    static DistributionSpec paper_example(double eps, double delta, int p, int q, double zero_prob = 1.0 / 32.0);
    static DistributionSpec discrete_mixture(std::vector<MixtureAtom> atoms);

    void validate() const;
    std::vector<std::string> warnings() const;
    std::string name() const;

    AtomLaw law(double r) const;
    double g(double r) const;
    double envelope(double r) const;
    // Upper bound for envelope(s) over s in [lo, hi] (hi may be +inf).
    double envelope_sup(double lo, double hi) const;
    // envelope(s) <= tail_coeff(s0) * s^tail_exponent() for all s >= s0 >= 1.
    double tail_exponent() const;
    double tail_coeff(double s0) const;
    double mean(double r) const;
    // E[w^s 1_{w>0}] for s < 0, E[w^s] otherwise.
    double moment(double r, double s) const;
    // E[w](r) = sum_i coef_i r^power_i.
    std::vector<std::pair<double, double>> mean_power_terms() const;

    // Bounds of the g branch over r >= 1 (paper example only): c with 1/c <= g <= c.
    struct GRange {
        double g_min = 1.0;
        double g_max = 1.0;
        double c = 1.0;
    };
    GRange g_range() const;
};

class ConductanceField {
public:
    ConductanceField(std::shared_ptr<const Lattice> lattice, DistributionSpec spec, std::uint64_t seed);
    // Same law and lattice with another seed; shares the per-distance law cache.
    ConductanceField with_seed(std::uint64_t seed) const;

    const Lattice& lattice() const { return *lattice_; }
    std::shared_ptr<const Lattice> lattice_ptr() const { return lattice_; }
    const DistributionSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }
    bool constant() const { return spec_.variant == EnvVariant::ConstantOne; }

    double conductance(const Vertex& x, const Vertex& y) const;
    // Hot-path form: x != y and r = rho(x, y) already known.
    double conductance_at(const Vertex& x, const Vertex& y, double r) const;
    // Per-edge uniform hash(seed, min(x,y), max(x,y)).
    double edge_uniform(const Vertex& x, const Vertex& y) const;
    double envelope(double r) const { return spec_.envelope(r); }

private:
    const AtomLaw& law_at(double r, AtomLaw& scratch) const;

    std::shared_ptr<const Lattice> lattice_;
    DistributionSpec spec_;
    std::uint64_t seed_;
    bool int_keys_ = false;
    std::shared_ptr<const std::vector<AtomLaw>> cache_;  // by integer distance, or by squared distance
};

struct MomentEstimate {
    double value = 0.0;
    double se = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_positive = 0;
    bool defined = true;
};

// Disjoint edges (i e_1, i e_1 + k e_1), i = 0..count-1.
std::vector<std::pair<Vertex, Vertex>> line_pairs(const Lattice& lattice, std::int64_t k, std::size_t count);
MomentEstimate empirical_moment(const ConductanceField& field, double exponent,
                                std::span<const std::pair<Vertex, Vertex>> pairs);

struct MomentGate {
    double p_threshold = 0.0;
    double q_threshold = 0.0;
    bool p_ok = false;
    bool q_ok = false;
    bool admissible = false;
    double dimension_threshold = 0.0;
    bool dimension_ok = false;
    bool alpha_lt1_rule = false;
};
MomentGate validate_moment_exponents(int d, double alpha, int p, int q, bool alpha_lt1_rule = false);

// Upper bound on sum_{rho(x,y) > r} envelope(rho)/rho^{d+alpha} mu_y, uniform in x.
double envelope_tail_mass(const ConductanceField& field, double alpha, double r);
// Integral bound on sum_{|z| > K} envelope(|z|)/|z|^{d+alpha} over Z^d (K > sqrt(d)).
double envelope_integral_tail(const DistributionSpec& spec, int d, double alpha, double K);

// Visits every valid y with lo < rho(x,y) <= hi. Lattices enumerate offsets in
// a bounding box; the gasket uses the generated graph.
void for_each_in_shell(const Lattice& lattice, const Vertex& x, double lo, double hi,
                       const std::function<void(const Vertex&, double)>& fn);

enum class SumWeight { Conductance, Indicator, Inverse };

// sum over lo < rho <= hi of weight(w_{x,y}) rho^{-s} mu_y (realized field).
double kernel_sum(const ConductanceField& field, const Vertex& x, double s, double lo, double hi,
                  SumWeight weight = SumWeight::Conductance);
// The same sum over rho > r: realized terms up to `cutoff`, mean-field
// (E[w] in place of w) beyond it.
double kernel_tail(const ConductanceField& field, const Vertex& x, double s, double r, double cutoff);
// Mean-field part alone: sum over rho > cutoff of E[w](rho) rho^{-s} mu.
double mean_field_tail(const ConductanceField& field, const Vertex& x, double s, double cutoff);
// Default direct-sum radius for kernel_tail by dimension.
double default_direct_cutoff(const Lattice& lattice);
// C_x = sum_y w_{x,y}/rho^{d+alpha} mu_y.
double total_rate(const ConductanceField& field, const Vertex& x, double alpha);

}  // namespace rcm
