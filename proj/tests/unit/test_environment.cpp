#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rcm/environment.hpp"

using namespace rcm;

namespace {

std::shared_ptr<const Lattice> z(int d) { return std::make_shared<const Lattice>(LatticeSpec::full(d)); }

// g(r) from E[w] = 1, written out independently of DistributionSpec::g.
double g_oracle(double r, double eps, double delta, int p, int q, double zp) {
    const double p1 = 1.0 / (3.0 * std::pow(r, 2.0 * p * eps));
    const double p2 = 1.0 / (3.0 * std::pow(r, 2.0 * q * delta));
    return (1.0 - std::pow(r, eps) * p1 - std::pow(r, -delta) * p2) / (1.0 - p1 - p2 - zp);
}

}  // namespace

TEST_CASE("example law has unit mean and the stated atoms") {
    const auto spec = DistributionSpec::paper_example(0.1, 0.1, 4, 4);
    for (double r : {1.0, 2.0, 3.0, 8.0, 64.0, 1e4}) {
        const auto law = spec.law(r);
        double total = 0, mean = 0, zero = 0;
        for (std::size_t i = 0; i < law.n; ++i) {
            total += law.prob[i];
            mean += law.prob[i] * law.value[i];
            if (law.value[i] == 0.0) zero += law.prob[i];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(mean == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(zero == doctest::Approx(1.0 / 32.0).epsilon(1e-14));
        CHECK(spec.mean(r) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(spec.g(r) == doctest::Approx(g_oracle(r, 0.1, 0.1, 4, 4, 1.0 / 32.0)).epsilon(1e-12));
        CHECK(law.envelope >= spec.g(r));
        CHECK(law.envelope >= std::pow(r, 0.1) - 1e-12);
        CHECK(law.cum[law.n - 1] == doctest::Approx(1.0));
    }
}

TEST_CASE("g range brackets g on a fine grid") {
    const auto spec = DistributionSpec::paper_example(0.2, 0.3, 2, 3);
    const auto range = spec.g_range();
    for (double r = 1.0; r < 1e5; r *= 1.1) {
        CHECK(spec.g(r) >= range.g_min - 1e-12);
        CHECK(spec.g(r) <= range.g_max + 1e-12);
    }
    CHECK(range.c >= range.g_max);
    CHECK(1.0 / range.c <= range.g_min);
}

TEST_CASE("mixture mean terms reproduce the mean") {
    const auto spec = DistributionSpec::discrete_mixture({{2.0, 0.0, 0.25}, {0.5, 0.1, 0.5}, {0.0, 0.0, 0.25}});
    for (double r : {1.0, 5.0, 50.0}) {
        double m = 0;
        for (auto [c, pw] : spec.mean_power_terms()) m += c * std::pow(r, pw);
        CHECK(m == doctest::Approx(spec.mean(r)));
        CHECK(spec.mean(r) == doctest::Approx(0.5 + 0.25 * std::pow(r, 0.1)));
    }
    CHECK(spec.tail_exponent() == doctest::Approx(0.1));
}

TEST_CASE("invalid laws are rejected") {
    CHECK_THROWS(DistributionSpec::paper_example(0.0, 0.1, 4, 4).validate());
    CHECK_THROWS(DistributionSpec::paper_example(0.1, 0.1, 0, 4).validate());
    CHECK_THROWS(DistributionSpec::paper_example(0.1, 0.1, 4, 4, 0.5).validate());
    CHECK_THROWS(DistributionSpec::discrete_mixture({{1.0, 0.0, 0.5}}).validate());
    CHECK_THROWS(DistributionSpec::discrete_mixture({}).validate());
}

TEST_CASE("field is symmetric, deterministic and seed dependent") {
    const auto spec = DistributionSpec::paper_example(0.1, 0.1, 4, 4);
    ConductanceField f(z(2), spec, 42);
    ConductanceField same(z(2), spec, 42);
    const auto other = f.with_seed(43);
    int differ = 0;
    Lattice lat(LatticeSpec::full(2));
    const auto pts = lat.ball(lat.origin(), 4.0);
    for (const auto& x : pts)
        for (const auto& y : pts) {
            if (x == y) continue;
            CHECK(f.conductance(x, y) == f.conductance(y, x));
            CHECK(f.conductance(x, y) == same.conductance(x, y));
            CHECK(f.conductance(x, y) == f.conductance_at(x, y, lat.distance(x, y)));
            if (f.conductance(x, y) != other.conductance(x, y)) ++differ;
        }
    CHECK(differ > 0);
}

TEST_CASE("constant field rates on Z^1 are zeta sums") {
    ConductanceField f(z(1), DistributionSpec::constant_one(), 0);
    const double pi2_3 = std::numbers::pi * std::numbers::pi / 3.0;
    // C_0 = 2 zeta(2) at alpha = 1.
    CHECK(total_rate(f, Vertex{0}, 1.0) == doctest::Approx(pi2_3).epsilon(1e-12));
    CHECK(total_rate(f, Vertex{12345}, 1.0) == doctest::Approx(pi2_3).epsilon(1e-12));
    // Big-jump hazard beyond distance 1.
    const double cut = default_direct_cutoff(f.lattice());
    CHECK(kernel_tail(f, Vertex{0}, 2.0, 1.0, cut) == doctest::Approx(pi2_3 - 2.0).epsilon(1e-12));
    // The mean-field remainder is exact for the constant law, so the cutoff does not matter.
    for (double c : {1.0, 7.0, 100.0})
        CHECK(kernel_tail(f, Vertex{0}, 2.0, 1.0, c) == doctest::Approx(pi2_3 - 2.0).epsilon(1e-13));
    // Half-line at x = 5: sum over k = 1..5 on the left plus the full right tail.
    const ConductanceField half(std::make_shared<const Lattice>(LatticeSpec::half(1, 0)), DistributionSpec::constant_one(), 0);
    const double left = 1.0 + 0.25 + 1.0 / 9 + 1.0 / 16 + 1.0 / 25;
    CHECK(kernel_tail(half, Vertex{5}, 2.0, 0.0, 2.0) == doctest::Approx(pi2_3 / 2.0 + left).epsilon(1e-13));
    CHECK(kernel_sum(f, Vertex{0}, 2.0, 0.0, 3.0) == doctest::Approx(2.0 * (1.0 + 0.25 + 1.0 / 9.0)));
    CHECK(kernel_sum(f, Vertex{0}, 2.0, 0.0, 3.0, SumWeight::Indicator) ==
          doctest::Approx(2.0 * (1.0 + 0.25 + 1.0 / 9.0)));
    // alpha = 0.5: 2 zeta(3/2).
    CHECK(total_rate(f, Vertex{0}, 0.5) == doctest::Approx(2.0 * 2.6123753486854883).epsilon(1e-12));
}

TEST_CASE("mean-field tail matches the realized tail for the constant law") {
    ConductanceField f(z(2), DistributionSpec::constant_one(), 0);
    const double direct = kernel_sum(f, Vertex{0, 0}, 3.0, 20.0, 400.0);
    const double mf = mean_field_tail(f, Vertex{0, 0}, 3.0, 20.0) - mean_field_tail(f, Vertex{0, 0}, 3.0, 400.0);
    CHECK(mf == doctest::Approx(direct).epsilon(0.02));
}

TEST_CASE("envelope tail bound dominates the realized tail") {
    const auto spec = DistributionSpec::paper_example(0.1, 0.1, 4, 4);
    for (int seed = 0; seed < 5; ++seed) {
        ConductanceField f(z(1), spec, static_cast<std::uint64_t>(seed));
        for (double r : {1.0, 4.0, 16.0}) {
            const double realized = kernel_sum(f, Vertex{0}, 2.0, r, 1e5);
            CHECK(envelope_tail_mass(f, 1.0, r) >= realized);
        }
    }
}

TEST_CASE("growing envelope at or above alpha is not summable") {
    const auto spec = DistributionSpec::discrete_mixture({{1.0, 1.2, 0.5}, {1.0, 0.0, 0.5}});
    ConductanceField f(z(1), spec, 1);
    CHECK_THROWS_WITH(envelope_tail_mass(f, 1.0, 4.0), "envelope not summable");
    CHECK_NOTHROW(envelope_tail_mass(f, 1.5, 4.0));
    CHECK_THROWS_WITH(envelope_integral_tail(spec, 1, 1.0, 10.0), "envelope not summable");
}

TEST_CASE("moment gate thresholds") {
    const auto g = validate_moment_exponents(5, 1.0, 4, 2);
    CHECK(g.p_threshold == 3.0);
    CHECK(g.q_threshold == 7.0 / 5.0);
    CHECK(g.admissible);
    CHECK(g.dimension_ok);
    CHECK_FALSE(validate_moment_exponents(5, 1.0, 3, 2).p_ok);  // strict inequality
    CHECK_FALSE(validate_moment_exponents(5, 1.0, 4, 1).q_ok);

    // d = 1, alpha = 1.6: (d+1)/(2(2-alpha)) = 2.5 < (d+2)/d = 3.
    const auto h = validate_moment_exponents(1, 1.6, 4, 4);
    CHECK(h.p_threshold == doctest::Approx(3.0));
    CHECK(h.dimension_threshold == doctest::Approx(0.8));
    CHECK(h.dimension_ok);
    CHECK_FALSE(validate_moment_exponents(1, 1.0, 4, 4).dimension_ok);

    const auto k = validate_moment_exponents(2, 0.5, 4, 4, true);
    CHECK(k.alpha_lt1_rule);
    CHECK(k.p_threshold == doctest::Approx(3.0));
    CHECK(k.dimension_threshold == doctest::Approx(1.0));
    CHECK_FALSE(validate_moment_exponents(2, 1.5, 4, 4, true).alpha_lt1_rule);

    CHECK_THROWS_WITH(validate_moment_exponents(1, 2.5, 4, 4), "alpha outside (0,2)");
    CHECK_THROWS_WITH(validate_moment_exponents(1, 0.0, 4, 4), "alpha outside (0,2)");
}

TEST_CASE("line pairs and empirical moments") {
    Lattice lat(LatticeSpec::full(3));
    const auto pairs = line_pairs(lat, 5, 100);
    REQUIRE(pairs.size() == 100);
    for (const auto& [a, b] : pairs) CHECK(lat.distance(a, b) == doctest::Approx(5.0));
    ConductanceField one(z(3), DistributionSpec::constant_one(), 0);
    const auto m = empirical_moment(one, 2.0, pairs);
    CHECK(m.value == doctest::Approx(1.0));
    CHECK(m.se == doctest::Approx(0.0));
    CHECK_THROWS(line_pairs(lat, 0, 10));
    CHECK_THROWS(empirical_moment(one, 0.0, pairs));
}

TEST_CASE("empirical first moment of the example law is near one") {
    const auto spec = DistributionSpec::paper_example(0.1, 0.1, 4, 4);
    ConductanceField f(z(1), spec, 7);
    Lattice lat(LatticeSpec::full(1));
    const auto pairs = line_pairs(lat, 3, 200000);
    const auto m = empirical_moment(f, 1.0, pairs);
    CHECK(std::abs(m.value - 1.0) <= 4.0 * m.se);
    CHECK(spec.moment(3.0, 1.0) == doctest::Approx(1.0));
    // Negative moments skip the zero atom.
    const auto neg = empirical_moment(f, -1.0, pairs);
    CHECK(neg.n_positive < neg.n_pairs);
    CHECK(std::abs(neg.value - spec.moment(3.0, -1.0)) <= 4.0 * neg.se);
}
