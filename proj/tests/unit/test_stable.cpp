#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>

#include "rcm/stable.hpp"
#include "rcm/stats.hpp"

using namespace rcm;
using namespace rcm::stable;

namespace {

double c_oracle(int d, double a) {
    const double pi = std::numbers::pi;
    return std::pow(pi, d / 2.0) * std::tgamma(1.0 - a / 2.0) /
           (std::pow(2.0, a) * (a / 2.0) * std::tgamma((d + a) / 2.0));
}

// Gil-Pelaez: F(x) = 1/2 + (1/pi) int_0^inf sin(x u) exp(-c u^a) / u du.
double cdf_fourier(double a, double c, double x) {
    boost::math::quadrature::ooura_fourier_sin<double> q(1e-12, 10);
    auto f = [a, c](double u) { return u <= 0.0 ? 0.0 : std::exp(-c * std::pow(u, a)) / u; };
    return 0.5 + q.integrate(f, x).first / std::numbers::pi;
}

}  // namespace

TEST_CASE("CDF agrees with the Fourier inversion oracle") {
    for (double a : {0.4, 0.9, 1.1, 1.6, 1.95})
        for (double c : {0.5, 2.0})
            for (double x : {-3.0, -0.2, 0.05, 1.0, 6.0}) {
                CAPTURE(a);
                CAPTURE(c);
                CAPTURE(x);
                const StableLaw law{a, 1, c};
                const auto v = cdf_1d_checked(law, x);
                CHECK_FALSE(v.widened);
                CHECK(v.value == doctest::Approx(cdf_fourier(a, c, x)).epsilon(1e-8));
            }
}

TEST_CASE("limit scale constant: quadrature and closed form agree with the oracle") {
    CHECK(c_oracle(1, 1.0) == doctest::Approx(std::numbers::pi));
    for (int d : {1, 2, 3}) {
        for (double a : {0.3, 0.8, 1.0, 1.5, 1.9}) {
            CAPTURE(d);
            CAPTURE(a);
            CHECK(limit_scale_constant_closed(d, a) == doctest::Approx(c_oracle(d, a)).epsilon(1e-12));
            CHECK(limit_scale_constant(d, a) == doctest::Approx(c_oracle(d, a)).epsilon(1e-6));
        }
    }
}

TEST_CASE("quadrature results do not depend on earlier calls") {
    const double first = limit_scale_constant(2, 1.6);
    const StableLaw law{1.6, 1, 1.0};
    const double cdf = cdf_1d(law, 0.8);
    for (double x : {-30.0, 0.01, 4.0, 200.0}) (void)cdf_1d(law, x);
    for (double a : {0.4, 1.2, 1.95}) (void)limit_scale_constant(3, a);
    CHECK(limit_scale_constant(2, 1.6) == first);
    CHECK(cdf_1d(law, 0.8) == cdf);
}

TEST_CASE("characteristic exponent scales like |xi|^alpha") {
    for (double a : {0.5, 1.0, 1.7}) {
        const double p1 = characteristic_exponent(1, a, 1.0);
        const double p2 = characteristic_exponent(1, a, 2.0);
        CHECK(p2 / p1 == doctest::Approx(std::pow(2.0, a)).epsilon(1e-6));
        CHECK(p1 == doctest::Approx(c_oracle(1, a)).epsilon(1e-6));
    }
}

TEST_CASE("Cauchy CDF is the arctan law") {
    for (double scale : {0.5, 1.0, 3.0})
        for (double x : {-20.0, -1.0, -0.1, 0.0, 0.7, 5.0}) {
            const StableLaw law{1.0, 1, scale};
            CHECK(cdf_1d(law, x) == doctest::Approx(0.5 + std::atan(x / scale) / std::numbers::pi).epsilon(1e-8));
        }
}

TEST_CASE("alpha = 2 is Gaussian with variance 2 scale") {
    for (double s : {0.25, 1.0})
        for (double x : {-3.0, -0.5, 0.0, 1.0, 2.5}) {
            const StableLaw law{2.0, 1, s};
            CHECK(cdf_1d(law, x) == doctest::Approx(0.5 * std::erfc(-x / (2.0 * std::sqrt(s)))).epsilon(1e-8));
        }
}

TEST_CASE("CDF symmetry, quantile inverse and monotone tables") {
    for (double a : {0.6, 1.3, 1.9}) {
        const StableLaw law{a, 1, 1.3};
        for (double x : {0.1, 1.0, 4.0, 40.0})
            CHECK(cdf_1d(law, -x) == doctest::Approx(1.0 - cdf_1d(law, x)).epsilon(1e-9));
        CHECK(cdf_1d(law, 0.0) == doctest::Approx(0.5));
        for (double p : {0.01, 0.25, 0.5, 0.75, 0.99})
            CHECK(cdf_1d(law, quantile_1d(law, p)) == doctest::Approx(p).epsilon(1e-7));
        std::vector<double> xs;
        for (double x = -50; x <= 50; x += 0.37) xs.push_back(x);
        const auto t = cdf_table(law, xs);
        CHECK(std::is_sorted(t.begin(), t.end()));
        CHECK(t.front() >= 0.0);
        CHECK(t.back() <= 1.0);
        const auto checked = cdf_1d_checked(law, 2.0);
        CHECK(checked.error < 1e-6);
        CHECK_FALSE(checked.widened);
    }
}

TEST_CASE("CMS samples pass KS against the quadrature CDF") {
    const std::size_t n = 20000;
    for (double a : {0.5, 1.0, 1.2, 1.8, 2.0}) {
        Rng rng(static_cast<std::uint64_t>(a * 100));
        std::vector<double> xs(n);
        for (auto& x : xs) x = sample_1d(a, 0.7, rng);
        std::sort(xs.begin(), xs.end());
        const StableLaw law{a, 1, 0.7};
        const double ks = stats::ks_statistic(xs, [&](double x) { return cdf_1d(law, x); });
        CAPTURE(a);
        CHECK(ks < stats::ks_critical(n, 0.001));
    }
}

TEST_CASE("isotropic samples project to the one-dimensional law") {
    const std::size_t n = 20000;
    Rng rng(3);
    std::vector<double> xs(n);
    for (auto& x : xs) {
        const auto v = sample_isotropic(1.4, 2, 0.9, rng);
        REQUIRE(v.size() == 2);
        x = v[1];
    }
    std::sort(xs.begin(), xs.end());
    const StableLaw law{1.4, 1, 0.9};
    CHECK(stats::ks_statistic(xs, [&](double x) { return cdf_1d(law, x); }) < stats::ks_critical(n, 0.001));
}

TEST_CASE("positive stable samples have the right Laplace transform") {
    const std::size_t n = 100000;
    for (double beta : {0.3, 0.5, 0.8}) {
        Rng rng(11);
        std::vector<double> xs(n);
        for (auto& x : xs) x = sample_positive(beta, 1.5, rng);
        CHECK(*std::min_element(xs.begin(), xs.end()) > 0.0);
        for (double lambda : {0.2, 1.0, 3.0}) {
            std::vector<double> e(n);
            for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(-lambda * xs[i]);
            const auto m = stats::mean_se(e);
            CHECK(std::abs(m.mean - std::exp(-1.5 * std::pow(lambda, beta))) < 4.0 * m.se);
        }
    }
}

TEST_CASE("invalid laws are rejected") {
    CHECK_THROWS(StableLaw{0.0, 1, 1.0}.validate());
    CHECK_THROWS(StableLaw{2.1, 1, 1.0}.validate());
    CHECK_THROWS(StableLaw{1.0, 1, -1.0}.validate());
    CHECK_THROWS(quantile_1d(StableLaw{1.0, 1, 1.0}, 1.5));
}
