#include "rcm/stable.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rcm::stable {

namespace {

constexpr double kPi = std::numbers::pi;

void check_alpha(double alpha, bool allow_two) {
    if (!(alpha > 0.0 && (alpha < 2.0 || (allow_two && alpha == 2.0))))
        throw std::invalid_argument("alpha outside (0,2)");
}

// Fresh per call: an Ooura integrator remembers the refinement level of its last call, so a
// shared instance would make results depend on call history.
boost::math::quadrature::ooura_fourier_sin<double> sin_integrator() { return {1e-10, 10}; }

boost::math::quadrature::ooura_fourier_cos<double> cos_integrator() { return {1e-12, 10}; }

double sphere_area(double n) {  // |S^{n-1}| in R^n
    return 2.0 * std::pow(kPi, n / 2.0) / std::tgamma(n / 2.0);
}

// int_0^inf (1 - cos(xi z)) z^{-1-alpha} dz
double half_line_exponent(double alpha, double xi) {
    // Scale out xi: xi^alpha * int_0^inf (1 - cos u) u^{-1-alpha} du.
    boost::math::quadrature::tanh_sinh<double> ts;
    const double head = ts.integrate(
        [alpha](double u) {
            if (u < 1e-4) {
                const double u2 = u * u;
                return std::pow(u, 1.0 - alpha) * (0.5 - u2 / 24.0 + u2 * u2 / 720.0);
            }
            return (1.0 - std::cos(u)) * std::pow(u, -1.0 - alpha);
        },
        0.0, 1.0);
    // int_1^inf cos(u) u^{-1-alpha} du = cos1 I_c - sin1 I_s with f(t) = (1+t)^{-1-alpha}.
    auto f = [alpha](double t) { return std::pow(1.0 + t, -1.0 - alpha); };
    const double ic = cos_integrator().integrate(f, 1.0).first;
    const double is = sin_integrator().integrate(f, 1.0).first;
    const double osc = std::cos(1.0) * ic - std::sin(1.0) * is;
    return std::pow(xi, alpha) * (head + 1.0 / alpha - osc);
}

// int_{R^{d-1}} (1 + |v|^2)^{-(d+alpha)/2} dv
double transverse_factor(int d, double alpha) {
    if (d == 1) return 1.0;
    boost::math::quadrature::exp_sinh<double> es;
    const double dv = d;
    const double radial = es.integrate(
        [dv, alpha](double r) { return std::pow(r, dv - 2.0) * std::pow(1.0 + r * r, -(dv + alpha) / 2.0); });
    return sphere_area(dv - 1.0) * radial;
}

}  // namespace

void StableLaw::validate() const {
    check_alpha(alpha, true);
    if (d < 1) throw std::invalid_argument("stable: d must be >= 1");
    if (!(scale > 0.0)) throw std::invalid_argument("stable: scale must be > 0");
}

double sample_1d(double alpha, double scale, Rng& rng) {
    check_alpha(alpha, true);
    const double v = kPi * (rng.uniform() - 0.5);
    const double w = rng.exponential(1.0);
    double x;
    if (alpha == 1.0) {
        x = std::tan(v);
    } else {
        x = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
            std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
    }
    return std::pow(scale, 1.0 / alpha) * x;
}

double sample_positive(double beta, double kappa, Rng& rng) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("sample_positive: beta outside (0,1)");
    const double u = kPi * rng.uniform();
    const double e = rng.exponential(1.0);
    const double a = std::sin(beta * u) / std::pow(std::sin(u), 1.0 / beta) *
                     std::pow(std::sin((1.0 - beta) * u) / e, (1.0 - beta) / beta);
    return std::pow(kappa, 1.0 / beta) * a;
}

std::vector<double> sample_isotropic(double alpha, int d, double scale, Rng& rng) {
    check_alpha(alpha, false);
    if (d < 1) throw std::invalid_argument("stable: d must be >= 1");
    // E exp(-A |xi|^2 / 2) = exp(-scale |xi|^alpha) needs kappa = scale 2^{alpha/2}.
    const double a = sample_positive(alpha / 2.0, scale * std::pow(2.0, alpha / 2.0), rng);
    const double s = std::sqrt(a);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& xi : x) xi = s * rng.normal();
    return x;
}

double characteristic_exponent(int d, double alpha, double xi) {
    check_alpha(alpha, false);
    if (d < 1) throw std::invalid_argument("stable: d must be >= 1");
    if (xi == 0.0) return 0.0;
    return 2.0 * half_line_exponent(alpha, std::abs(xi)) * transverse_factor(d, alpha);
}

double limit_scale_constant(int d, double alpha) {
    const double c = characteristic_exponent(d, alpha, 1.0);
    if (!std::isfinite(c) || !(c > 0.0)) throw std::runtime_error("limit_scale_constant: quadrature did not converge");
    return c;
}

double limit_scale_constant_closed(int d, double alpha) {
    check_alpha(alpha, false);
    const double dv = d;
    return 2.0 * std::pow(kPi, dv / 2.0) * std::tgamma(1.0 - alpha / 2.0) /
           (alpha * std::pow(2.0, alpha) * std::tgamma((dv + alpha) / 2.0));
}

CdfValue cdf_1d_checked(const StableLaw& law, double x) {
    law.validate();
    CdfValue out;
    if (x == 0.0) {
        out.value = 0.5;
        return out;
    }
    const double a = law.alpha, c = law.scale, ax = std::abs(x);
    if (a == 2.0) {
        out.value = 0.5 * std::erfc(-x / (2.0 * std::sqrt(c)));
        return out;
    }
    // Large |x|: tail series sum_k (-1)^{k+1} Gamma(k a)/k! sin(k pi a/2) (c |x|^{-a})^k / pi.
    const double z = c * std::pow(ax, -a);
    if (z < 1e-3) {
        double tail = 0.0, zk = 1.0, fact = 1.0;
        for (int k = 1; k <= 12; ++k) {
            zk *= z;
            fact *= k;
            const double term = std::tgamma(k * a) / fact * std::sin(k * kPi * a / 2.0) * zk / kPi;
            tail += (k % 2 == 1) ? term : -term;
            if (std::abs(term) < 1e-17) break;
        }
        out.value = x > 0.0 ? 1.0 - tail : tail;
        return out;
    }
    // Zolotarev: with y = |x| c^{-1/a} and e = a/(a-1),
    //   F(|x|) = 1/2 + (1/pi) int_0^{pi/2} exp(-y^e V) dth        (a < 1)
    //   F(|x|) = 1 - (1/pi) int_0^{pi/2} exp(-y^e V) dth          (a > 1)
    // where V(th) = (cos th / sin(a th))^e cos((a-1) th) / cos th.
    double value;
    double err = 0.0;
    if (a == 1.0) {
        value = 0.5 + std::atan(ax / c) / kPi;
    } else {
        const double e = a / (a - 1.0);
        const double log_y = std::log(ax) - std::log(c) / a;
        auto g = [a, e, log_y](double th) {
            if (th <= 0.0 || th >= kPi / 2.0) return 0.0;
            const double lv = e * (std::log(std::cos(th)) - std::log(std::sin(a * th))) +
                              std::log(std::cos((a - 1.0) * th)) - std::log(std::cos(th));
            const double arg = e * log_y + lv;
            return arg > 700.0 ? 0.0 : std::exp(-std::exp(arg));
        };
        boost::math::quadrature::tanh_sinh<double> ts;
        double l1 = 0.0;
        const double integral = ts.integrate(g, 0.0, kPi / 2.0, 1e-12, &err, &l1) / kPi;
        err /= kPi;
        value = a < 1.0 ? 0.5 + integral : 1.0 - integral;
    }
    out.value = std::clamp(x > 0.0 ? value : 1.0 - value, 0.0, 1.0);
    out.error = err;
    out.widened = out.error > 1e-6;
    return out;
}

double cdf_1d(const StableLaw& law, double x) { return cdf_1d_checked(law, x).value; }

double quantile_1d(const StableLaw& law, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile_1d: p outside (0,1)");
    if (p == 0.5) return 0.0;
    const double sgn = p > 0.5 ? 1.0 : -1.0;
    const double target = p > 0.5 ? p : 1.0 - p;
    double lo = 0.0, hi = std::pow(law.scale, 1.0 / law.alpha);
    while (cdf_1d(law, hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::runtime_error("quantile_1d: bracket failed");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf_1d(law, mid) < target ? lo : hi) = mid;
    }
    return sgn * 0.5 * (lo + hi);
}

std::vector<double> cdf_table(const StableLaw& law, const std::vector<double>& xs) {
    if (!std::is_sorted(xs.begin(), xs.end())) throw std::invalid_argument("cdf_table: grid must be ascending");
    std::vector<double> out(xs.size());
    double run = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        run = std::max(run, cdf_1d(law, xs[i]));
        out[i] = run;
    }
    return out;
}

}  // namespace rcm::stable
