#pragma once

#include <vector>

#include "rcm/rng.hpp"

namespace rcm::stable {

// Symmetric stable law with characteristic function exp(-scale |xi|^alpha).
struct StableLaw {
    double alpha = 1.0;
    int d = 1;
    double scale = 1.0;
    void validate() const;
};

// Chambers-Mallows-Stuck; alpha = 2 gives N(0, 2 scale).
double sample_1d(double alpha, double scale, Rng& rng);
// Gaussian vector subordinated by a positive alpha/2-stable variable.
std::vector<double> sample_isotropic(double alpha, int d, double scale, Rng& rng);
// Positive beta-stable with Laplace transform exp(-kappa lambda^beta), beta in (0,1).
double sample_positive(double beta, double kappa, Rng& rng);

// psi(xi) = int (1 - cos<xi,z>) |z|^{-d-alpha} dz = c(d,alpha) |xi|^alpha, by quadrature.
double limit_scale_constant(int d, double alpha);
// Closed form of the same constant.
double limit_scale_constant_closed(int d, double alpha);
// psi(xi e_1) by direct quadrature at a given |xi| (used for the scaling check).
double characteristic_exponent(int d, double alpha, double xi);

struct CdfValue {
    double value = 0.0;
    double error = 0.0;
    bool widened = false;  // quadrature error estimate above 1e-6
};
CdfValue cdf_1d_checked(const StableLaw& law, double x);
double cdf_1d(const StableLaw& law, double x);
double quantile_1d(const StableLaw& law, double p);

// CDF on an ascending grid with a running-max guard.
std::vector<double> cdf_table(const StableLaw& law, const std::vector<double>& xs);

}  // namespace rcm::stable
