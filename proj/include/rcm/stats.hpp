#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rcm::stats {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

// Fixed-arity pairwise summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> xs);
MeanSe mean_se(std::span<const double> xs);
// Binomial proportion with its standard error.
MeanSe proportion(std::size_t hits, std::size_t n);

// sup |F_n - F| for a continuous reference CDF. `sorted` must be ascending.
double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic Kolmogorov tail P(K > lambda).
double kolmogorov_tail(double lambda);
// Asymptotic critical value c_level / sqrt(n) with P(K > c_level) = level.
double ks_critical(std::size_t n, double level);
// Effective sample size for the two-sample statistic.
double ks_critical_two_sample(std::size_t n, std::size_t m, double level);
// Standard deviation of the null KS statistic, approximately 0.26/sqrt(n).
double ks_null_sd(std::size_t n);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Linear interpolation between order statistics, p in [0,1].
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace rcm::stats
