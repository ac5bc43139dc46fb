#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rcm/environment.hpp"

namespace rcm::exact {

enum class Boundary { Conservative, Dirichlet };

struct GeneratorSpec {
    double alpha = 1.0;
    std::vector<Vertex> window;
    // Conservative: jumps leaving the window are dropped. Dirichlet: they kill.
    Boundary boundary = Boundary::Conservative;
    std::optional<double> truncation;
    // Hat localization: w replaced by 1 on pairs with both ends outside B(x0, R).
    std::optional<Vertex> loc_center;
    double loc_radius = 0.0;
    double leak_cutoff = 0.0;  // 0: default_direct_cutoff

    static GeneratorSpec conservative(double alpha, std::vector<Vertex> window);
    static GeneratorSpec dirichlet(double alpha, std::vector<Vertex> window);
};

// Sparse generator on a finite window. Off-diagonal rates are
// q(x,y) = w_{x,y} rho^{-d-alpha} mu_y; diag = -(sum q) - leak.
struct GeneratorMatrix {
    std::vector<Vertex> states;
    std::unordered_map<Vertex, std::int32_t, VertexHash> index;
    std::vector<std::int64_t> row_ptr;
    std::vector<std::int32_t> col;
    std::vector<double> val;
    std::vector<double> diag;
    std::vector<double> leak;
    std::vector<double> mu;
    bool irreducible = true;
    double volume_dim = 1.0;

    std::size_t size() const { return states.size(); }
    std::int32_t index_of(const Vertex& v) const;  // -1 when absent
    double max_rate() const;
    double offdiag(std::size_t i, std::size_t j) const;
};

GeneratorMatrix build_generator(const ConductanceField& field, const GeneratorSpec& spec);

struct UniformizationOptions {
    double tol = 1e-13;       // two-sided Poisson truncation
    double budget = 5e7;      // max Lambda * t
};

struct PoissonWeights {
    std::size_t left = 0;
    std::vector<double> w;
    double mass = 0.0;
};
PoissonWeights poisson_weights(double m, double tol);

class Uniformizer {
public:
    explicit Uniformizer(const GeneratorMatrix& g, UniformizationOptions opts = {});
    double rate() const { return lambda_; }

    // out = in P with P = I + L / Lambda (row vectors: distributions).
    void step_row(std::span<const double> in, std::span<double> out) const;
    // out = P in (column vectors: expectations).
    void step_col(std::span<const double> in, std::span<double> out) const;

    // v0 e^{tL} for every t in `times` (any order).
    std::vector<std::vector<double>> evolve_row(std::span<const double> v0, std::span<const double> times) const;
    // e^{tL} v0 + int_0^t e^{sL} source ds for every t.
    std::vector<std::vector<double>> evolve_col(std::span<const double> v0, std::span<const double> times,
                                                std::span<const double> source = {}) const;

private:
    void check_budget(double t) const;
    const GeneratorMatrix& g_;
    UniformizationOptions opts_;
    double lambda_ = 0.0;
};

// p(t, x, .) = P^x(X_t = .) / mu.
std::vector<double> heat_kernel(const GeneratorMatrix& g, double t, const Vertex& x,
                                const UniformizationOptions& opts = {});
std::vector<std::vector<double>> heat_kernel_rows(const GeneratorMatrix& g, const Vertex& x,
                                                  std::span<const double> times,
                                                  const UniformizationOptions& opts = {});
double row_mass(const GeneratorMatrix& g, std::span<const double> p);

// ---- on-diagonal decay

struct TimeWindow {
    double lo = 0.0;
    double hi = 0.0;
};
// [2 delta^{theta' alpha}, delta^alpha]; throws when empty.
TimeWindow ondiag_time_window(double delta, double alpha, double theta_prime);
std::vector<double> geometric_grid(double lo, double hi, std::size_t n);
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

struct OndiagFit {
    std::vector<double> times;
    std::vector<double> p;
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double constant = 0.0;  // sup p t^{d/alpha}
};
OndiagFit ondiag_decay_fit(const GeneratorMatrix& g, const Vertex& x, std::span<const double> times, double alpha,
                           const UniformizationOptions& opts = {});

struct WindowAudit {
    double radius = 0.0;
    std::size_t states = 0;
    double killed_mass = 0.0;
};

// Truncated(delta) Dirichlet windows B(x, R_w) grown by doubling until the mass
// killed by the largest time is below `audit_tol`.
struct OndiagResult {
    OndiagFit fit;
    WindowAudit audit;
};
OndiagResult ondiag_decay(const ConductanceField& field, const Vertex& x, double alpha, double delta,
                          std::span<const double> times, double audit_tol = 1e-8);

// ---- Nash profile

struct NashProfile {
    std::vector<double> times;
    std::vector<double> M;
    std::vector<double> Q;
    std::vector<double> K;
    double c = 0.0;  // sup over the grid of (d/alpha) log t - Q(t), so K >= 0
    bool q_monotone = true;
    WindowAudit audit;
};
NashProfile nash_profile(const ConductanceField& field, const Vertex& x, double alpha, double R,
                         std::span<const double> times, double audit_tol = 1e-6);
// sup over t in [lo, hi] of M(t) / (R (t/R^alpha)^{1/2} (1 + log(R^alpha/t))).
double nash_fit_constant(const NashProfile& prof, double alpha, double R, double lo, double hi);

// ---- Dirichlet exit laws

// Dirichlet generator on B(x, r) (full process, realized sums + mean-field tail).
GeneratorMatrix ball_generator(const ConductanceField& field, double alpha, const Vertex& x, double r);
double dirichlet_exit_cdf(const GeneratorMatrix& g, const Vertex& x, double t, const UniformizationOptions& opts = {});
// CDF at ascending times by sequential propagation.
std::vector<double> dirichlet_exit_cdf_sorted(const GeneratorMatrix& g, const Vertex& x,
                                              std::span<const double> sorted_times,
                                              const UniformizationOptions& opts = {});

struct ExitMoments {
    double mean_tau = 0.0;
    double p_beyond_2r = 0.0;  // P(rho(X_tau, x) > 2r)
};
ExitMoments dirichlet_exit_moments(const ConductanceField& field, double alpha, const Vertex& x, double r);

// Largest C0 with max_r P_x(tau_{B(x,r)} <= C0 r^alpha) <= level.
double fit_exit_c0(const ConductanceField& field, double alpha, const Vertex& x, std::span<const double> radii,
                   double level = 0.25);

// ---- Poincare ratio

struct PoincareResult {
    double ratio = 0.0;
    std::size_t states = 0;
};
PoincareResult poincare_ratio(const ConductanceField& field, double alpha, const Vertex& x, double r0);

// ---- oscillation of a parabolic function

enum class BoundaryData { HalfSpace, Constant };

struct OscillationSpec {
    double alpha = 1.0;
    Vertex x0;
    double r = 64.0;
    double xi = 0.25;
    int levels = 3;  // k = 0..levels
    double c0 = 1.0;
    int time_points = 16;
    BoundaryData data = BoundaryData::HalfSpace;
};

struct OscillationResult {
    std::vector<double> radii;
    std::vector<double> osc;
    double eta = 0.0;  // max_k (osc_k / osc_0)^{1/k}
    bool monotone = true;
    double horizon = 0.0;
};
OscillationResult parabolic_oscillation(const ConductanceField& field, const OscillationSpec& spec);

}  // namespace rcm::exact
