#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "rcm/exact.hpp"
#include "rcm/rng.hpp"

using namespace rcm;
using namespace rcm::exact;

namespace {

std::shared_ptr<const Lattice> lattice(LatticeSpec s) { return std::make_shared<const Lattice>(s); }

ConductanceField constant_z1() { return ConductanceField(lattice(LatticeSpec::full(1)), DistributionSpec::constant_one(), 0); }

ConductanceField weighted_example(int d) {
    LatticeSpec s = LatticeSpec::full(d);
    s.measure_cm = 2.0;
    s.measure_seed = 9;
    return ConductanceField(lattice(s), DistributionSpec::paper_example(0.1, 0.1, 4, 4), 21);
}

Eigen::MatrixXd dense(const GeneratorMatrix& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        L(i, i) = g.diag[static_cast<std::size_t>(i)];
        for (auto k = g.row_ptr[static_cast<std::size_t>(i)]; k < g.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            L(i, g.col[static_cast<std::size_t>(k)]) = g.val[static_cast<std::size_t>(k)];
    }
    return L;
}

// e^{tL} through the symmetrization M^{1/2} L M^{-1/2}.
struct SymOracle {
    Eigen::VectorXd sq;  // mu^{1/2}
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    explicit SymOracle(const GeneratorMatrix& g) {
        const auto L = dense(g);
        const auto n = L.rows();
        sq.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) sq[i] = std::sqrt(g.mu[static_cast<std::size_t>(i)]);
        Eigen::MatrixXd S = sq.asDiagonal() * L * sq.cwiseInverse().asDiagonal();
        S = 0.5 * (S + S.transpose());
        es.compute(S);
    }
    Eigen::MatrixXd apply(const std::function<double(double)>& f) const {
        const auto& V = es.eigenvectors();
        Eigen::VectorXd fl = es.eigenvalues().unaryExpr(f);
        const Eigen::MatrixXd fs = V * fl.asDiagonal() * V.transpose();
        return sq.cwiseInverse().asDiagonal() * fs * sq.asDiagonal();
    }
    Eigen::MatrixXd exp(double t) const {
        return apply([t](double l) { return std::exp(t * l); });
    }
};

}  // namespace

TEST_CASE("Poisson weights carry the requested mass") {
    for (double m : {0.0, 0.3, 5.0, 80.0, 3000.0}) {
        const auto pw = poisson_weights(m, 1e-13);
        double s = 0;
        for (double w : pw.w) s += w;
        CHECK(s == doctest::Approx(pw.mass));
        // Truncation loses at most tol; lgamma roundoff in the weights grows with m.
        CHECK(pw.mass >= 1.0 - 1e-13 - 1e-15 * m);
        if (m > 0 && m < 100) {
            const auto k = pw.left + 2;
            if (k - pw.left < pw.w.size()) {
                const double oracle = std::exp(-m + static_cast<double>(k) * std::log(m) - std::lgamma(k + 1.0));
                CHECK(pw.w[k - pw.left] == doctest::Approx(oracle).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("conservative generator: zero row sums and detailed balance") {
    const auto f = weighted_example(2);
    const auto g = build_generator(f, GeneratorSpec::conservative(1.2, f.lattice().ball(f.lattice().origin(), 3.0)));
    const auto L = dense(g);
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        CHECK(std::abs(L.row(i).sum()) < 1e-12);
        CHECK(g.leak[static_cast<std::size_t>(i)] == 0.0);
        for (Eigen::Index j = 0; j < L.cols(); ++j)
            if (i != j)
                CHECK(g.mu[static_cast<std::size_t>(i)] * L(i, j) ==
                      doctest::Approx(g.mu[static_cast<std::size_t>(j)] * L(j, i)).epsilon(1e-12));
    }
    CHECK(g.index_of(Vertex{0, 0}) >= 0);
    CHECK(g.index_of(Vertex{50, 0}) == -1);
}

TEST_CASE("Dirichlet leak equals the rate out of the window") {
    const auto f = constant_z1();
    const auto g = build_generator(f, GeneratorSpec::dirichlet(1.0, f.lattice().ball(Vertex{0}, 4.0)));
    const auto L = dense(g);
    const double cx = total_rate(f, Vertex{0}, 1.0);
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        CHECK(-L.row(i).sum() == doctest::Approx(g.leak[static_cast<std::size_t>(i)]).epsilon(1e-10));
    // Row total rate is the full C_x, in or out of the window.
    const auto i0 = g.index_of(Vertex{0});
    CHECK(-g.diag[static_cast<std::size_t>(i0)] == doctest::Approx(cx).epsilon(1e-10));
}

TEST_CASE("uniformization matches the eigendecomposition") {
    const auto f = weighted_example(1);
    for (auto bc : {Boundary::Conservative, Boundary::Dirichlet}) {
        GeneratorSpec spec = GeneratorSpec::conservative(0.9, f.lattice().ball(Vertex{0}, 12.0));
        spec.boundary = bc;
        const auto g = build_generator(f, spec);
        const SymOracle oracle(g);
        const auto x = g.index_of(Vertex{0});
        for (double t : {0.01, 0.5, 3.0, 20.0}) {
            const auto p = heat_kernel(g, t, Vertex{0});
            const Eigen::MatrixXd P = oracle.exp(t);
            for (std::size_t j = 0; j < g.size(); ++j)
                CHECK(p[j] * g.mu[j] == doctest::Approx(P(x, static_cast<Eigen::Index>(j))).epsilon(1e-9).scale(1.0));
            if (bc == Boundary::Conservative) CHECK(row_mass(g, p) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("evolve_col with a source integrates the semigroup") {
    const auto f = constant_z1();
    const auto g = build_generator(f, GeneratorSpec::dirichlet(1.0, f.lattice().ball(Vertex{0}, 6.0)));
    const SymOracle oracle(g);
    const Uniformizer u(g);
    std::vector<double> zero(g.size(), 0.0), one(g.size(), 1.0);
    const std::vector<double> times{0.7, 4.0};
    const auto out = u.evolve_col(zero, times, one);
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double t = times[k];
        const Eigen::MatrixXd I = oracle.apply([t](double l) { return std::expm1(t * l) / l; });
        const Eigen::VectorXd ref = I * Eigen::VectorXd::Ones(I.rows());
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(out[k][i] == doctest::Approx(ref[static_cast<Eigen::Index>(i)]).epsilon(1e-9));
    }
}

TEST_CASE("on-diagonal heat kernel is nonincreasing in t") {
    const auto f = weighted_example(1);
    const auto g = build_generator(f, GeneratorSpec::conservative(1.0, f.lattice().ball(Vertex{0}, 20.0)));
    const std::vector<double> ts = geometric_grid(0.01, 100.0, 30);
    const auto rows = heat_kernel_rows(g, Vertex{0}, ts);
    const auto x = static_cast<std::size_t>(g.index_of(Vertex{0}));
    for (std::size_t k = 1; k < ts.size(); ++k) CHECK(rows[k][x] <= rows[k - 1][x] * (1 + 1e-12));
}

TEST_CASE("time window and grids") {
    const auto w = ondiag_time_window(64.0, 0.8, 0.5);
    CHECK(w.lo == doctest::Approx(2.0 * std::pow(64.0, 0.4)));
    CHECK(w.hi == doctest::Approx(std::pow(64.0, 0.8)));
    CHECK_THROWS(ondiag_time_window(2.0, 1.0, 0.5));
    const auto gg = geometric_grid(1.0, 16.0, 5);
    CHECK(gg[2] == doctest::Approx(4.0));
    const auto lg = linear_grid(0.0, 1.0, 3);
    CHECK(lg[1] == doctest::Approx(0.5));
}

TEST_CASE("single-state exit law is exponential with rate C_x") {
    const auto f = weighted_example(1);
    const auto g = ball_generator(f, 1.0, Vertex{0}, 0.5);
    REQUIRE(g.size() == 1);
    const double cx = total_rate(f, Vertex{0}, 1.0);
    for (double t : {0.05, 0.3, 2.0})
        CHECK(dirichlet_exit_cdf(g, Vertex{0}, t) == doctest::Approx(-std::expm1(-cx * t)).epsilon(1e-9));
}

TEST_CASE("exit mean agrees with a dense solve") {
    const auto f = weighted_example(1);
    const auto g = ball_generator(f, 1.0, Vertex{0}, 8.0);
    const auto L = dense(g);
    const Eigen::VectorXd u = (-L).lu().solve(Eigen::VectorXd::Ones(L.rows()));
    const auto m = dirichlet_exit_moments(f, 1.0, Vertex{0}, 8.0);
    CHECK(m.mean_tau == doctest::Approx(u[g.index_of(Vertex{0})]).epsilon(1e-8));
    CHECK(m.p_beyond_2r >= 0.0);
    CHECK(m.p_beyond_2r <= 1.0);

    std::vector<double> ts = geometric_grid(0.1, 200.0, 20);
    const auto cdf = dirichlet_exit_cdf_sorted(g, Vertex{0}, ts);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        CHECK(cdf[k] == doctest::Approx(dirichlet_exit_cdf(g, Vertex{0}, ts[k])).epsilon(1e-10));
        if (k) CHECK(cdf[k] >= cdf[k - 1]);
    }
}

TEST_CASE("fitted C0 keeps every exit probability at the level") {
    const auto f = constant_z1();
    const std::vector<double> radii{2, 4, 8};
    const double c0 = fit_exit_c0(f, 1.0, Vertex{0}, radii, 0.25);
    CHECK(c0 > 0.0);
    double worst = 0;
    for (double r : radii) {
        const double p = dirichlet_exit_cdf(ball_generator(f, 1.0, Vertex{0}, r), Vertex{0}, c0 * r);
        CHECK(p <= 0.25 + 1e-6);
        worst = std::max(worst, p);
    }
    CHECK(worst == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("Nash entropy is nondecreasing") {
    const auto f = weighted_example(1);
    const auto ts = geometric_grid(1.0, 256.0, 12);
    const auto prof = nash_profile(f, Vertex{0}, 1.0, 16.0, ts);
    CHECK(prof.q_monotone);
    for (std::size_t k = 1; k < prof.Q.size(); ++k) CHECK(prof.Q[k] >= prof.Q[k - 1] - 1e-12);
    for (std::size_t k = 0; k < prof.K.size(); ++k) CHECK(prof.K[k] >= -1e-12);
    CHECK(std::isfinite(nash_fit_constant(prof, 1.0, 16.0, 4.0, 256.0)));
}

TEST_CASE("Poincare ratio bounds every Rayleigh quotient") {
    const auto f = weighted_example(1);
    const Lattice& lat = f.lattice();
    const double r0 = 4.0, alpha = 1.0;
    const Vertex x{0};
    const auto res = poincare_ratio(f, alpha, x, r0);
    CHECK(std::isfinite(res.ratio));
    CHECK(res.ratio > 0.0);
    const auto outer = lat.ball(x, 2.0 * r0);
    CHECK(res.states == outer.size());
    Rng rng(1);
    double best = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        std::unordered_map<Vertex, double, VertexHash> fv;
        for (const auto& v : outer) fv[v] = trial % 2 ? rng.normal() : static_cast<double>(v[0] * v[0]) + rng.uniform();
        double lhs = 0.0, rhs = 0.0;
        for (const auto& z : outer) {
            if (lat.distance(z, x) > r0) continue;
            double mass = 0, avg = 0;
            for (const auto& y : lat.ball(z, r0)) {
                if (y == z || f.conductance(z, y) <= 0.0) continue;
                mass += lat.mu(y);
                avg += fv[y] * lat.mu(y);
            }
            avg /= mass;
            lhs += (fv[z] - avg) * (fv[z] - avg) * lat.mu(z);
            for (const auto& y : outer) {
                if (y == z) continue;
                const double d = fv[z] - fv[y];
                rhs += d * d * f.conductance(z, y) * std::pow(lat.distance(z, y), -(1.0 + alpha)) * lat.mu(z) * lat.mu(y);
            }
        }
        CHECK(lhs / rhs <= res.ratio * (1 + 1e-9));
        best = std::max(best, lhs / rhs);
    }
    CHECK(best > 0.0);
    CHECK_THROWS(poincare_ratio(f, alpha, x, 0.5));
}

TEST_CASE("constant boundary data gives a constant parabolic function") {
    const auto f = constant_z1();
    OscillationSpec os;
    os.alpha = 1.0;
    os.x0 = Vertex{0};
    os.r = 16.0;
    os.levels = 2;
    os.time_points = 4;
    os.c0 = 0.12;
    os.data = BoundaryData::Constant;
    const auto res = parabolic_oscillation(f, os);
    REQUIRE(res.osc.size() == 3);
    for (double o : res.osc) CHECK(std::abs(o) < 1e-12);

    os.data = BoundaryData::HalfSpace;
    const auto hs = parabolic_oscillation(f, os);
    CHECK(hs.osc[0] > 0.0);
    CHECK(hs.osc[0] <= 1.0 + 1e-12);
    CHECK(hs.eta < 1.0);
    os.xi = 1.5;
    CHECK_THROWS(parabolic_oscillation(f, os));
}
