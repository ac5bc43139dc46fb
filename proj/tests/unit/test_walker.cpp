#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rcm/walker.hpp"

using namespace rcm;

namespace {

const double kPi2Over3 = std::numbers::pi * std::numbers::pi / 3.0;

std::shared_ptr<const ConductanceField> field(int d, DistributionSpec spec, std::uint64_t seed = 1) {
    return std::make_shared<const ConductanceField>(std::make_shared<const Lattice>(LatticeSpec::full(d)),
                                                    std::move(spec), seed);
}

std::shared_ptr<const ConductanceField> constant_z1() { return field(1, DistributionSpec::constant_one()); }
std::shared_ptr<const ConductanceField> example_z1() {
    return field(1, DistributionSpec::paper_example(0.1, 0.1, 4, 4), 5);
}

}  // namespace

TEST_CASE("truncated walk with delta = 1 makes only unit jumps") {
    Walker w(example_z1(), ProcessSpec::truncated(1.0, 1.0));
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = w.simulate_path(Vertex{0}, 50.0, s);
        Vertex prev{0};
        for (const auto& e : p.events) {
            CHECK(std::llabs(e.to[0] - prev[0]) == 1);
            prev = e.to;
        }
    }
}

TEST_CASE("paths are reproducible from the seed") {
    Walker w(example_z1(), ProcessSpec::full(1.0));
    const auto a = w.simulate_path(Vertex{3}, 20.0, 99);
    const auto b = w.simulate_path(Vertex{3}, 20.0, 99);
    const auto c = w.simulate_path(Vertex{3}, 20.0, 100);
    CHECK(a.events == b.events);
    CHECK(a.events != c.events);
    const auto e = w.simulate_endpoint(Vertex{3}, 20.0, 99);
    CHECK(e.position == a.position_at(20.0));
    CHECK(e.jumps == a.events.size());
}

TEST_CASE("event times increase inside the horizon") {
    Walker w(field(2, DistributionSpec::paper_example(0.1, 0.1, 4, 4)), ProcessSpec::full(1.5));
    const auto p = w.simulate_path(Vertex{0, 0}, 30.0, 4);
    REQUIRE(!p.events.empty());
    double t = 0.0;
    for (const auto& e : p.events) {
        CHECK(e.time > t);
        CHECK(e.time <= 30.0);
        t = e.time;
    }
    CHECK(p.position_at(0.0) == Vertex{0, 0});
    CHECK(p.position_at(p.events.front().time) == p.events.front().to);
}

TEST_CASE("tiny horizon gives no events") {
    Walker w(constant_z1(), ProcessSpec::full(1.0));
    for (std::uint64_t s = 0; s < 100; ++s) CHECK(w.simulate_path(Vertex{0}, 1e-12, s).events.empty());
}

TEST_CASE("jump count over a long horizon matches the total rate") {
    Walker w(constant_z1(), ProcessSpec::full(1.0));
    const double T = 3000.0;
    const auto e = w.simulate_endpoint(Vertex{0}, T, 8);
    const double mean = kPi2Over3 * T;
    CHECK(std::abs(static_cast<double>(e.jumps) - mean) < 5.0 * std::sqrt(mean));
    CHECK(w.dominating_rate(Vertex{0}) >= kPi2Over3 - 1e-9);
}

TEST_CASE("scaled path is the rescaled unscaled path") {
    for (std::int64_t n : {1, 2, 4}) {
        ProcessSpec spec = ProcessSpec::full(1.5);
        spec.n = n;
        Walker w(constant_z1(), spec);
        const auto sp = simulate_scaled(w, Vertex{2}, 1.0, 11);
        const double ts = std::pow(static_cast<double>(n), 1.5);
        const auto raw = w.simulate_path(Vertex{2}, ts, 11);
        REQUIRE(sp.events.size() == raw.events.size());
        CHECK(sp.start[0] == doctest::Approx(2.0 / n));
        for (std::size_t i = 0; i < raw.events.size(); ++i) {
            CHECK(sp.events[i].time == doctest::Approx(raw.events[i].time / ts));
            CHECK(sp.events[i].pos[0] == doctest::Approx(static_cast<double>(raw.events[i].to[0]) / n));
        }
    }
    CHECK_THROWS(simulate_scaled(Walker(constant_z1(), ProcessSpec::full(1.0)), Vertex{0}, 0.0, 1));
}

TEST_CASE("Meyer pair agrees up to the first big jump") {
    const auto f = example_z1();
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto mp = meyer_coupled_pair(f, 1.0, 2.0, Vertex{0}, 10.0, s);
        CHECK(mp.prefix_identical);
        // Independent recheck of the prefix and of the truncated walk.
        Vertex prev{0};
        for (const auto& e : mp.truncated.events) {
            CHECK(std::llabs(e.to[0] - prev[0]) <= 2);
            prev = e.to;
        }
        for (std::size_t i = 0; i < mp.full.events.size() && mp.full.events[i].time < mp.t_delta; ++i) {
            REQUIRE(i < mp.truncated.events.size());
            CHECK(mp.full.events[i] == mp.truncated.events[i]);
        }
    }
}

TEST_CASE("localized walk follows the full walk until it leaves the ball") {
    const auto f = example_z1();
    const Walker full(f, ProcessSpec::full(1.0));
    const Walker loc(full, ProcessSpec::localized(1.0, Vertex{0}, 6.0, false));
    int compared = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto a = full.simulate_path(Vertex{0}, 40.0, s);
        const auto b = loc.simulate_path(Vertex{0}, 40.0, s);
        for (std::size_t i = 0; i < a.events.size(); ++i) {
            REQUIRE(i < b.events.size());
            CHECK(a.events[i] == b.events[i]);
            ++compared;
            if (std::llabs(a.events[i].to[0]) > 6) break;
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("localized conductance is one outside the ball") {
    const auto f = example_z1();
    const Walker loc(f, ProcessSpec::localized(1.0, Vertex{0}, 4.0, true));
    CHECK(loc.effective_conductance(Vertex{10}, Vertex{12}, 2.0) == 1.0);
    CHECK(loc.effective_conductance(Vertex{1}, Vertex{2}, 1.0) == f->conductance(Vertex{1}, Vertex{2}));
    // Jumps beyond R are suppressed in step(), not through the conductance.
    CHECK(loc.spec().truncation().value() == 4.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
        Vertex prev{0};
        for (const auto& e : loc.simulate_path(Vertex{0}, 20.0, s).events) {
            CHECK(std::llabs(e.to[0] - prev[0]) <= 4);
            prev = e.to;
        }
    }
}

TEST_CASE("proposal bound dominates the target rate") {
    for (const auto& f : {example_z1(), field(2, DistributionSpec::paper_example(0.2, 0.1, 4, 4), 3)}) {
        const auto prop = make_proposer(*f, 1.0);
        Rng rng(5);
        const Vertex x = f->lattice().origin();
        int jumps = 0;
        for (int i = 0; i < 20000; ++i) {
            const auto p = prop->draw(x, rng);
            if (p.kind != Proposal::Kind::Jump) continue;
            ++jumps;
            const double target = f->conductance(x, p.y) * p.kernel * f->lattice().mu(p.y);
            CHECK(p.bound >= target * (1 - 1e-12));
            CHECK(p.kernel == doctest::Approx(std::pow(p.r, -(f->lattice().dim() + 1.0))));
        }
        CHECK(jumps > 10000);
        CHECK(prop->censor_rate(x) < 1e-6);
    }
}

TEST_CASE("exit from a single-vertex ball is Exp(C_x)") {
    const auto f = example_z1();
    const Walker w(f, ProcessSpec::full(1.0));
    const double cx = total_rate(*f, Vertex{0}, 1.0);
    const int n = 20000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        const auto ex = w.exit_time(Vertex{0}, 0.5, static_cast<std::uint64_t>(i));
        CHECK_FALSE(ex.censored);
        CHECK(ex.position != Vertex{0});
        sum += ex.tau;
        sum2 += ex.tau * ex.tau;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0 / cx) < 4.0 * se);
}

TEST_CASE("process specs validate their parameters") {
    CHECK_THROWS(ProcessSpec::full(2.0).validate());
    CHECK_THROWS(ProcessSpec::truncated(1.0, 0.0).validate());
    CHECK_THROWS(ProcessSpec::localized(1.0, Vertex{0}, -1.0, false).validate());
    CHECK(ProcessSpec::truncated(1.0, 3.0).truncation().value() == 3.0);
    CHECK_FALSE(ProcessSpec::full(1.0).truncation().has_value());
}
