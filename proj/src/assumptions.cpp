#include "rcm/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"
#include "rcm/stats.hpp"

namespace rcm::assumptions {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dist(const Lattice& lat, const Vertex& x, const Vertex& y) {
    if (lat.kind() != LatticeKind::Gasket) return std::sqrt(squared_norm(x - y));
    return lat.distance(x, y);
}

struct PointSums {
    double small = 0.0;
    double small_prime = 0.0;
    double c0 = kInf;
    double inverse = 0.0;
    double tail = 0.0;
    double lower = 0.0;
};

}  // namespace

const ConditionResult& ExiReport::condition(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.condition == name) return c;
    throw std::out_of_range("ExiReport: no condition " + name);
}

ExiReport verify_exi(const ConductanceField& field, double alpha, double theta, std::span<const double> R_grid,
                     std::span<const double> r_grid, const ExiOptions& opts) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta outside (0,1)");
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (R_grid.empty() || r_grid.empty()) throw std::invalid_argument("verify_exi: empty grid");
    const Lattice& lat = field.lattice();
    const double d = lat.d();
    const double s = d + alpha;
    const Vertex o = lat.origin();

    ExiReport rep;
    rep.theta = theta;
    rep.alpha = alpha;
    rep.R_grid.assign(R_grid.begin(), R_grid.end());
    rep.r_grid.assign(r_grid.begin(), r_grid.end());
    if (opts.c_g > 0.0) {
        rep.c_g = opts.c_g;
    } else {
        std::vector<double> radii;
        for (double r = 1.0; r <= 64.0; r *= 1.25) radii.push_back(r);
        for (double r = 2.0; r <= 64.0; r *= 2.0) radii.push_back(r - 1e-9);
        if (lat.kind() == LatticeKind::Gasket) {
            const double ext = static_cast<double>(lat.gasket_exit_distance(o));
            std::erase_if(radii, [&](double r) { return r > ext; });
        }
        const auto diag = lat.dset_diagnostic(std::span<const Vertex>(&o, 1), radii);
        rep.c_g = std::max(diag.c_upper, 1.0 / diag.c_lower);
    }
    rep.c_star = 8.0 * std::pow(rep.c_g, 2.0 / d);

    const double Rmax = *std::max_element(R_grid.begin(), R_grid.end());
    const double rmax = *std::max_element(r_grid.begin(), r_grid.end());
    if (lat.kind() == LatticeKind::Gasket &&
        6.0 * Rmax + rep.c_star * rmax > static_cast<double>(lat.gasket_exit_distance(o)))
        throw std::invalid_argument("verify_exi: region too small for B(0,6R)");

    // Candidate vertices: B(0, 6 Rmax), enumerated or sampled.
    std::vector<Vertex> cand = lat.ball(o, 6.0 * Rmax);
    if (cand.size() > opts.max_enumerate) {
        Rng rng(mix_seed(opts.seed, "exi-sample"));
        std::vector<Vertex> pick;
        pick.reserve(opts.sample_count);
        for (std::size_t i = 0; i < opts.sample_count; ++i)
            pick.push_back(cand[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cand.size()) - 1))]);
        std::sort(pick.begin(), pick.end());
        pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
        cand.swap(pick);
        rep.sampled = true;
    }
    rep.vertices_checked = cand.size();
    const double direct_cut = default_direct_cutoff(lat);

    auto compute = [&](const Vertex& x, double r, std::size_t salt) {
        PointSums ps;
        const bool counting = lat.spec().counting_measure();
        auto mu = [&](const Vertex& v) { return counting ? 1.0 : lat.mu(v); };
        for_each_in_shell(lat, x, 0.0, r, [&](const Vertex& y, double rho) {
            const double w = field.conductance_at(x, y, rho);
            ps.small += w * std::pow(rho, 2.0 - s);
            ps.small_prime += w * std::pow(rho, 1.0 - s);
        });
        ps.small /= std::pow(r, 2.0 - alpha);
        ps.small_prime /= std::pow(r, 1.0 - alpha);
        for_each_in_shell(lat, x, 0.0, rep.c_star * r, [&](const Vertex& y, double rho) {
            const double w = field.conductance_at(x, y, rho);
            if (w > 0.0) ps.inverse += 1.0 / w;
        });
        ps.inverse /= std::pow(r, d);
        const double cut = std::min(direct_cut, 16.0 * r);
        ps.tail = kernel_tail(field, x, s, r, std::max(cut, r)) * std::pow(r, alpha);
        ps.lower = kernel_tail(field, x, s, 3.0 * r, std::max(cut, 3.0 * r)) * std::pow(r, alpha);
        // mu(B_z^w(x, r)) / mu(B(x, r)) for z = x and sampled z.
        const auto ball = lat.ball(x, r);
        double mb = 0.0;
        for (const auto& u : ball) mb += mu(u);
        Rng rng(mix_seed(mix_seed(opts.seed, "exi-z"), salt));
        for (std::size_t k = 0; k < std::max<std::size_t>(opts.z_samples, 1); ++k) {
            Vertex z = x;
            if (k > 0) {
                // Half the samples inside B(x, r), where w_{z,z} = 0 matters.
                if (k % 2 == 1) z = ball[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(ball.size()) - 1))];
                else z = cand[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cand.size()) - 1))];
            }
            double m = 0.0;
            for (const auto& u : ball) {
                if (u == z) continue;
                if (field.conductance(u, z) > 0.0) m += mu(u);
            }
            ps.c0 = std::min(ps.c0, m / mb);
        }
        return ps;
    };

    // Sums depend on (x, r) only.
    std::map<std::pair<std::size_t, std::size_t>, PointSums> cache;
    for (std::size_t ri = 0; ri < r_grid.size(); ++ri)
        for (std::size_t xi = 0; xi < cand.size(); ++xi)
            cache.emplace(std::make_pair(xi, ri), compute(cand[xi], r_grid[ri], xi * 7919 + ri));

    struct Acc {
        std::string name;
        bool lower;
        double worst;
        std::size_t points = 0;
    };
    std::vector<Acc> acc = {{"small_scale", false, 0.0}, {"volume_c0", true, kInf}, {"inverse_sum", false, 0.0},
                            {"tail", false, 0.0},        {"lower_tail", true, kInf}};
    if (opts.exi_prime) acc.push_back({"small_scale_prime", false, 0.0});

    for (double R : R_grid) {
        const double rlo = std::pow(R, theta) / 2.0;
        for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
            const double r = r_grid[ri];
            if (r < rlo) continue;
            const bool in_i = r <= 2.0 * R;
            double worst[6] = {0.0, kInf, 0.0, 0.0, kInf, 0.0};
            Vertex arg[6];
            bool any = false;
            for (std::size_t xi = 0; xi < cand.size(); ++xi) {
                if (dist(lat, cand[xi], o) > 6.0 * R + 1e-9) continue;
                any = true;
                const auto& ps = cache.at({xi, ri});
                const double vals[6] = {ps.small, ps.c0, ps.inverse, ps.tail, ps.lower, ps.small_prime};
                for (int c = 0; c < 6; ++c) {
                    const bool lower = c == 1 || c == 4;
                    if (lower ? vals[c] < worst[c] : vals[c] > worst[c]) {
                        worst[c] = vals[c];
                        arg[c] = cand[xi];
                    }
                }
            }
            if (!any) continue;
            for (std::size_t c = 0; c < acc.size(); ++c) {
                if (c != 3 && !in_i) continue;  // (ii) applies to every r >= R^theta / 2
                auto& a = acc[c];
                a.worst = a.lower ? std::min(a.worst, worst[c]) : std::max(a.worst, worst[c]);
                ++a.points;
                ExiRecord rec;
                rec.condition = a.name;
                rec.R = R;
                rec.r = r;
                rec.x = arg[c];
                rec.value = worst[c];
                rec.constant = a.worst;
                rec.pass = a.lower ? (c == 1 ? worst[c] > 0.5 : worst[c] > 1.0 / opts.ceiling)
                                   : (std::isfinite(worst[c]) && worst[c] <= opts.ceiling);
                rep.records.push_back(rec);
            }
        }
    }
    rep.pass = true;
    for (std::size_t c = 0; c < acc.size(); ++c) {
        ConditionResult cr;
        cr.condition = acc[c].name;
        cr.lower = acc[c].lower;
        cr.points = acc[c].points;
        cr.worst = acc[c].points ? acc[c].worst : 0.0;
        if (acc[c].points == 0) cr.pass = false;
        else if (c == 1) cr.pass = cr.worst > 0.5;
        else if (cr.lower) cr.pass = cr.worst > 1.0 / opts.ceiling;
        else cr.pass = std::isfinite(cr.worst) && cr.worst <= opts.ceiling;
        rep.pass = rep.pass && cr.pass;
        rep.conditions.push_back(cr);
    }
    // Lower bound assembled from the c0 and inverse-sum constants by Cauchy-Schwarz.
    const double c0 = rep.condition("volume_c0").worst;
    const double cinv = rep.condition("inverse_sum").worst;
    rep.c1 = c0 / rep.c_g * std::pow(rep.c_star, d) - rep.c_g * std::pow(4.0, d);
    if (rep.c1 > 0.0 && cinv > 0.0) {
        rep.lemma_lower_bound = rep.c1 * rep.c1 * std::pow(rep.c_star, -d - alpha) / cinv;
        if (rep.condition("volume_c0").pass && rep.condition("inverse_sum").pass)
            rep.lemma_consistent = rep.condition("lower_tail").worst >= rep.lemma_lower_bound * (1.0 - 1e-12);
    }
    return rep;
}

// ---------------------------------------------------------------- tail probes

TailKind parse_tail_kind(const std::string& s) {
    if (s == "p1") return TailKind::P1;
    if (s == "p2") return TailKind::P2;
    if (s == "p3") return TailKind::P3;
    if (s == "p3*" || s == "p3star") return TailKind::P3Star;
    if (s == "p4") return TailKind::P4;
    if (s == "p5") return TailKind::P5;
    if (s == "p6") return TailKind::P6;
    throw std::invalid_argument("unknown tail probe: " + s);
}

const char* to_string(TailKind k) {
    switch (k) {
        case TailKind::P1: return "p1";
        case TailKind::P2: return "p2";
        case TailKind::P3: return "p3";
        case TailKind::P3Star: return "p3star";
        case TailKind::P4: return "p4";
        case TailKind::P5: return "p5";
        case TailKind::P6: return "p6";
    }
    return "?";
}

void TailProbeSpec::validate() const {
    if (!(eps0 > 0.0)) throw std::invalid_argument("tail probe: eps0 must be > 0");
    if (replications < 100) throw std::invalid_argument("tail probe: replications must be >= 100");
    if (!(r >= 1.0) || !(R >= 1.0)) throw std::invalid_argument("tail probe: r and R must be >= 1");
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (which == TailKind::P3Star && !(alpha < 1.0)) throw std::invalid_argument("tail probe p3star needs alpha < 1");
    if (which == TailKind::P4 && !(c0_star >= 2.0)) throw std::invalid_argument("tail probe: c0* must be >= 2");
    if (which == TailKind::P6 && !(c0 > 0.5)) throw std::invalid_argument("tail probe: c0 must be > 1/2");
    if (n < 1) throw std::invalid_argument("tail probe: n must be >= 1");
}

namespace {

double statistic(const TailProbeSpec& sp, const DistributionSpec& ds, const ConductanceField& f) {
    const Lattice& lat = f.lattice();
    const double d = lat.d();
    const double s = d + sp.alpha;
    double acc = 0.0;
    switch (sp.which) {
        case TailKind::P1: {
            for (const auto& x : lat.ball(lat.origin(), sp.R))
                for_each_in_shell(lat, x, 0.0, sp.r, [&](const Vertex& y, double rho) {
                    acc += f.conductance_at(x, y, rho) - ds.mean(rho);
                });
            return std::abs(acc) / (std::pow(sp.r, d) * std::pow(sp.R, d));
        }
        case TailKind::P2:
            for_each_in_shell(lat, sp.x, 0.0, sp.r, [&](const Vertex& y, double rho) {
                acc += f.conductance_at(sp.x, y, rho) - ds.mean(rho);
            });
            return std::abs(acc) / std::pow(sp.r, d);
        case TailKind::P3:
        case TailKind::P3Star: {
            const double shift = sp.which == TailKind::P3 ? 2.0 : 1.0;
            for_each_in_shell(lat, sp.x, 0.0, sp.r, [&](const Vertex& y, double rho) {
                acc += (f.conductance_at(sp.x, y, rho) - ds.mean(rho)) * std::pow(rho, shift - s);
            });
            return std::abs(acc) / std::pow(sp.r, shift - sp.alpha);
        }
        case TailKind::P4:
            for_each_in_shell(lat, sp.x, 0.0, sp.c0_star * sp.r, [&](const Vertex& y, double rho) {
                const double w = f.conductance_at(sp.x, y, rho);
                acc += (w > 0.0 ? 1.0 / w : 0.0) - ds.moment(rho, -1.0);
            });
            return std::abs(acc) / std::pow(sp.r, d);
        case TailKind::P5: {
            const double n = static_cast<double>(sp.n);
            auto tent = [&](const Vertex& v) {
                return std::max(0.0, 1.0 - std::sqrt(squared_norm(v)) / n);  // f(v / n), f(u) = (1 - |u|)^+
            };
            const double fx = tent(sp.x);
            for (const auto& y : lat.ball(lat.origin(), n * sp.R)) {
                const double rho = dist(lat, sp.x, y);
                if (y == sp.x || rho < n * sp.r) continue;
                const double h = tent(y) - fx;
                if (h == 0.0) continue;
                acc += h * (f.conductance_at(sp.x, y, rho) - ds.mean(rho)) * std::pow(rho, -s);
            }
            return acc * acc * std::pow(n * sp.r, 2.0 * sp.alpha);
        }
        case TailKind::P6: {
            const bool counting = lat.spec().counting_measure();
            double num = 0.0, den = 0.0;
            for (const auto& y : lat.ball(sp.x, sp.r)) {
                const double m = counting ? 1.0 : lat.mu(y);
                den += m;
                if (y != sp.z && f.conductance(y, sp.z) > 0.0) num += m;
            }
            return num / den;
        }
    }
    return 0.0;
}

}  // namespace

std::vector<double> tail_statistics(const TailProbeSpec& spec, const DistributionSpec& dist,
                                    std::shared_ptr<const Lattice> lattice, unsigned threads) {
    spec.validate();
    const Vertex& x = spec.x.dim ? spec.x : lattice->origin();
    TailProbeSpec sp = spec;
    sp.x = x;
    if (!sp.z.dim) sp.z = x;
    lattice->require(sp.x);
    lattice->require(sp.z);
    const ConductanceField base(lattice, dist, spec.seed);
    std::vector<double> out(spec.replications);
    parallel_for(spec.replications, threads, [&](std::size_t i) {
        const auto f = base.with_seed(mix_seed(spec.seed, i));
        out[i] = statistic(sp, dist, f);
    });
    return out;
}

std::vector<TailEstimate> estimate_tail_curve(const TailProbeSpec& spec, const DistributionSpec& dist,
                                              std::shared_ptr<const Lattice> lattice, std::span<const double> eps,
                                              unsigned threads) {
    const auto st = tail_statistics(spec, dist, std::move(lattice), threads);
    std::vector<TailEstimate> out;
    for (double e : eps) {
        if (!(e > 0.0)) throw std::invalid_argument("tail probe: eps0 must be > 0");
        std::size_t hits = 0;
        for (double v : st) {
            const bool event = spec.which == TailKind::P6 ? v <= spec.volume_ratio * spec.c0 : v > e;
            if (event) ++hits;
        }
        const auto p = stats::proportion(hits, st.size());
        out.push_back({p.mean, p.se, hits, st.size()});
    }
    return out;
}

TailEstimate estimate_tail_probability(const TailProbeSpec& spec, const DistributionSpec& dist,
                                       std::shared_ptr<const Lattice> lattice, unsigned threads) {
    const double e[1] = {spec.eps0};
    return estimate_tail_curve(spec, dist, std::move(lattice), e, threads).front();
}

}  // namespace rcm::assumptions
