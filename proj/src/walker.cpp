#include "rcm/walker.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include "rcm/alias.hpp"

namespace rcm {

// ---------------------------------------------------------------- ProcessSpec

ProcessSpec ProcessSpec::full(double alpha) {
    ProcessSpec s;
    s.alpha = alpha;
    return s;
}

ProcessSpec ProcessSpec::truncated(double alpha, double delta) {
    ProcessSpec s;
    s.alpha = alpha;
    s.variant = ProcessVariant::Truncated;
    s.delta = delta;
    return s;
}

ProcessSpec ProcessSpec::localized(double alpha, const Vertex& x0, double R, bool truncated) {
    ProcessSpec s;
    s.alpha = alpha;
    s.variant = ProcessVariant::Localized;
    s.x0 = x0;
    s.R = R;
    s.localized_truncated = truncated;
    return s;
}

void ProcessSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (variant == ProcessVariant::Truncated && !(delta >= 1.0))
        throw std::invalid_argument("process.delta must be >= 1");
    if (variant == ProcessVariant::Localized && !(R >= 1.0)) throw std::invalid_argument("process.R must be >= 1");
    if (n < 1) throw std::invalid_argument("process.n must be >= 1");
}

std::optional<double> ProcessSpec::truncation() const {
    if (variant == ProcessVariant::Truncated) return delta;
    if (variant == ProcessVariant::Localized && localized_truncated) return R;
    return std::nullopt;
}

const char* to_string(PathStatus s) {
    switch (s) {
        case PathStatus::Complete: return "complete";
        case PathStatus::Censored: return "censored";
        case PathStatus::BudgetExceeded: return "budget_exceeded";
    }
    return "?";
}

Vertex PathSample::position_at(double t) const {
    Vertex x = start;
    for (const auto& e : events) {
        if (e.time > t) break;
        x = e.to;
    }
    return x;
}

// ---------------------------------------------------------------- proposers

namespace {

// The envelope used for proposals is max(envelope, 1) so that the localized
// weight 1 is dominated as well; all variants then share one kernel and can
// be driven by common random numbers.
double proposal_envelope(const DistributionSpec& spec, double r) { return std::max(1.0, spec.envelope(r)); }

class LatticeProposer final : public JumpProposer {
public:
    LatticeProposer(const ConductanceField& field, double alpha, const WalkerOptions& opts)
        : d_(field.lattice().dim()), s_(field.lattice().d() + alpha), cm_(field.lattice().mu_max()) {
        const auto& spec = field.spec();
        double near = opts.near_radius;
        if (near <= 0.0) {
            switch (d_) {
                case 1: near = 4096.0; break;
                case 2: near = 64.0; break;
                case 3: near = 16.0; break;
                default: near = 8.0; break;
            }
        }
        if (!(opts.cap > 2.0 * near)) throw std::invalid_argument("walker: cap must exceed twice the near radius");
        std::vector<double> weights;
        const Lattice full(LatticeSpec::full(d_));
        for_each_in_shell(full, full.origin(), 0.0, near, [&](const Vertex& z, double r) {
            const double k = std::pow(r, -s_);
            near_off_.push_back(z);
            near_r_.push_back(r);
            near_kernel_.push_back(k);
            near_bound_.push_back(proposal_envelope(spec, r) * cm_ * k);
            weights.push_back(near_bound_.back());
        });
        for (double lo = near; lo < opts.cap; lo *= 2.0) {
            Annulus a;
            a.lo = lo;
            a.hi = std::min(2.0 * lo, opts.cap);
            a.ilo = static_cast<std::int64_t>(std::floor(a.lo));
            a.ihi = static_cast<std::int64_t>(std::floor(a.hi));
            a.kmax = std::max(1.0, spec.envelope_sup(a.lo, a.hi)) * cm_ * std::pow(a.lo, -s_);
            double count = 0.0;
            if (d_ == 1) count = 2.0 * static_cast<double>(a.ihi - a.ilo);
            else count = std::pow(2.0 * static_cast<double>(a.ihi) + 1.0, d_);
            ann_.push_back(a);
            weights.push_back(a.kmax * count);
        }
        const double cut = std::floor(opts.cap);
        censor_ = cm_ * std::max(1.0, spec.tail_coeff(cut)) / std::max(1e-300, spec.tail_coeff(cut)) *
                  envelope_integral_tail(spec, d_, alpha, cut);
        weights.push_back(censor_);
        table_ = AliasTable(weights);
        total_ = table_.total();
    }

    double rate(const Vertex&) const override { return total_; }
    double censor_rate(const Vertex&) const override { return censor_; }

    Proposal draw(const Vertex& x, Rng& rng) const override {
        Proposal p;
        const std::size_t idx = table_.sample(rng);
        const std::size_t nn = near_off_.size();
        if (idx < nn) {
            p.kind = Proposal::Kind::Jump;
            p.y = x + near_off_[idx];
            p.r = near_r_[idx];
            p.kernel = near_kernel_[idx];
            p.bound = near_bound_[idx];
            return p;
        }
        if (idx == nn + ann_.size()) {
            p.kind = Proposal::Kind::Censor;
            return p;
        }
        const Annulus& a = ann_[idx - nn];
        Vertex z(d_);
        if (d_ == 1) {
            const std::int64_t m = rng.uniform_int(a.ilo + 1, a.ihi);
            z[0] = rng.uniform() < 0.5 ? -m : m;
            p.r = static_cast<double>(m);
        } else {
            for (int i = 0; i < d_; ++i) z[i] = rng.uniform_int(-a.ihi, a.ihi);
            const double r2 = squared_norm(z);
            if (r2 <= a.lo * a.lo || r2 > a.hi * a.hi) {
                p.kind = Proposal::Kind::Reject;
                return p;
            }
            p.r = std::sqrt(r2);
        }
        p.kind = Proposal::Kind::Jump;
        p.y = x + z;
        p.kernel = std::pow(p.r, -s_);
        p.bound = a.kmax;
        return p;
    }

private:
    struct Annulus {
        double lo = 0.0, hi = 0.0;
        std::int64_t ilo = 0, ihi = 0;
        double kmax = 0.0;
    };
    int d_;
    double s_;
    double cm_;
    std::vector<Vertex> near_off_;
    std::vector<double> near_r_, near_kernel_, near_bound_;
    std::vector<Annulus> ann_;
    AliasTable table_;
    double total_ = 0.0;
    double censor_ = 0.0;
};

// Gasket: the generated region is finite, so the proposal from x is a table
// over all generated vertices plus a censoring bucket for the region beyond.
class GasketProposer final : public JumpProposer {
public:
    GasketProposer(const ConductanceField& field, double alpha)
        : lattice_(field.lattice_ptr()), spec_(field.spec()), alpha_(alpha), s_(field.lattice().d() + alpha) {
        if (spec_.tail_exponent() >= alpha) throw std::invalid_argument("envelope not summable");
        const Vertex o = lattice_->origin();
        const double ext = static_cast<double>(lattice_->gasket_exit_distance(o));
        std::vector<double> radii;
        for (double r = 1.0; r <= ext; r *= 2.0) radii.push_back(r);
        cg_ = lattice_->dset_diagnostic(std::span<const Vertex>(&o, 1), radii).c_upper;
    }

    double rate(const Vertex& x) const override { return entry(x)->total; }
    double censor_rate(const Vertex& x) const override { return entry(x)->censor; }

    Proposal draw(const Vertex& x, Rng& rng) const override {
        const auto e = entry(x);
        Proposal p;
        const std::size_t idx = e->table.sample(rng);
        if (idx == e->targets.size()) {
            p.kind = Proposal::Kind::Censor;
            return p;
        }
        p.kind = Proposal::Kind::Jump;
        p.y = lattice_->gasket_vertices()[e->targets[idx]];
        p.r = e->r[idx];
        p.kernel = std::pow(p.r, -s_);
        p.bound = e->weights[idx];
        return p;
    }

private:
    struct Entry {
        AliasTable table;
        std::vector<int> targets;
        std::vector<double> r, weights;
        double censor = 0.0;
        double total = 0.0;
    };

    std::shared_ptr<const Entry> entry(const Vertex& x) const {
        const int ix = lattice_->gasket_index(x);
        {
            std::lock_guard lk(mu_);
            auto it = cache_.find(ix);
            if (it != cache_.end()) return it->second;
        }
        auto e = std::make_shared<Entry>();
        const auto row = lattice_->gasket_distance_row(x);
        const double cm = lattice_->mu_max();
        for (std::size_t i = 0; i < row->size(); ++i) {
            if ((*row)[i] <= 0) continue;
            const double r = (*row)[i];
            e->targets.push_back(static_cast<int>(i));
            e->r.push_back(r);
            e->weights.push_back(proposal_envelope(spec_, r) * cm * std::pow(r, -s_));
        }
        const double D = static_cast<double>(lattice_->gasket_exit_distance(x));
        const double tau = spec_.tail_exponent();
        const double dv = lattice_->d();
        e->censor = cm * cg_ * std::max(1.0, spec_.tail_coeff(D)) * std::pow(2.0, dv + tau) *
                    std::pow(std::max(D, 1.0), tau - alpha_) / (1.0 - std::pow(2.0, tau - alpha_));
        auto w = e->weights;
        w.push_back(e->censor);
        e->table = AliasTable(w);
        e->total = e->table.total();
        std::lock_guard lk(mu_);
        if (cache_.size() >= 2048) cache_.clear();
        cache_.emplace(ix, e);
        return e;
    }

    std::shared_ptr<const Lattice> lattice_;
    DistributionSpec spec_;
    double alpha_;
    double s_;
    double cg_ = 1.0;
    mutable std::mutex mu_;
    mutable std::unordered_map<int, std::shared_ptr<const Entry>> cache_;
};

}  // namespace

std::shared_ptr<const JumpProposer> make_proposer(const ConductanceField& field, double alpha, const WalkerOptions& opts) {
    if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha outside (0,2)");
    if (field.spec().tail_exponent() >= alpha) throw std::invalid_argument("envelope not summable");
    if (field.lattice().kind() == LatticeKind::Gasket) return std::make_shared<GasketProposer>(field, alpha);
    return std::make_shared<LatticeProposer>(field, alpha, opts);
}

// ---------------------------------------------------------------- Walker

Walker::Walker(std::shared_ptr<const ConductanceField> field, ProcessSpec spec, WalkerOptions opts)
    : field_(std::move(field)), spec_(std::move(spec)), opts_(opts) {
    if (!field_) throw std::invalid_argument("Walker: null field");
    spec_.validate();
    if (spec_.variant == ProcessVariant::Localized) field_->lattice().require(spec_.x0);
    proposer_ = make_proposer(*field_, spec_.alpha, opts_);
    trunc_ = spec_.truncation();
    exponent_ = field_->lattice().d() + spec_.alpha;
}

Walker::Walker(const Walker& base, ProcessSpec spec)
    : field_(base.field_), spec_(std::move(spec)), opts_(base.opts_), proposer_(base.proposer_) {
    spec_.validate();
    if (spec_.alpha != base.spec_.alpha) throw std::invalid_argument("Walker: coupled walkers need equal alpha");
    if (spec_.variant == ProcessVariant::Localized) field_->lattice().require(spec_.x0);
    trunc_ = spec_.truncation();
    exponent_ = base.exponent_;
}

double Walker::effective_conductance(const Vertex& x, const Vertex& y, double r) const {
    if (spec_.variant == ProcessVariant::Localized) {
        const Lattice& lat = field_->lattice();
        auto inside = [&](const Vertex& v) {
            if (lat.kind() == LatticeKind::Gasket) return lat.distance(v, spec_.x0) <= spec_.R;
            return squared_norm(v - spec_.x0) <= spec_.R * spec_.R + 1e-9;
        };
        if (!inside(x) && !inside(y)) return 1.0;
    }
    return field_->conductance_at(x, y, r);
}

StepResult Walker::step(const Vertex& x, WalkStreams& streams) const {
    StepResult res;
    res.next = x;
    const Lattice& lat = field_->lattice();
    const bool counting = lat.spec().counting_measure();
    const double lam = proposer_->rate(x);
    double t = 0.0;
    for (std::uint64_t k = 0; k < opts_.max_proposals_per_step; ++k) {
        t += streams.clock.exponential(lam);
        const Proposal p = proposer_->draw(x, streams.proposal);
        // Always consumed, so coupled walkers stay aligned.
        const double u = streams.proposal.uniform();
        if (p.kind == Proposal::Kind::Reject) continue;
        if (p.kind == Proposal::Kind::Censor) {
            if (trunc_ && *trunc_ < opts_.cap) continue;
            res.hold = t;
            res.status = StepStatus::Censored;
            return res;
        }
        if (trunc_ && p.r > *trunc_) continue;
        if (!lat.contains(p.y)) continue;
        const double w = effective_conductance(x, p.y, p.r);
        if (w <= 0.0) continue;
        const double target = w * p.kernel * (counting ? 1.0 : lat.mu(p.y));
        if (u * p.bound < target) {
            res.hold = t;
            res.next = p.y;
            return res;
        }
    }
    res.hold = t;
    res.status = StepStatus::Budget;
    return res;
}

PathSample Walker::simulate_path(const Vertex& x0, double horizon, std::uint64_t seed) const {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_path: horizon must be > 0");
    field_->lattice().require(x0);
    PathSample ps;
    ps.start = x0;
    ps.horizon = horizon;
    ps.seed = seed;
    WalkStreams streams(seed);
    Vertex x = x0;
    double t = 0.0;
    for (;;) {
        if (ps.events.size() >= opts_.max_jumps) {
            ps.status = PathStatus::BudgetExceeded;
            ps.stop_time = t;
            break;
        }
        const StepResult s = step(x, streams);
        if (t + s.hold > horizon) break;
        if (s.status != StepStatus::Ok) {
            ps.status = s.status == StepStatus::Censored ? PathStatus::Censored : PathStatus::BudgetExceeded;
            ps.stop_time = t + s.hold;
            break;
        }
        t += s.hold;
        ps.events.push_back({t, s.next});
        x = s.next;
    }
    return ps;
}

Walker::Endpoint Walker::simulate_endpoint(const Vertex& x0, double horizon, std::uint64_t seed) const {
    if (!(horizon > 0.0)) throw std::invalid_argument("simulate_endpoint: horizon must be > 0");
    Endpoint e;
    e.position = x0;
    WalkStreams streams(seed);
    double t = 0.0;
    for (;;) {
        if (e.jumps >= opts_.max_jumps) {
            e.status = PathStatus::BudgetExceeded;
            break;
        }
        const StepResult s = step(e.position, streams);
        if (t + s.hold > horizon) break;
        if (s.status != StepStatus::Ok) {
            e.status = s.status == StepStatus::Censored ? PathStatus::Censored : PathStatus::BudgetExceeded;
            break;
        }
        t += s.hold;
        e.position = s.next;
        ++e.jumps;
    }
    return e;
}

Walker::ExitSample Walker::exit_time(const Vertex& x0, double r, std::uint64_t seed) const {
    const Lattice& lat = field_->lattice();
    lat.require(x0);
    ExitSample ex;
    ex.position = x0;
    WalkStreams streams(seed);
    double t = 0.0;
    for (std::uint64_t jumps = 0;; ++jumps) {
        if (jumps >= opts_.max_jumps) {
            ex.censored = true;
            break;
        }
        const StepResult s = step(ex.position, streams);
        t += s.hold;
        if (s.status != StepStatus::Ok) {
            ex.censored = true;
            break;
        }
        ex.position = s.next;
        ex.distance = lat.kind() == LatticeKind::Gasket ? lat.distance(ex.position, x0)
                                                          : std::sqrt(squared_norm(ex.position - x0));
        if (ex.distance > r) break;
    }
    ex.tau = t;
    return ex;
}

ScaledPath simulate_scaled(const Walker& walker, const Vertex& x0, double t, std::uint64_t seed) {
    if (!(t > 0.0)) throw std::invalid_argument("simulate_scaled: t must be > 0");
    const auto n = static_cast<double>(walker.spec().n);
    const double tscale = std::pow(n, walker.spec().alpha);
    const PathSample path = walker.simulate_path(x0, tscale * t, seed);
    ScaledPath sp;
    sp.dim = x0.dim;
    sp.status = path.status;
    for (int i = 0; i < x0.dim; ++i) sp.start[i] = static_cast<double>(x0[i]) / n;
    sp.events.reserve(path.events.size());
    for (const auto& e : path.events) {
        ScaledEvent se;
        se.time = e.time / tscale;
        for (int i = 0; i < x0.dim; ++i) se.pos[i] = static_cast<double>(e.to[i]) / n;
        sp.events.push_back(se);
    }
    return sp;
}

MeyerPair meyer_coupled_pair(std::shared_ptr<const ConductanceField> field, double alpha, double delta,
                             const Vertex& x0, double horizon, std::uint64_t seed, const WalkerOptions& opts) {
    const Walker full(field, ProcessSpec::full(alpha), opts);
    const Walker trunc(full, ProcessSpec::truncated(alpha, delta));
    MeyerPair mp;
    mp.full = full.simulate_path(x0, horizon, seed);
    mp.truncated = trunc.simulate_path(x0, horizon, seed);
    const Lattice& lat = field->lattice();
    std::size_t k = mp.full.events.size();
    Vertex prev = x0;
    for (std::size_t i = 0; i < mp.full.events.size(); ++i) {
        const auto& e = mp.full.events[i];
        if (lat.distance(prev, e.to) > delta) {
            mp.t_delta = e.time;
            k = i;
            break;
        }
        prev = e.to;
    }
    bool same = mp.truncated.events.size() >= k;
    for (std::size_t i = 0; same && i < k; ++i) same = mp.full.events[i] == mp.truncated.events[i];
    if (same && k == mp.full.events.size()) same = mp.truncated.events.size() == k;
    if (same && k < mp.truncated.events.size()) same = mp.truncated.events[k].time >= mp.t_delta;
    mp.prefix_identical = same;
    return mp;
}

}  // namespace rcm
