#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/rng.hpp"

namespace rcm {

enum class ProcessVariant { Full, Truncated, Localized };

struct ProcessSpec {
    double alpha = 1.0;
    ProcessVariant variant = ProcessVariant::Full;
    double delta = 1.0;          // Truncated: jumps with rho > delta are suppressed
    Vertex x0;                   // Localized: w replaced by 1 on pairs with both ends outside B(x0, R)
    double R = 1.0;
    bool localized_truncated = false;  // Localized: also suppress jumps with rho > R
    std::int64_t n = 1;          // scaling index for simulate_scaled

    static ProcessSpec full(double alpha);
    static ProcessSpec truncated(double alpha, double delta);
    static ProcessSpec localized(double alpha, const Vertex& x0, double R, bool truncated);

    void validate() const;
    // Effective truncation radius, if any.
    std::optional<double> truncation() const;
};

struct WalkerOptions {
    double near_radius = 0.0;  // 0: chosen by dimension
    double cap = 1099511627776.0;  // 2^40; proposals beyond it censor the replica
    std::uint64_t max_jumps = 100'000'000;
    std::uint64_t max_proposals_per_step = 50'000'000;
};

enum class StepStatus { Ok, Censored, Budget };

struct StepResult {
    double hold = 0.0;
    Vertex next;
    StepStatus status = StepStatus::Ok;
};

// One stream for the Poisson clock, one for jump proposals and acceptance.
struct WalkStreams {
    Rng clock;
    Rng proposal;
    explicit WalkStreams(std::uint64_t seed) : clock(mix_seed(seed, 1)), proposal(mix_seed(seed, 2)) {}
};

enum class PathStatus { Complete, Censored, BudgetExceeded };
const char* to_string(PathStatus s);

struct Jump {
    double time = 0.0;
    Vertex to;
    friend bool operator==(const Jump&, const Jump&) = default;
};

struct PathSample {
    Vertex start;
    std::vector<Jump> events;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    PathStatus status = PathStatus::Complete;
    double stop_time = 0.0;  // time of censoring when status != Complete
    Vertex position_at(double t) const;
};

struct Proposal {
    enum class Kind { Jump, Reject, Censor } kind = Kind::Reject;
    Vertex y;
    double r = 0.0;
    // Dominating rate for this target: accept iff u * bound < C_{x,y} mu_y.
    double bound = 0.0;
    double kernel = 0.0;  // r^{-(d+alpha)}
};

// Dominating jump kernel for thinning. Lattice kernels do not depend on x.
class JumpProposer {
public:
    virtual ~JumpProposer() = default;
    virtual double rate(const Vertex& x) const = 0;
    virtual Proposal draw(const Vertex& x, Rng& rng) const = 0;
    // Probability mass that is censored per unit time at x.
    virtual double censor_rate(const Vertex& x) const = 0;
};

std::shared_ptr<const JumpProposer> make_proposer(const ConductanceField& field, double alpha,
                                                  const WalkerOptions& opts = {});

class Walker {
public:
    Walker(std::shared_ptr<const ConductanceField> field, ProcessSpec spec, WalkerOptions opts = {});
    // Shares the proposal kernel of another walker on the same field; needed
    // for coupled constructions.
    Walker(const Walker& base, ProcessSpec spec);

    const ProcessSpec& spec() const { return spec_; }
    const ConductanceField& field() const { return *field_; }
    double dominating_rate(const Vertex& x) const { return proposer_->rate(x); }
    double censor_rate(const Vertex& x) const { return proposer_->censor_rate(x); }

    // Effective conductance of the configured variant.
    double effective_conductance(const Vertex& x, const Vertex& y, double r) const;

    StepResult step(const Vertex& x, WalkStreams& streams) const;
    PathSample simulate_path(const Vertex& x0, double horizon, std::uint64_t seed) const;

    struct Endpoint {
        Vertex position;
        PathStatus status = PathStatus::Complete;
        std::uint64_t jumps = 0;
    };
    Endpoint simulate_endpoint(const Vertex& x0, double horizon, std::uint64_t seed) const;

    struct ExitSample {
        double tau = 0.0;
        Vertex position;
        double distance = 0.0;
        bool censored = false;
    };
    ExitSample exit_time(const Vertex& x0, double r, std::uint64_t seed) const;

private:
    std::shared_ptr<const ConductanceField> field_;
    ProcessSpec spec_;
    WalkerOptions opts_;
    std::shared_ptr<const JumpProposer> proposer_;
    std::optional<double> trunc_;
    double exponent_ = 0.0;
};

struct ScaledEvent {
    double time = 0.0;
    std::array<double, kMaxDim> pos{};
};

struct ScaledPath {
    int dim = 0;
    std::array<double, kMaxDim> start{};
    std::vector<ScaledEvent> events;
    PathStatus status = PathStatus::Complete;
};

// Path of n^{-1} X_{n^alpha t}; x0 is the unscaled start (so the scaled start is x0/n).
ScaledPath simulate_scaled(const Walker& walker, const Vertex& x0, double t, std::uint64_t seed);

struct MeyerPair {
    PathSample full;
    PathSample truncated;
    double t_delta = std::numeric_limits<double>::infinity();
    bool prefix_identical = false;
};

// Full and truncated walks driven by the same streams. They agree up to the
// first accepted jump of length > delta in the full walk.
MeyerPair meyer_coupled_pair(std::shared_ptr<const ConductanceField> field, double alpha, double delta,
                             const Vertex& x0, double horizon, std::uint64_t seed, const WalkerOptions& opts = {});

}  // namespace rcm
