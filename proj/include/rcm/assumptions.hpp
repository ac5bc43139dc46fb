#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcm/environment.hpp"

namespace rcm::assumptions {

struct ExiOptions {
    double ceiling = 1e6;                // upper constants must stay below this
    std::size_t max_enumerate = 100000;  // |B(0,6R)| above this is sampled
    std::size_t sample_count = 1000;
    std::size_t z_samples = 8;           // z per x for the B_z^w ratio (z = x always included)
    double c_g = 0.0;                    // 0: from the d-set diagnostic at the origin
    bool exi_prime = false;              // also evaluate the alpha < 1 variant
    std::uint64_t seed = 0;
};

struct ExiRecord {
    std::string condition;
    double R = 0.0;
    double r = 0.0;
    Vertex x;
    double value = 0.0;     // normalized quantity at this point
    double constant = 0.0;  // running worst constant for the condition
    bool pass = true;
};

struct ConditionResult {
    std::string condition;
    double worst = 0.0;
    bool lower = false;  // true when the constant is a lower bound
    bool pass = false;
    std::size_t points = 0;
};

struct ExiReport {
    double theta = 0.0;
    double alpha = 0.0;
    std::vector<double> R_grid;
    std::vector<double> r_grid;
    double c_g = 0.0;
    double c_star = 0.0;
    std::vector<ConditionResult> conditions;  // small_scale, volume_c0, inverse_sum, tail, lower_tail[, small_scale_prime]
    // Lower bound for the lower_tail constant implied by volume_c0 and inverse_sum.
    double c1 = 0.0;
    double lemma_lower_bound = 0.0;
    bool lemma_consistent = true;
    std::size_t vertices_checked = 0;
    bool sampled = false;
    std::vector<ExiRecord> records;
    bool pass = false;

    const ConditionResult& condition(const std::string& name) const;
};

ExiReport verify_exi(const ConductanceField& field, double alpha, double theta, std::span<const double> R_grid,
                     std::span<const double> r_grid, const ExiOptions& opts = {});

enum class TailKind { P1, P2, P3, P3Star, P4, P5, P6 };
TailKind parse_tail_kind(const std::string& s);
const char* to_string(TailKind k);

struct TailProbeSpec {
    TailKind which = TailKind::P2;
    Vertex x;
    Vertex z;             // p6 only
    double r = 8.0;
    double R = 8.0;
    double eps0 = 0.1;
    double c0_star = 2.0;
    double c0 = 0.75;
    double volume_ratio = 1.0;  // C4 / C3 in the p6 threshold
    double alpha = 1.0;
    std::int64_t n = 1;   // p5 scaling index
    std::size_t replications = 1000;
    std::uint64_t seed = 0;
    void validate() const;
};

struct TailEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::size_t hits = 0;
    std::size_t replications = 0;
};

// Per-replication statistic; the event is stat > eps0 (p6: stat <= threshold).
std::vector<double> tail_statistics(const TailProbeSpec& spec, const DistributionSpec& dist,
                                    std::shared_ptr<const Lattice> lattice, unsigned threads = 1);
TailEstimate estimate_tail_probability(const TailProbeSpec& spec, const DistributionSpec& dist,
                                       std::shared_ptr<const Lattice> lattice, unsigned threads = 1);
// Estimates for several eps0 from one set of replications (monotone by construction).
std::vector<TailEstimate> estimate_tail_curve(const TailProbeSpec& spec, const DistributionSpec& dist,
                                              std::shared_ptr<const Lattice> lattice, std::span<const double> eps,
                                              unsigned threads = 1);

}  // namespace rcm::assumptions
