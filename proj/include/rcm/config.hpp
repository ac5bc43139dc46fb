#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/environment.hpp"
#include "rcm/toml.hpp"
#include "rcm/walker.hpp"

namespace rcm {

inline constexpr const char* kVersion = "0.3.1";

struct ProcessBlock {
    double alpha = 1.0;
    std::string variant = "full";  // full | truncated | localized
    double delta = 1.0;
    std::vector<std::int64_t> x0;  // empty: origin
    double R = 1.0;
    bool truncated = false;        // localized only
    std::int64_t n = 1;
};

struct RunConfig {
    LatticeSpec lattice;
    DistributionSpec environment;
    std::optional<std::uint64_t> env_seed;  // unset: derived from the master seed
    ProcessBlock process;
    std::uint64_t seed = 0;
    std::size_t replicas = 1000;
    unsigned threads = 1;
    std::string out_dir;  // empty: outputs go where --out says
    // Remaining top-level tables (exi, simulate, exact, stable, ...), verbatim.
    nlohmann::json sections = nlohmann::json::object();
    std::vector<nlohmann::json> experiments;
    std::vector<std::string> warnings;

    // Every field that can change a result; out_dir and threads are excluded.
    nlohmann::json canonical() const;
    std::string hash() const;

    std::uint64_t environment_seed() const;
    std::uint64_t module_seed(const std::string& module) const;
    std::shared_ptr<const Lattice> make_lattice() const;
    std::shared_ptr<const ConductanceField> make_field() const;
    ProcessSpec process_spec() const;
    Vertex start_vertex() const;
    // Table `name` from sections, or an empty object.
    const nlohmann::json& section(const std::string& name) const;
};

// Reads RCM_* variables through `getenv_fn` and patches the parsed tree:
// RCM_SEED, RCM_THREADS, RCM_REPLICAS, RCM_OUT, and RCM_<TABLE>_<KEY> for the
// lattice, environment and process tables (e.g. RCM_PROCESS_ALPHA=1.5).
using EnvLookup = std::function<const char*(const char*)>;
void apply_env_overrides(nlohmann::json& tree, const EnvLookup& getenv_fn);

// Semantic validation of a parsed tree. Errors name the offending field.
RunConfig config_from_json(const nlohmann::json& tree);
RunConfig parse_config_text(std::string_view text, const EnvLookup& getenv_fn = nullptr);
RunConfig parse_config(const std::string& path, const EnvLookup& getenv_fn = nullptr);

// A single experiment block merged over the run's lattice, environment and
// process tables; the result validates like a standalone config.
RunConfig experiment_config(const RunConfig& base, const nlohmann::json& block);

std::string fnv1a_hex(const std::string& s);

}  // namespace rcm
