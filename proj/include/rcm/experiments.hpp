#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/config.hpp"

namespace rcm::experiments {

// One checked quantity. Monte Carlo values carry a standard error and are
// judged at estimate -/+ 3 se, so only a significant violation fails.
struct MetricRecord {
    std::string name;
    double value = 0.0;
    double stderr_ = std::numeric_limits<double>::quiet_NaN();  // NaN: deterministic value
    std::string op = "info";  // "<=", "<", ">=", ">", "in", "info"
    double tol = 0.0;
    double tol_hi = 0.0;  // upper end for "in"
    bool hard = true;
    bool pass = true;
    std::string ref;  // provenance tag: the estimate checked, "plumbing", or "engineering"

    void evaluate();
};

MetricRecord info(std::string name, double value, std::string ref, double se = std::numeric_limits<double>::quiet_NaN());
MetricRecord check(std::string name, double value, std::string op, double tol, std::string ref,
                   double se = std::numeric_limits<double>::quiet_NaN(), bool hard = true);
MetricRecord check_in(std::string name, double value, double lo, double hi, std::string ref, bool hard = true);

struct ExperimentReport {
    std::string id;
    std::string kind;
    std::string config_hash;
    std::string version = kVersion;
    std::uint64_t master_seed = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> environment_seeds;
    std::vector<MetricRecord> metrics;
    nlohmann::json data = nlohmann::json::object();
    std::vector<std::string> notes;
    std::string error;  // set when the run aborted
    double runtime_s = 0.0;

    bool pass() const;
    const MetricRecord& metric(const std::string& name) const;
    bool has_metric(const std::string& name) const;
    // runtime_s is the only field that varies between identical runs.
    nlohmann::json to_json(bool with_runtime = true) const;
};

// Every kind reads its parameters from cfg.section("experiment_block").
ExperimentReport one_step_law(const RunConfig& cfg);
ExperimentReport meyer_coupling(const RunConfig& cfg);
ExperimentReport ondiag_decay(const RunConfig& cfg);
ExperimentReport exit_scaling(const RunConfig& cfg);
ExperimentReport nash_profile(const RunConfig& cfg);
ExperimentReport poincare(const RunConfig& cfg);
ExperimentReport oscillation(const RunConfig& cfg);
ExperimentReport marginal_convergence(const RunConfig& cfg);
ExperimentReport environment_law(const RunConfig& cfg);
ExperimentReport moment_gate(const RunConfig& cfg);
ExperimentReport krylov_probe(const RunConfig& cfg);
ExperimentReport tail_probe(const RunConfig& cfg);
ExperimentReport exi(const RunConfig& cfg);

std::vector<std::string> experiment_kinds();
// Runs one merged experiment config; failures inside the run become a report
// with `error` set rather than an exception.
ExperimentReport run_experiment(const RunConfig& cfg);

struct SuiteResult {
    std::vector<ExperimentReport> reports;
    bool pass = true;
};
SuiteResult run_suite(const RunConfig& manifest);

// <out>/<id>.json per report plus <out>/summary.csv.
void write_reports(const SuiteResult& suite, const std::string& out_dir);
std::string summary_csv(const SuiteResult& suite);

}  // namespace rcm::experiments
