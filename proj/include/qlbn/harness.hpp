#pragma once

#include "qlbn/bayesnet.hpp"
#include "qlbn/eventlog.hpp"
#include "qlbn/procmine.hpp"
#include "qlbn/quantum.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qlbn::harness {

using quantum::InterferenceMode;

struct ExperimentConfig {
    std::filesystem::path log;
    std::filesystem::path merges;   // optional JSON list of merge rules
    std::filesystem::path aliases;  // optional JSON object, original name -> display name
    double threshold = 0.05;
    double missing = 0.70;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    InterferenceMode mode = InterferenceMode::amplitude;
    std::vector<std::string> queries;   // empty: every network variable
    std::vector<std::string> evidence;  // VAR=present|absent, applied to every query
    std::vector<eventlog::Lifecycle> keep_lifecycles{eventlog::Lifecycle::complete};  // for W_ tasks
    int em_max_iters = 200;
    double em_tol = 1e-6;
    double em_pseudocount = 1.0;
    unsigned threads = 1;

    void validate() const;  // throws invalid_argument
};

// Relative paths inside the file are resolved against the file's directory.
ExperimentConfig config_from_json(std::string_view text, const std::filesystem::path& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

// Sets exactly floor(fraction * cells) cells to missing, drawn without replacement.
eventlog::CaseMatrix inject_missing(const eventlog::CaseMatrix& m, double fraction, std::uint64_t seed);

// Everything up to and including the control network.
struct PreparedData {
    std::size_t activity_count = 0;  // universe before merging
    procmine::TransitionGraph graph;  // pruned and merged
    procmine::CycleRemoval structure;
    eventlog::CaseMatrix matrix;
    bayesnet::BayesNet control;
};

PreparedData prepare(const ExperimentConfig& cfg);
PreparedData prepare(const eventlog::EventLog& log, const std::vector<procmine::MergeRule>& rules,
                     const ExperimentConfig& cfg);

struct SeedNet {
    std::uint64_t seed = 0;
    std::optional<bayesnet::EmResult> em;
    std::string error;  // non-empty when learning failed
};

// One EM net per seed, possibly in parallel; results are in seed order.
std::vector<SeedNet> learn_seed_nets(const PreparedData& data, const ExperimentConfig& cfg);

struct ReportRow {
    std::string variable;
    double quantum_p = 0.0;
    double classical_p = 0.0;
    double control_p = 0.0;
    double quantum_err_pct = 0.0;
    double classical_err_pct = 0.0;
    double phi = 0.0;
    double h_theta = 0.0;
    bool clamped = false;

    bool operator==(const ReportRow&) const = default;
};

struct SeedReport {
    std::uint64_t seed = 0;
    std::string error;
    std::vector<ReportRow> rows;
    double mean_quantum_err = 0.0;
    double mean_classical_err = 0.0;
    int em_iterations = 0;
    bool em_converged = false;
    double em_log_likelihood = 0.0;

    bool ok() const noexcept { return error.empty(); }
};

struct ExperimentReport {
    std::string mode;
    double missing = 0.0;
    double threshold = 0.0;
    std::vector<std::string> evidence;
    std::vector<SeedReport> seeds;
    // Over seeds that succeeded. Standard deviations are sample (n - 1) estimates, 0 for one seed.
    double mean_quantum_err = 0.0;
    double mean_classical_err = 0.0;
    double std_quantum_err = 0.0;
    double std_classical_err = 0.0;

    std::size_t successful_seeds() const;
    bool quantum_wins_every_seed() const;  // mean quantum error <= mean classical error per seed
};

ExperimentReport evaluate(const PreparedData& data, const std::vector<SeedNet>& nets, const ExperimentConfig& cfg,
                          InterferenceMode mode);

ExperimentReport run_experiment(const ExperimentConfig& cfg);

enum class ReportFormat { json, csv, markdown };

ReportFormat parse_format(std::string_view text);
std::string emit_report(const ExperimentReport& r, ReportFormat format);
ExperimentReport report_from_json(std::string_view text);

inline constexpr std::string_view kCsvHeader =
    "variable,quantum_p,classical_p,control_p,quantum_err_pct,classical_err_pct";

}  // namespace qlbn::harness
