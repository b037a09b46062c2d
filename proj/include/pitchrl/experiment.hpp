#pragma once

// Alpha sweep over seeds, per-alpha aggregation and the Adam-vs-SGD
// comparison. Each run owns a private directory:
//
//   <output_dir>/alpha-<a>_seed-<s>/
//     manifest.json  train_log.csv  checkpoints/  eval_trace.csv  result.json
//
// A run whose manifest hash matches and whose result.json exists is skipped;
// one with checkpoints but no result continues from the latest checkpoint.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pitchrl/config.hpp"
#include "pitchrl/optim.hpp"

namespace pitchrl::experiment {

std::string tool_version();
/// UTC, ISO 8601 to the second.
std::string utc_timestamp();

struct RunManifest {
    std::string command;
    std::string config_ini;  // resolved configuration, canonical INI text
    std::vector<double> alphas;
    std::vector<std::uint64_t> seeds;
    std::string tool_version;
    std::string timestamp;
    std::string config_hash;  // content_hash(config_ini)
    nlohmann::json args = nlohmann::json::object();  // command-specific inputs
};

RunManifest make_manifest(const std::string& command, const config::WorkbenchConfig& cfg);
nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);
/// Parses the embedded INI back into a configuration.
config::WorkbenchConfig manifest_config(const RunManifest& m);

struct SweepConfig {
    // alphas, seeds, workers, selection and optimizer come from here
    config::WorkbenchConfig base;
    std::filesystem::path output_dir = "runs";

    const std::vector<double>& alphas() const { return base.sweep.alphas; }
    const std::vector<std::uint64_t>& seeds() const { return base.sweep.seeds; }
    optim::OptimizerKind optimizer() const { return base.ppo.optimizer; }
    void validate() const;
};

struct EvalPoint {
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::string optimizer;
    std::int64_t checkpoint_id = 0;  // training step of the reported checkpoint
    double deviation_deg = 0.0;
    double power_w = 0.0;
    double mean_reward = 0.0;
    double mean_abs_action_change = 0.0;
    double sign_flip_rate = 0.0;
    friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct AggregatePoint {
    double alpha = 0.0;
    double deviation_deg_mean = 0.0;
    double deviation_deg_std = 0.0;
    double power_w_mean = 0.0;
    double power_w_std = 0.0;
    double mean_abs_action_change = 0.0;  // seed mean
    double sign_flip_rate = 0.0;          // seed mean
    int n_seeds = 0;
    friend bool operator==(const AggregatePoint&, const AggregatePoint&) = default;
};

/// Per-alpha sample mean and std (n - 1; 0 when n = 1), ascending alpha.
/// Bit-identical under any permutation of the input. Throws on empty input.
std::vector<AggregatePoint> aggregate(const std::vector<EvalPoint>& points);

/// (mean, sample std) of xs, summed in sorted order.
std::pair<double, double> mean_and_std(std::vector<double> xs);

// CSV: alpha,seed,optimizer,checkpoint_id,deviation_deg,power_w,mean_reward,
//      mean_abs_action_change,sign_flip_rate
void write_points_csv(std::ostream& os, const std::vector<EvalPoint>& points);
std::vector<EvalPoint> read_points_csv(std::istream& is);
std::vector<EvalPoint> read_points_csv(const std::filesystem::path& path);
nlohmann::json to_json(const EvalPoint& p);
EvalPoint point_from_json(const nlohmann::json& j);

std::string run_directory_name(double alpha, std::uint64_t seed);

struct RunOutcome {
    double alpha = 0.0;
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    std::optional<EvalPoint> point;
    bool skipped = false;              // already complete with a matching manifest
    std::int64_t resumed_from = -1;    // checkpoint step, or -1
    std::string error;                 // set when the run failed
};

/// One training run in a private directory. Never throws for training
/// failures; those land in RunOutcome::error and <dir>/failure.txt.
RunOutcome run_single(const config::WorkbenchConfig& run_cfg, std::uint64_t seed,
                      const std::filesystem::path& dir);

/// The configuration one run of a sweep is trained with.
config::WorkbenchConfig run_config(const config::WorkbenchConfig& base, double alpha,
                                   std::uint64_t seed);

struct SweepResult {
    std::vector<EvalPoint> points;     // grid order: alpha-major, then seed
    std::vector<RunOutcome> outcomes;  // grid order
    std::size_t failures() const;
    std::size_t skipped() const;
};

using ProgressFn = std::function<void(const RunOutcome&)>;

/// All (alpha, seed) runs with up to base.sweep.workers threads, then
/// results.csv / results.json / manifest.json in output_dir. Throws
/// std::runtime_error only when every run failed.
SweepResult run_sweep(const SweepConfig& cfg, const ProgressFn& progress = {});

void write_results(const SweepResult& r, const std::filesystem::path& dir);

struct CompareConfig {
    config::WorkbenchConfig base;  // alphas from base.sweep.compare_alphas
    std::vector<optim::OptimizerKind> arms{optim::OptimizerKind::Adam, optim::OptimizerKind::Sgd};
    std::filesystem::path output_dir = "compare";
};

struct ArmReport {
    optim::OptimizerKind optimizer = optim::OptimizerKind::Adam;
    std::vector<EvalPoint> points;
    std::vector<AggregatePoint> aggregates;
    std::size_t failures = 0;
    friend bool operator==(const ArmReport&, const ArmReport&) = default;
};

struct ComparisonReport {
    std::vector<ArmReport> arms;
};

/// Paired sweeps (same seeds, same alphas) per arm; writes comparison.csv
/// and comparison.json to output_dir.
ComparisonReport compare_optimizers(const CompareConfig& cfg, const ProgressFn& progress = {});

// optimizer,alpha,n_seeds,deviation_deg_mean,deviation_deg_std,power_w_mean,
// power_w_std,mean_abs_action_change,sign_flip_rate
void write_comparison_csv(std::ostream& os, const ComparisonReport& r);
nlohmann::json to_json(const ComparisonReport& r);

}  // namespace pitchrl::experiment
