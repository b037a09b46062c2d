#pragma once

// One human-editable INI file with [plant], [env], [ppo] and [sweep]
// sections. Unknown keys are rejected. Command-line overrides use the same
// "section.key" names and take precedence over the file.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pitchrl/env.hpp"
#include "pitchrl/physics.hpp"
#include "pitchrl/ppo.hpp"

namespace pitchrl::config {

class ConfigError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

enum class CheckpointSelection { Final, BestReward };

struct SweepSettings {
    std::vector<double> alphas{0.0, 0.05, 0.10, 0.25, 0.5, 0.75, 1.0};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<double> compare_alphas{0.0, 0.25};
    int workers = 1;
    CheckpointSelection selection = CheckpointSelection::Final;
    bool keep_all_checkpoints = true;
};

struct WorkbenchConfig {
    physics::PlantParams plant;
    env::EnvConfig env;
    ppo::PpoConfig ppo;
    SweepSettings sweep;
    // p_max follows 2 u_max^2 / R unless set explicitly.
    bool p_max_explicit = false;

    /// Re-derive dependent values and validate every section.
    void finalize();
};

inline constexpr std::int64_t kFastTotalSteps = 100000;

/// Desk-scale profile: 100k training steps per run.
void apply_fast_profile(WorkbenchConfig& cfg);

WorkbenchConfig parse_config(std::istream& is, const std::string& source = "<stream>");
/// Throws ConfigError naming the path when it is missing or malformed.
WorkbenchConfig load_config(const std::filesystem::path& path);
/// "section.key=value"; throws ConfigError for unknown keys or bad values.
void apply_override(WorkbenchConfig& cfg, const std::string& assignment);
void set_value(WorkbenchConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value);

/// Canonical INI text: fixed key order, shortest round-trip numbers.
std::string to_ini(const WorkbenchConfig& cfg);

nlohmann::json to_json(const physics::PlantParams& p);
nlohmann::json to_json(const env::EnvConfig& e);
nlohmann::json to_json(const ppo::PpoConfig& p);

std::string_view to_string(CheckpointSelection s);
CheckpointSelection parse_selection(std::string_view s);

/// Reference schedule as "t_s:target_deg, ..." and back.
env::ReferenceSchedule parse_schedule_deg(std::string_view s);
std::string format_schedule_deg(const env::ReferenceSchedule& s);

/// git-style SHA-1 of a blob: sha1("blob <len>\0" + content), hex.
std::string content_hash(std::string_view content);

}  // namespace pitchrl::config
