#pragma once

// Clipped-surrogate PPO with GAE, periodic deterministic evaluation and
// resumable checkpoints.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pitchrl/env.hpp"
#include "pitchrl/optim.hpp"
#include "pitchrl/physics.hpp"
#include "pitchrl/policy.hpp"

namespace pitchrl::ppo {

struct PpoConfig {
    std::int64_t total_steps = 500000;
    std::int64_t eval_every = 10000;
    std::int64_t rollout_len = 2000;
    std::int64_t minibatch_size = 250;
    int epochs_per_update = 10;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double max_grad_norm = 0.5;   // global-norm clip; 0 disables
    optim::OptimizerKind optimizer = optim::OptimizerKind::Adam;
    optim::AdamConfig adam;
    optim::SgdConfig sgd;
    std::vector<std::size_t> hidden{64, 64};
    double initial_log_std = -1.0;
    // Training episodes draw a random step target; evaluation never does.
    bool random_training_reference = true;

    void validate() const;
    policy::LossSpec loss_spec() const { return {clip_eps, value_coef, entropy_coef}; }
    std::int64_t checkpoint_count() const { return total_steps / eval_every; }
};

struct RolloutBuffer {
    std::size_t obs_dim = env::kObservationDim;
    std::size_t action_dim = 1;
    std::vector<double> obs;          // n x obs_dim
    std::vector<double> raw_actions;  // n x action_dim, pre-squash
    std::vector<double> actions;      // n x action_dim, squashed
    std::vector<double> log_probs;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<std::uint8_t> dones;
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return rewards.size(); }
};

/// Exactly len transitions from the current policy. Resets the environment
/// whenever an episode has ended; episodes may straddle buffer boundaries.
RolloutBuffer collect_rollout(env::PitchEnv& env, const policy::PolicyParams& params,
                              std::mt19937_64& rng, std::size_t len);

/// A_t = sum_k (gamma lambda)^k delta_{t+k}, reset at done flags; returns = A + V.
/// bootstrap_value is V(s_n) for the state after the last transition; it is
/// ignored when that transition ended an episode.
void compute_gae(RolloutBuffer& buf, double gamma, double lambda, double bootstrap_value);

/// (A - mean) / max(std, 1e-8), population std. A single element maps to 0.
std::vector<double> normalized_advantages(const std::vector<double>& adv);

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;
    // max |ratio - 1| on the first minibatch, before any gradient step
    double initial_ratio_deviation = 0.0;
    int minibatches = 0;
};

/// epochs x shuffled minibatches of gradient steps on the PPO loss.
/// Throws std::domain_error if a loss or gradient turns non-finite.
UpdateStats ppo_update(policy::PolicyParams& params, const RolloutBuffer& buf,
                       const PpoConfig& cfg, optim::Optimizer& optimizer, std::mt19937_64& rng);

struct EvalMetrics {
    double deviation_deg = 0.0;   // mean |phi - r|
    double power_w = 0.0;         // mean electrical power
    double mean_reward = 0.0;
    double mean_abs_action_change = 0.0;
    double sign_flip_rate = 0.0;
    int steps = 0;
};

/// One deterministic episode (mean action) on cfg.ref_schedule.
EvalMetrics evaluate_policy(const policy::PolicyParams& params, const physics::PlantParams& plant,
                            const env::EnvConfig& cfg, std::vector<env::TraceRow>* trace = nullptr);

struct Checkpoint {
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    EvalMetrics eval;
    UpdateStats last_update;
    policy::PolicyParams params;
    optim::Optimizer optimizer;
    env::EnvSnapshot env;
    std::string rng_state;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Numeric blow-up during training, tagged with the environment step.
class TrainingError : public std::runtime_error {
 public:
    TrainingError(std::int64_t step, const std::string& what)
        : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
          step_(step),
          cause_(what) {}
    std::int64_t step() const { return step_; }
    const std::string& cause() const { return cause_; }

 private:
    std::int64_t step_;
    std::string cause_;
};

class Trainer {
 public:
    Trainer(physics::PlantParams plant, env::EnvConfig env_cfg, PpoConfig cfg, std::uint64_t seed);
    /// Continue from a checkpoint taken with the same configuration.
    static Trainer resume(physics::PlantParams plant, env::EnvConfig env_cfg, PpoConfig cfg,
                          const Checkpoint& from);

    std::int64_t step() const { return step_; }
    bool finished() const { return step_ >= cfg_.checkpoint_count() * cfg_.eval_every; }
    const policy::PolicyParams& params() const { return params_; }

    /// Train up to the next evaluation boundary, evaluate and snapshot.
    Checkpoint next_checkpoint();

 private:
    physics::PlantParams plant_;
    env::EnvConfig eval_cfg_;
    PpoConfig cfg_;
    std::uint64_t seed_;
    env::PitchEnv env_;
    policy::PolicyParams params_;
    optim::Optimizer optimizer_;
    std::mt19937_64 rng_;
    std::int64_t step_ = 0;
    UpdateStats last_update_;
};

/// Runs all checkpoints; on_checkpoint (if set) sees each one as it is taken.
std::vector<Checkpoint> train(const physics::PlantParams& plant, const env::EnvConfig& env_cfg,
                              const PpoConfig& cfg, std::uint64_t seed,
                              const std::function<void(const Checkpoint&)>& on_checkpoint = {});

/// step,eval_deviation_deg,eval_power_w,eval_reward,mean_abs_action_change,
/// sign_flip_rate,policy_loss,value_loss,entropy,approx_kl,clip_fraction
void write_training_log_header(std::ostream& os);
void write_training_log_row(std::ostream& os, const Checkpoint& c);

}  // namespace pitchrl::ppo
