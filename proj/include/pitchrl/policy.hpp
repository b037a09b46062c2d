#pragma once

// Tanh MLP trunk with a Gaussian action head (tanh-squashed, state-independent
// log-std) and a scalar value head. Gradients of the PPO loss are computed by
// hand-written reverse-mode accumulation over the flat parameter vector.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace pitchrl::policy {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct Architecture {
    // layers[0] is the observation size, the rest are hidden widths.
    std::vector<std::size_t> layers{4, 64, 64};
    std::size_t action_dim = 1;

    std::size_t obs_dim() const { return layers.front(); }
    std::size_t trunk_layers() const { return layers.size() - 1; }
    std::size_t feature_dim() const { return layers.back(); }
    std::size_t param_count() const;
    void validate() const;
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

// Flat layout: for each trunk layer W (out x in, row-major) then b; mean head
// W (A x H), b (A); value head w (H), b (1); log_std (A).
class PolicyParams {
 public:
    PolicyParams() = default;
    explicit PolicyParams(Architecture arch);  // all zeros

    const Architecture& architecture() const { return arch_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    std::span<const double> weight(std::size_t layer) const;
    std::span<const double> bias(std::size_t layer) const;
    std::span<const double> mean_weight() const;
    std::span<const double> mean_bias() const;
    std::span<const double> value_weight() const;
    double value_bias() const;
    std::span<const double> log_std() const;
    std::span<double> log_std();

    std::size_t weight_offset(std::size_t layer) const { return trunk_offsets_[layer]; }
    std::size_t bias_offset(std::size_t layer) const;
    std::size_t mean_weight_offset() const { return head_offset_; }
    std::size_t mean_bias_offset() const;
    std::size_t value_weight_offset() const;
    std::size_t value_bias_offset() const;
    std::size_t log_std_offset() const;

    /// Clamp log_std into [kLogStdMin, kLogStdMax].
    void clamp_log_std();
    bool finite() const;

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

 private:
    Architecture arch_;
    std::vector<std::size_t> trunk_offsets_;
    std::size_t head_offset_ = 0;
    std::vector<double> values_;
};

struct Gradients {
    std::vector<double> values;

    Gradients() = default;
    explicit Gradients(const PolicyParams& like) : values(like.size(), 0.0) {}
    Gradients& operator+=(const Gradients& other);
    double norm() const;
    void scale(double s);
};

/// Scaled-normal init (std 1/sqrt(fan_in)); mean head shrunk by 0.01, biases zero.
PolicyParams init_params(const Architecture& arch, std::mt19937_64& rng,
                         double initial_log_std);

struct PolicyOutput {
    std::vector<double> pre_squash_mean;
    std::vector<double> mean_action;  // tanh(pre_squash_mean)
    double value = 0.0;
};

/// Throws std::invalid_argument on an observation of the wrong size.
PolicyOutput forward(const PolicyParams& params, std::span<const double> obs);

/// log N(z; mu, sigma) summed over action dimensions.
double gaussian_log_prob(std::span<const double> z, std::span<const double> mean,
                         std::span<const double> log_std);
/// sum log(1 - tanh(z)^2), evaluated without cancellation.
double squash_log_det(std::span<const double> z);

/// Log-density of a squashed action a = tanh(z). -inf when |a| >= 1.
double log_prob(const PolicyParams& params, std::span<const double> obs,
                std::span<const double> action);
/// Same density addressed by the pre-squash sample z.
double log_prob_pre_squash(const PolicyParams& params, std::span<const double> obs,
                           std::span<const double> z);

struct Sample {
    std::vector<double> action;      // tanh(z), strictly inside (-1, 1) for finite z
    std::vector<double> pre_squash;  // z = mean + sigma * eps
    double log_prob = 0.0;
    double value = 0.0;
};

Sample sample(const PolicyParams& params, std::span<const double> obs, std::mt19937_64& rng);

// Row-major batch of n samples. raw_actions hold the pre-squash z.
struct BatchView {
    std::span<const double> obs;            // n x obs_dim
    std::span<const double> raw_actions;    // n x action_dim
    std::span<const double> old_log_probs;  // n
    std::span<const double> advantages;     // n
    std::span<const double> returns;        // n
    std::size_t size() const { return old_log_probs.size(); }
};

struct LossSpec {
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
};

struct LossReport {
    double loss = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;       // mean(old_lp - new_lp)
    double clip_fraction = 0.0;
    double max_ratio_deviation = 0.0;  // max |ratio - 1|
};

/// Entropy of the pre-squash Gaussian.
double gaussian_entropy(std::span<const double> log_std);

/// Mean PPO loss over the batch:
///   -min(r A, clip(r, 1 -+ eps) A) + value_coef (v - ret)^2 - entropy_coef H.
LossReport evaluate_loss(const PolicyParams& params, const BatchView& batch, const LossSpec& spec);

/// Loss and its exact gradient. Throws std::domain_error if the loss is not finite.
LossReport backward(const PolicyParams& params, const BatchView& batch, const LossSpec& spec,
                    Gradients& grads);

}  // namespace pitchrl::policy
