#pragma once

// First-order optimizers over a flat parameter vector: Adam with bias
// correction and SGD with optional heavy-ball momentum.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace pitchrl::optim {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    void validate() const;
    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    AdamState() = default;
    AdamState(AdamConfig cfg, std::size_t n) : config(cfg), m(n, 0.0), v(n, 0.0) {}
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct SgdConfig {
    double lr = 1e-3;
    double momentum = 0.9;  // 0 disables the velocity buffer
    void validate() const;
    friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

struct SgdState {
    SgdConfig config;
    std::vector<double> velocity;

    SgdState() = default;
    SgdState(SgdConfig cfg, std::size_t n) : config(cfg), velocity(n, 0.0) {}
    friend bool operator==(const SgdState&, const SgdState&) = default;
};

/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; p <- p - lr mhat / (sqrt(vhat) + eps).
/// Throws std::domain_error on non-finite gradients, std::invalid_argument on shape mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// p <- p - lr g, or with momentum vel <- mu vel + g; p <- p - lr vel.
void sgd_step(SgdState& state, std::span<double> params, std::span<const double> grads);

enum class OptimizerKind { Adam, Sgd };
std::string_view to_string(OptimizerKind k);
/// "adam" or "sgd"; throws std::invalid_argument otherwise.
OptimizerKind parse_optimizer(std::string_view name);

// One update interface over both optimizers.
class Optimizer {
 public:
    Optimizer() = default;
    static Optimizer adam(AdamConfig cfg, std::size_t n) { return Optimizer(AdamState(cfg, n)); }
    static Optimizer sgd(SgdConfig cfg, std::size_t n) { return Optimizer(SgdState(cfg, n)); }

    OptimizerKind kind() const;
    void step(std::span<double> params, std::span<const double> grads);

    const std::variant<AdamState, SgdState>& state() const { return state_; }
    friend bool operator==(const Optimizer&, const Optimizer&) = default;

    nlohmann::json to_json() const;
    static Optimizer from_json(const nlohmann::json& j);

 private:
    explicit Optimizer(std::variant<AdamState, SgdState> s) : state_(std::move(s)) {}
    std::variant<AdamState, SgdState> state_;
};

}  // namespace pitchrl::optim
