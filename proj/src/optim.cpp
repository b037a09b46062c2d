#include "pitchrl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pitchrl/kernels.hpp"

namespace pitchrl::optim {

namespace {

void check_shapes(std::size_t params, std::size_t grads, std::size_t state) {
    if (params != grads || params != state) {
        throw std::invalid_argument("optimizer: parameter, gradient and state sizes differ");
    }
}

void check_finite(std::span<const double> grads) {
    if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
        throw std::domain_error("optimizer: non-finite gradient");
    }
}

}  // namespace

void AdamConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("adam lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("adam eps must be > 0");
}

void SgdConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("sgd momentum must be in [0, 1)");
    }
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    check_shapes(params.size(), grads.size(), state.m.size());
    check_shapes(params.size(), grads.size(), state.v.size());
    check_finite(grads);
    state.t += 1;
    const auto& c = state.config;
    const double t = static_cast<double>(state.t);
    const kernels::AdamCoefficients coeffs{c.lr, c.beta1, c.beta2, c.eps,
                                           1.0 - std::pow(c.beta1, t), 1.0 - std::pow(c.beta2, t)};
    kernels::active().adam_update(params.data(), state.m.data(), state.v.data(), grads.data(),
                                  params.size(), coeffs);
}

void sgd_step(SgdState& state, std::span<double> params, std::span<const double> grads) {
    const bool use_velocity = state.config.momentum != 0.0;
    check_shapes(params.size(), grads.size(),
                 use_velocity ? state.velocity.size() : params.size());
    check_finite(grads);
    kernels::active().sgd_update(params.data(), use_velocity ? state.velocity.data() : nullptr,
                                 grads.data(), params.size(), state.config.lr,
                                 state.config.momentum);
}

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "sgd") return OptimizerKind::Sgd;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "' (adam|sgd)");
}

OptimizerKind Optimizer::kind() const {
    return std::holds_alternative<AdamState>(state_) ? OptimizerKind::Adam : OptimizerKind::Sgd;
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
    std::visit(
        [&](auto& s) {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, AdamState>) {
                adam_step(s, params, grads);
            } else {
                sgd_step(s, params, grads);
            }
        },
        state_);
}

nlohmann::json Optimizer::to_json() const {
    nlohmann::json j;
    if (const auto* a = std::get_if<AdamState>(&state_)) {
        j = {{"kind", "adam"},
             {"lr", a->config.lr},
             {"beta1", a->config.beta1},
             {"beta2", a->config.beta2},
             {"eps", a->config.eps},
             {"t", a->t},
             {"m", a->m},
             {"v", a->v}};
    } else {
        const auto& s = std::get<SgdState>(state_);
        j = {{"kind", "sgd"},
             {"lr", s.config.lr},
             {"momentum", s.config.momentum},
             {"velocity", s.velocity}};
    }
    return j;
}

Optimizer Optimizer::from_json(const nlohmann::json& j) {
    const OptimizerKind kind = parse_optimizer(j.at("kind").get<std::string>());
    if (kind == OptimizerKind::Adam) {
        AdamState s;
        s.config = {j.at("lr").get<double>(), j.at("beta1").get<double>(),
                    j.at("beta2").get<double>(), j.at("eps").get<double>()};
        s.config.validate();
        s.t = j.at("t").get<std::int64_t>();
        s.m = j.at("m").get<std::vector<double>>();
        s.v = j.at("v").get<std::vector<double>>();
        if (s.m.size() != s.v.size()) throw std::invalid_argument("adam state sizes differ");
        return Optimizer(std::move(s));
    }
    SgdState s;
    s.config = {j.at("lr").get<double>(), j.at("momentum").get<double>()};
    s.config.validate();
    s.velocity = j.at("velocity").get<std::vector<double>>();
    return Optimizer(std::move(s));
}

}  // namespace pitchrl::optim
