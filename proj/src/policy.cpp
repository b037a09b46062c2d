#include "pitchrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pitchrl/kernels.hpp"

namespace pitchrl::policy {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// Per-sample activations kept for the backward pass.
class Workspace {
 public:
    explicit Workspace(const Architecture& arch) {
        acts_.resize(arch.layers.size());
        grads_.resize(arch.layers.size());
        for (std::size_t l = 0; l < arch.layers.size(); ++l) {
            acts_[l].assign(arch.layers[l], 0.0);
            grads_[l].assign(arch.layers[l], 0.0);
        }
        mean_.assign(arch.action_dim, 0.0);
        dmean_.assign(arch.action_dim, 0.0);
    }

    // Fills the activations, pre-squash mean and value.
    void forward(const PolicyParams& p, std::span<const double> obs) {
        const Architecture& arch = p.architecture();
        std::copy(obs.begin(), obs.end(), acts_[0].begin());
        for (std::size_t l = 0; l < arch.trunk_layers(); ++l) {
            kernels::gemv(p.weight(l), p.bias(l), acts_[l], acts_[l + 1]);
            for (double& a : acts_[l + 1]) a = std::tanh(a);
        }
        const auto& h = acts_.back();
        kernels::gemv(p.mean_weight(), p.mean_bias(), h, mean_);
        value_ = p.value_bias() + kernels::dot(p.value_weight(), h);
    }

    // Accumulates d(loss)/d(params) given upstream d/d(mean) and d/d(value).
    void backward(const PolicyParams& p, double dvalue, std::vector<double>& g) {
        const Architecture& arch = p.architecture();
        const std::span<double> grad(g);
        const auto& h = acts_.back();
        const std::size_t H = arch.feature_dim();
        const std::size_t A = arch.action_dim;

        kernels::ger_acc(grad.subspan(p.mean_weight_offset(), A * H), dmean_, h);
        kernels::axpy(1.0, dmean_, grad.subspan(p.mean_bias_offset(), A));
        kernels::axpy(dvalue, h, grad.subspan(p.value_weight_offset(), H));
        grad[p.value_bias_offset()] += dvalue;

        auto& dh = grads_.back();
        std::fill(dh.begin(), dh.end(), 0.0);
        kernels::gemv_t_acc(p.mean_weight(), dmean_, dh);
        kernels::axpy(dvalue, p.value_weight(), dh);

        for (std::size_t l = arch.trunk_layers(); l-- > 0;) {
            auto& dout = grads_[l + 1];
            const auto& out = acts_[l + 1];
            for (std::size_t i = 0; i < dout.size(); ++i) dout[i] *= 1.0 - out[i] * out[i];
            const std::size_t rows = arch.layers[l + 1];
            const std::size_t cols = arch.layers[l];
            kernels::ger_acc(grad.subspan(p.weight_offset(l), rows * cols), dout, acts_[l]);
            kernels::axpy(1.0, dout, grad.subspan(p.bias_offset(l), rows));
            if (l > 0) {
                auto& din = grads_[l];
                std::fill(din.begin(), din.end(), 0.0);
                kernels::gemv_t_acc(p.weight(l), dout, din);
            }
        }
    }

    std::span<const double> mean() const { return mean_; }
    std::span<double> dmean() { return dmean_; }
    double value() const { return value_; }

 private:
    std::vector<std::vector<double>> acts_;
    std::vector<std::vector<double>> grads_;
    std::vector<double> mean_;
    std::vector<double> dmean_;
    double value_ = 0.0;
};

void check_obs(const PolicyParams& p, std::span<const double> obs) {
    if (obs.size() != p.architecture().obs_dim()) {
        throw std::invalid_argument("observation has " + std::to_string(obs.size()) +
                                    " components, policy expects " +
                                    std::to_string(p.architecture().obs_dim()));
    }
}

void check_batch(const PolicyParams& p, const BatchView& b) {
    const Architecture& arch = p.architecture();
    const std::size_t n = b.size();
    if (n == 0) throw std::invalid_argument("empty batch");
    if (b.obs.size() != n * arch.obs_dim() || b.raw_actions.size() != n * arch.action_dim ||
        b.advantages.size() != n || b.returns.size() != n) {
        throw std::invalid_argument("batch arrays have inconsistent sizes");
    }
}

// Shared by evaluate_loss and backward so both report identical statistics.
struct SampleTerms {
    double new_log_prob;
    double ratio;
    double surrogate;
    bool unclipped_active;
};

SampleTerms surrogate_terms(double new_lp, double old_lp, double adv, double clip_eps) {
    const double ratio = std::exp(new_lp - old_lp);
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped * adv;
    const bool unclipped_active = unclipped_obj <= clipped_obj;
    return {new_lp, ratio, unclipped_active ? unclipped_obj : clipped_obj, unclipped_active};
}

}  // namespace

std::size_t Architecture::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l + 1] * layers[l] + layers[l + 1];
    const std::size_t H = layers.back();
    n += action_dim * H + action_dim;  // mean head
    n += H + 1;                        // value head
    n += action_dim;                   // log_std
    return n;
}

void Architecture::validate() const {
    if (layers.size() < 2) throw std::invalid_argument("architecture needs an input size and a hidden layer");
    for (auto w : layers) {
        if (w == 0) throw std::invalid_argument("architecture layer widths must be >= 1");
    }
    if (action_dim == 0) throw std::invalid_argument("architecture action_dim must be >= 1");
}

PolicyParams::PolicyParams(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    std::size_t off = 0;
    for (std::size_t l = 0; l < arch_.trunk_layers(); ++l) {
        trunk_offsets_.push_back(off);
        off += arch_.layers[l + 1] * arch_.layers[l] + arch_.layers[l + 1];
    }
    head_offset_ = off;
    values_.assign(arch_.param_count(), 0.0);
}

std::size_t PolicyParams::bias_offset(std::size_t layer) const {
    return trunk_offsets_[layer] + arch_.layers[layer + 1] * arch_.layers[layer];
}
std::size_t PolicyParams::mean_bias_offset() const {
    return head_offset_ + arch_.action_dim * arch_.feature_dim();
}
std::size_t PolicyParams::value_weight_offset() const { return mean_bias_offset() + arch_.action_dim; }
std::size_t PolicyParams::value_bias_offset() const { return value_weight_offset() + arch_.feature_dim(); }
std::size_t PolicyParams::log_std_offset() const { return value_bias_offset() + 1; }

std::span<const double> PolicyParams::weight(std::size_t layer) const {
    return values().subspan(weight_offset(layer), arch_.layers[layer + 1] * arch_.layers[layer]);
}
std::span<const double> PolicyParams::bias(std::size_t layer) const {
    return values().subspan(bias_offset(layer), arch_.layers[layer + 1]);
}
std::span<const double> PolicyParams::mean_weight() const {
    return values().subspan(mean_weight_offset(), arch_.action_dim * arch_.feature_dim());
}
std::span<const double> PolicyParams::mean_bias() const {
    return values().subspan(mean_bias_offset(), arch_.action_dim);
}
std::span<const double> PolicyParams::value_weight() const {
    return values().subspan(value_weight_offset(), arch_.feature_dim());
}
double PolicyParams::value_bias() const { return values_[value_bias_offset()]; }
std::span<const double> PolicyParams::log_std() const {
    return values().subspan(log_std_offset(), arch_.action_dim);
}
std::span<double> PolicyParams::log_std() {
    return values().subspan(log_std_offset(), arch_.action_dim);
}

void PolicyParams::clamp_log_std() {
    for (double& s : log_std()) s = std::clamp(s, kLogStdMin, kLogStdMax);
}

bool PolicyParams::finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.values.size() != values.size()) {
        throw std::invalid_argument("gradient shapes differ");
    }
    kernels::axpy(1.0, other.values, values);
    return *this;
}

double Gradients::norm() const { return std::sqrt(kernels::dot(values, values)); }

void Gradients::scale(double s) {
    for (double& g : values) g *= s;
}

PolicyParams init_params(const Architecture& arch, std::mt19937_64& rng, double initial_log_std) {
    PolicyParams p(arch);
    auto v = p.values();
    auto fill = [&](std::size_t offset, std::size_t count, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        for (std::size_t i = 0; i < count; ++i) v[offset + i] = dist(rng);
    };
    for (std::size_t l = 0; l < arch.trunk_layers(); ++l) {
        fill(p.weight_offset(l), arch.layers[l + 1] * arch.layers[l],
             1.0 / std::sqrt(static_cast<double>(arch.layers[l])));
    }
    const double head_std = 1.0 / std::sqrt(static_cast<double>(arch.feature_dim()));
    fill(p.mean_weight_offset(), arch.action_dim * arch.feature_dim(), 0.01 * head_std);
    fill(p.value_weight_offset(), arch.feature_dim(), head_std);
    for (double& s : p.log_std()) s = initial_log_std;
    p.clamp_log_std();
    return p;
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs) {
    check_obs(params, obs);
    Workspace ws(params.architecture());
    ws.forward(params, obs);
    PolicyOutput out;
    out.pre_squash_mean.assign(ws.mean().begin(), ws.mean().end());
    out.mean_action.resize(out.pre_squash_mean.size());
    std::transform(out.pre_squash_mean.begin(), out.pre_squash_mean.end(), out.mean_action.begin(),
                   [](double m) { return std::tanh(m); });
    out.value = ws.value();
    return out;
}

double gaussian_log_prob(std::span<const double> z, std::span<const double> mean,
                         std::span<const double> log_std) {
    double lp = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double u = (z[j] - mean[j]) * std::exp(-log_std[j]);
        lp += -0.5 * u * u - log_std[j] - kHalfLog2Pi;
    }
    return lp;
}

double squash_log_det(std::span<const double> z) {
    // log(1 - tanh(z)^2) = 2 (log 2 - |z| - log1p(exp(-2|z|)))
    double s = 0.0;
    for (double x : z) {
        const double a = std::abs(x);
        s += 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
    }
    return s;
}

double log_prob_pre_squash(const PolicyParams& params, std::span<const double> obs,
                           std::span<const double> z) {
    check_obs(params, obs);
    if (z.size() != params.architecture().action_dim) {
        throw std::invalid_argument("action has the wrong dimension");
    }
    Workspace ws(params.architecture());
    ws.forward(params, obs);
    return gaussian_log_prob(z, ws.mean(), params.log_std()) - squash_log_det(z);
}

double log_prob(const PolicyParams& params, std::span<const double> obs,
                std::span<const double> action) {
    std::vector<double> z(action.size());
    for (std::size_t j = 0; j < action.size(); ++j) {
        if (!(std::abs(action[j]) < 1.0)) return -std::numeric_limits<double>::infinity();
        z[j] = std::atanh(action[j]);
    }
    return log_prob_pre_squash(params, obs, z);
}

Sample sample(const PolicyParams& params, std::span<const double> obs, std::mt19937_64& rng) {
    check_obs(params, obs);
    Workspace ws(params.architecture());
    ws.forward(params, obs);
    const auto log_std = params.log_std();
    Sample s;
    s.pre_squash.resize(log_std.size());
    s.action.resize(log_std.size());
    for (std::size_t j = 0; j < log_std.size(); ++j) {
        std::normal_distribution<double> normal(0.0, 1.0);
        s.pre_squash[j] = ws.mean()[j] + std::exp(log_std[j]) * normal(rng);
        s.action[j] = std::tanh(s.pre_squash[j]);
    }
    s.log_prob = gaussian_log_prob(s.pre_squash, ws.mean(), log_std) - squash_log_det(s.pre_squash);
    s.value = ws.value();
    return s;
}

double gaussian_entropy(std::span<const double> log_std) {
    double h = 0.0;
    for (double s : log_std) h += 0.5 + kHalfLog2Pi + s;
    return h;
}

LossReport evaluate_loss(const PolicyParams& params, const BatchView& batch, const LossSpec& spec) {
    check_batch(params, batch);
    const Architecture& arch = params.architecture();
    const std::size_t n = batch.size();
    const std::size_t D = arch.obs_dim();
    const std::size_t A = arch.action_dim;
    Workspace ws(arch);
    LossReport r;
    std::size_t clipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ws.forward(params, batch.obs.subspan(i * D, D));
        const auto z = batch.raw_actions.subspan(i * A, A);
        const double new_lp =
            gaussian_log_prob(z, ws.mean(), params.log_std()) - squash_log_det(z);
        const SampleTerms t =
            surrogate_terms(new_lp, batch.old_log_probs[i], batch.advantages[i], spec.clip_eps);
        r.policy_loss -= t.surrogate;
        const double verr = ws.value() - batch.returns[i];
        r.value_loss += verr * verr;
        r.approx_kl += batch.old_log_probs[i] - new_lp;
        if (std::abs(t.ratio - 1.0) > spec.clip_eps) ++clipped;
        r.max_ratio_deviation = std::max(r.max_ratio_deviation, std::abs(t.ratio - 1.0));
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    r.policy_loss *= inv_n;
    r.value_loss *= inv_n;
    r.approx_kl *= inv_n;
    r.clip_fraction = static_cast<double>(clipped) * inv_n;
    r.entropy = gaussian_entropy(params.log_std());
    r.loss = r.policy_loss + spec.value_coef * r.value_loss - spec.entropy_coef * r.entropy;
    return r;
}

LossReport backward(const PolicyParams& params, const BatchView& batch, const LossSpec& spec,
                    Gradients& grads) {
    check_batch(params, batch);
    const Architecture& arch = params.architecture();
    const std::size_t n = batch.size();
    const std::size_t D = arch.obs_dim();
    const std::size_t A = arch.action_dim;
    grads.values.assign(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto log_std = params.log_std();
    std::vector<double> inv_var(A);
    for (std::size_t j = 0; j < A; ++j) inv_var[j] = std::exp(-2.0 * log_std[j]);

    Workspace ws(arch);
    LossReport r;
    std::size_t clipped = 0;
    std::vector<double> dlog_std(A, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        ws.forward(params, batch.obs.subspan(i * D, D));
        const auto z = batch.raw_actions.subspan(i * A, A);
        const auto mean = ws.mean();
        const double new_lp = gaussian_log_prob(z, mean, log_std) - squash_log_det(z);
        const SampleTerms t =
            surrogate_terms(new_lp, batch.old_log_probs[i], batch.advantages[i], spec.clip_eps);
        r.policy_loss -= t.surrogate;
        const double verr = ws.value() - batch.returns[i];
        r.value_loss += verr * verr;
        r.approx_kl += batch.old_log_probs[i] - new_lp;
        if (std::abs(t.ratio - 1.0) > spec.clip_eps) ++clipped;
        r.max_ratio_deviation = std::max(r.max_ratio_deviation, std::abs(t.ratio - 1.0));

        // d(-surrogate)/d(new_lp) is -ratio*A on the unclipped branch, 0 otherwise.
        const double dlp = t.unclipped_active ? -t.ratio * batch.advantages[i] * inv_n : 0.0;
        auto dmean = ws.dmean();
        for (std::size_t j = 0; j < A; ++j) {
            const double diff = z[j] - mean[j];
            dmean[j] = dlp * diff * inv_var[j];
            dlog_std[j] += dlp * (diff * diff * inv_var[j] - 1.0);
        }
        const double dvalue = 2.0 * spec.value_coef * verr * inv_n;
        ws.backward(params, dvalue, grads.values);
    }
    for (std::size_t j = 0; j < A; ++j) {
        grads.values[params.log_std_offset() + j] += dlog_std[j] - spec.entropy_coef;
    }
    r.policy_loss *= inv_n;
    r.value_loss *= inv_n;
    r.approx_kl *= inv_n;
    r.clip_fraction = static_cast<double>(clipped) * inv_n;
    r.entropy = gaussian_entropy(log_std);
    r.loss = r.policy_loss + spec.value_coef * r.value_loss - spec.entropy_coef * r.entropy;
    if (!std::isfinite(r.loss)) throw std::domain_error("PPO loss is not finite");
    return r;
}

}  // namespace pitchrl::policy
