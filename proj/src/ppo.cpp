#include "pitchrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pitchrl/metrics.hpp"
#include "pitchrl/text.hpp"

namespace pitchrl::ppo {

namespace {

constexpr const char* kCheckpointFormat = "pitchrl-checkpoint";
constexpr int kCheckpointVersion = 1;

// One independent stream per purpose.
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      purpose};
    return std::mt19937_64(seq);
}

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
    std::istringstream is(s);
    is >> rng;
    if (!is) throw std::invalid_argument("corrupt generator state in checkpoint");
}

optim::Optimizer make_optimizer(const PpoConfig& cfg, std::size_t n) {
    return cfg.optimizer == optim::OptimizerKind::Adam ? optim::Optimizer::adam(cfg.adam, n)
                                                       : optim::Optimizer::sgd(cfg.sgd, n);
}

policy::Architecture architecture_for(const PpoConfig& cfg) {
    policy::Architecture arch;
    arch.layers = {env::kObservationDim};
    arch.layers.insert(arch.layers.end(), cfg.hidden.begin(), cfg.hidden.end());
    arch.action_dim = 1;
    return arch;
}

env::EnvConfig training_env(env::EnvConfig cfg, const PpoConfig& ppo) {
    if (ppo.random_training_reference) cfg.randomize_reference = true;
    return cfg;
}

env::EnvConfig evaluation_env(env::EnvConfig cfg) {
    cfg.randomize_reference = false;
    return cfg;
}

nlohmann::json eval_to_json(const EvalMetrics& m) {
    return {{"deviation_deg", m.deviation_deg},
            {"power_w", m.power_w},
            {"mean_reward", m.mean_reward},
            {"mean_abs_action_change", m.mean_abs_action_change},
            {"sign_flip_rate", m.sign_flip_rate},
            {"steps", m.steps}};
}

EvalMetrics eval_from_json(const nlohmann::json& j) {
    return {j.at("deviation_deg").get<double>(),
            j.at("power_w").get<double>(),
            j.at("mean_reward").get<double>(),
            j.at("mean_abs_action_change").get<double>(),
            j.at("sign_flip_rate").get<double>(),
            j.at("steps").get<int>()};
}

nlohmann::json update_to_json(const UpdateStats& u) {
    return {{"policy_loss", u.policy_loss},   {"value_loss", u.value_loss},
            {"entropy", u.entropy},           {"approx_kl", u.approx_kl},
            {"clip_fraction", u.clip_fraction}, {"grad_norm", u.grad_norm},
            {"initial_ratio_deviation", u.initial_ratio_deviation},
            {"minibatches", u.minibatches}};
}

UpdateStats update_from_json(const nlohmann::json& j) {
    UpdateStats u;
    u.policy_loss = j.at("policy_loss").get<double>();
    u.value_loss = j.at("value_loss").get<double>();
    u.entropy = j.at("entropy").get<double>();
    u.approx_kl = j.at("approx_kl").get<double>();
    u.clip_fraction = j.at("clip_fraction").get<double>();
    u.grad_norm = j.at("grad_norm").get<double>();
    u.initial_ratio_deviation = j.at("initial_ratio_deviation").get<double>();
    u.minibatches = j.at("minibatches").get<int>();
    return u;
}

}  // namespace

void PpoConfig::validate() const {
    if (!(minibatch_size >= 1 && rollout_len >= minibatch_size && eval_every >= rollout_len &&
          total_steps >= eval_every)) {
        throw std::invalid_argument(
            "ppo: need total_steps >= eval_every >= rollout_len >= minibatch_size >= 1");
    }
    if (total_steps % eval_every != 0) {
        throw std::invalid_argument("ppo: total_steps must be a multiple of eval_every");
    }
    if (epochs_per_update < 1) throw std::invalid_argument("ppo: epochs_per_update must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
        throw std::invalid_argument("ppo: gae_lambda must be in [0, 1]");
    }
    if (!(clip_eps > 0.0)) throw std::invalid_argument("ppo: clip_eps must be > 0");
    if (!(value_coef >= 0.0)) throw std::invalid_argument("ppo: value_coef must be >= 0");
    if (!(entropy_coef >= 0.0)) throw std::invalid_argument("ppo: entropy_coef must be >= 0");
    if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("ppo: max_grad_norm must be >= 0");
    if (hidden.empty()) throw std::invalid_argument("ppo: at least one hidden layer is required");
    for (auto h : hidden) {
        if (h == 0) throw std::invalid_argument("ppo: hidden widths must be >= 1");
    }
    adam.validate();
    sgd.validate();
}

RolloutBuffer collect_rollout(env::PitchEnv& env, const policy::PolicyParams& params,
                              std::mt19937_64& rng, std::size_t len) {
    RolloutBuffer buf;
    buf.obs_dim = params.architecture().obs_dim();
    buf.action_dim = params.architecture().action_dim;
    buf.obs.reserve(len * buf.obs_dim);
    buf.raw_actions.reserve(len);
    buf.actions.reserve(len);
    buf.log_probs.reserve(len);
    buf.rewards.reserve(len);
    buf.values.reserve(len);
    buf.dones.reserve(len);

    env::Observation obs = env.needs_reset() ? env.reset() : env.observe();
    for (std::size_t t = 0; t < len; ++t) {
        const auto o = obs.as_array();
        const policy::Sample s = policy::sample(params, o, rng);
        env::StepResult r;
        try {
            r = env.step(s.action[0]);
        } catch (const physics::NumericError& e) {
            throw TrainingError(static_cast<std::int64_t>(t), e.what());
        }
        buf.obs.insert(buf.obs.end(), o.begin(), o.end());
        buf.raw_actions.insert(buf.raw_actions.end(), s.pre_squash.begin(), s.pre_squash.end());
        buf.actions.insert(buf.actions.end(), s.action.begin(), s.action.end());
        buf.log_probs.push_back(s.log_prob);
        buf.rewards.push_back(r.reward);
        buf.values.push_back(s.value);
        buf.dones.push_back(r.done ? 1 : 0);
        obs = r.done ? env.reset() : r.obs;
    }
    return buf;
}

void compute_gae(RolloutBuffer& buf, double gamma, double lambda, double bootstrap_value) {
    const std::size_t n = buf.size();
    buf.advantages.assign(n, 0.0);
    buf.returns.assign(n, 0.0);
    double gae = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double next_value = t + 1 < n ? buf.values[t + 1] : bootstrap_value;
        const double nonterminal = buf.dones[t] ? 0.0 : 1.0;
        const double delta = buf.rewards[t] + gamma * next_value * nonterminal - buf.values[t];
        gae = delta + gamma * lambda * nonterminal * gae;
        buf.advantages[t] = gae;
        buf.returns[t] = gae + buf.values[t];
    }
}

std::vector<double> normalized_advantages(const std::vector<double>& adv) {
    const std::size_t n = adv.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double stddev = std::max(std::sqrt(var / static_cast<double>(n)), 1e-8);
    for (std::size_t i = 0; i < n; ++i) out[i] = (adv[i] - mean) / stddev;
    return out;
}

UpdateStats ppo_update(policy::PolicyParams& params, const RolloutBuffer& buf,
                       const PpoConfig& cfg, optim::Optimizer& optimizer, std::mt19937_64& rng) {
    const std::size_t n = buf.size();
    if (n == 0) throw std::invalid_argument("ppo_update: empty rollout");
    if (buf.advantages.size() != n) throw std::invalid_argument("ppo_update: GAE not computed");
    const std::size_t D = buf.obs_dim;
    const std::size_t A = buf.action_dim;
    const std::vector<double> adv = normalized_advantages(buf.advantages);
    const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch_size), n);
    const policy::LossSpec spec = cfg.loss_spec();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> obs, raw, old_lp, mb_adv, ret;
    policy::Gradients grads(params);
    UpdateStats stats;
    bool first = true;
    for (int epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += mb) {
            const std::size_t end = std::min(n, start + mb);
            obs.clear();
            raw.clear();
            old_lp.clear();
            mb_adv.clear();
            ret.clear();
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = order[k];
                obs.insert(obs.end(), buf.obs.begin() + i * D, buf.obs.begin() + (i + 1) * D);
                raw.insert(raw.end(), buf.raw_actions.begin() + i * A,
                           buf.raw_actions.begin() + (i + 1) * A);
                old_lp.push_back(buf.log_probs[i]);
                mb_adv.push_back(adv[i]);
                ret.push_back(buf.returns[i]);
            }
            const policy::BatchView batch{obs, raw, old_lp, mb_adv, ret};
            const policy::LossReport r = policy::backward(params, batch, spec, grads);
            if (first) {
                stats.initial_ratio_deviation = r.max_ratio_deviation;
                first = false;
            }
            const double norm = grads.norm();
            if (!std::isfinite(norm)) throw std::domain_error("PPO gradient is not finite");
            if (cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm) {
                grads.scale(cfg.max_grad_norm / norm);
            }
            optimizer.step(params.values(), grads.values);
            params.clamp_log_std();
            if (!params.finite()) throw std::domain_error("policy parameters became non-finite");

            stats.policy_loss += r.policy_loss;
            stats.value_loss += r.value_loss;
            stats.entropy += r.entropy;
            stats.approx_kl += r.approx_kl;
            stats.clip_fraction += r.clip_fraction;
            stats.grad_norm += norm;
            ++stats.minibatches;
        }
    }
    const double k = static_cast<double>(stats.minibatches);
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    stats.grad_norm /= k;
    return stats;
}

EvalMetrics evaluate_policy(const policy::PolicyParams& params, const physics::PlantParams& plant,
                            const env::EnvConfig& cfg, std::vector<env::TraceRow>* trace) {
    env::PitchEnv env(plant, evaluation_env(cfg));
    env::Observation obs = env.reset(cfg.seed);
    std::vector<double> actions;
    actions.reserve(static_cast<std::size_t>(cfg.episode_steps));
    EvalMetrics m;
    if (trace != nullptr) trace->clear();
    while (true) {
        const auto o = obs.as_array();
        const double action = policy::forward(params, o).mean_action[0];
        const env::StepResult r = env.step(action);
        actions.push_back(action);
        m.deviation_deg += r.raw_deviation_deg;
        m.power_w += r.raw_power_w;
        m.mean_reward += r.reward;
        ++m.steps;
        if (trace != nullptr) trace->push_back(env::trace_row(r));
        if (r.done) break;
        obs = r.obs;
    }
    const double n = static_cast<double>(m.steps);
    m.deviation_deg /= n;
    m.power_w /= n;
    m.mean_reward /= n;
    const auto osc = metrics::oscillation_metrics(actions);
    m.mean_abs_action_change = osc.mean_abs_change;
    m.sign_flip_rate = osc.sign_flip_rate;
    return m;
}

nlohmann::json checkpoint_to_json(const Checkpoint& c) {
    const auto& arch = c.params.architecture();
    const auto& s = c.env.state;
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& p : c.env.schedule) sched.push_back({p.time, p.target});
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"step", c.step},
            {"seed", c.seed},
            {"architecture", {{"layers", arch.layers}, {"action_dim", arch.action_dim}}},
            {"params", std::vector<double>(c.params.values().begin(), c.params.values().end())},
            {"optimizer", c.optimizer.to_json()},
            {"env",
             {{"phi", s.phi},
              {"phi_dot", s.phi_dot},
              {"omega1", s.omega1},
              {"omega2", s.omega2},
              {"step_index", c.env.step_index},
              {"needs_reset", c.env.needs_reset},
              {"schedule", sched},
              {"rng", c.env.rng_state}}},
            {"rng", c.rng_state},
            {"eval", eval_to_json(c.eval)},
            {"last_update", update_to_json(c.last_update)}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string{}) != kCheckpointFormat) {
        throw std::invalid_argument("not a pitchrl checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
        throw std::invalid_argument("unsupported checkpoint version " +
                                    std::to_string(j.at("version").get<int>()));
    }
    Checkpoint c;
    c.step = j.at("step").get<std::int64_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    policy::Architecture arch;
    arch.layers = j.at("architecture").at("layers").get<std::vector<std::size_t>>();
    arch.action_dim = j.at("architecture").at("action_dim").get<std::size_t>();
    c.params = policy::PolicyParams(arch);
    const auto values = j.at("params").get<std::vector<double>>();
    if (values.size() != c.params.size()) {
        throw std::invalid_argument("checkpoint parameter count does not match its architecture");
    }
    std::copy(values.begin(), values.end(), c.params.values().begin());
    c.optimizer = optim::Optimizer::from_json(j.at("optimizer"));
    const auto& e = j.at("env");
    c.env.state = {e.at("phi").get<double>(), e.at("phi_dot").get<double>(),
                   e.at("omega1").get<double>(), e.at("omega2").get<double>()};
    c.env.step_index = e.at("step_index").get<int>();
    c.env.needs_reset = e.at("needs_reset").get<bool>();
    for (const auto& p : e.at("schedule")) {
        c.env.schedule.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    c.env.rng_state = e.at("rng").get<std::string>();
    c.rng_state = j.at("rng").get<std::string>();
    c.eval = eval_from_json(j.at("eval"));
    c.last_update = update_from_json(j.at("last_update"));
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    os << checkpoint_to_json(c).dump() << '\n';
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    try {
        return checkpoint_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("malformed checkpoint " + path.string() + ": " + e.what());
    }
}

Trainer::Trainer(physics::PlantParams plant, env::EnvConfig env_cfg, PpoConfig cfg,
                 std::uint64_t seed)
    : plant_(plant),
      eval_cfg_(evaluation_env(env_cfg)),
      cfg_(std::move(cfg)),
      seed_(seed),
      env_(plant, training_env(env_cfg, cfg_)) {
    cfg_.validate();
    auto init_rng = stream(seed, 0);
    params_ = policy::init_params(architecture_for(cfg_), init_rng, cfg_.initial_log_std);
    optimizer_ = make_optimizer(cfg_, params_.size());
    env_.reset(stream(seed, 1)());
    rng_ = stream(seed, 2);
}

Trainer Trainer::resume(physics::PlantParams plant, env::EnvConfig env_cfg, PpoConfig cfg,
                        const Checkpoint& from) {
    Trainer t(plant, std::move(env_cfg), std::move(cfg), from.seed);
    if (!(from.params.architecture() == t.params_.architecture())) {
        throw std::invalid_argument("checkpoint architecture does not match the configuration");
    }
    if (from.optimizer.kind() != t.cfg_.optimizer) {
        throw std::invalid_argument("checkpoint optimizer does not match the configuration");
    }
    t.params_ = from.params;
    t.optimizer_ = from.optimizer;
    t.env_.restore(from.env);
    rng_from_string(t.rng_, from.rng_state);
    t.step_ = from.step;
    t.last_update_ = from.last_update;
    return t;
}

Checkpoint Trainer::next_checkpoint() {
    if (finished()) throw std::logic_error("training already finished");
    const std::int64_t target = (step_ / cfg_.eval_every + 1) * cfg_.eval_every;
    while (step_ < target) {
        const auto len = static_cast<std::size_t>(std::min(cfg_.rollout_len, target - step_));
        try {
            RolloutBuffer buf = collect_rollout(env_, params_, rng_, len);
            const double bootstrap =
                env_.needs_reset() ? 0.0 : policy::forward(params_, env_.observe().as_array()).value;
            compute_gae(buf, cfg_.gamma, cfg_.gae_lambda, bootstrap);
            last_update_ = ppo_update(params_, buf, cfg_, optimizer_, rng_);
        } catch (const TrainingError& e) {
            throw TrainingError(step_ + e.step(), e.cause());
        } catch (const std::domain_error& e) {
            throw TrainingError(step_ + static_cast<std::int64_t>(len), e.what());
        }
        step_ += static_cast<std::int64_t>(len);
    }
    Checkpoint c;
    c.step = step_;
    c.seed = seed_;
    try {
        c.eval = evaluate_policy(params_, plant_, eval_cfg_);
    } catch (const physics::NumericError& e) {
        throw TrainingError(step_, std::string("evaluation: ") + e.what());
    }
    c.last_update = last_update_;
    c.params = params_;
    c.optimizer = optimizer_;
    c.env = env_.snapshot();
    c.rng_state = rng_to_string(rng_);
    return c;
}

std::vector<Checkpoint> train(const physics::PlantParams& plant, const env::EnvConfig& env_cfg,
                              const PpoConfig& cfg, std::uint64_t seed,
                              const std::function<void(const Checkpoint&)>& on_checkpoint) {
    Trainer trainer(plant, env_cfg, cfg, seed);
    std::vector<Checkpoint> out;
    while (!trainer.finished()) {
        out.push_back(trainer.next_checkpoint());
        if (on_checkpoint) on_checkpoint(out.back());
    }
    return out;
}

void write_training_log_header(std::ostream& os) {
    os << "step,eval_deviation_deg,eval_power_w,eval_reward,mean_abs_action_change,"
          "sign_flip_rate,policy_loss,value_loss,entropy,approx_kl,clip_fraction\n";
}

void write_training_log_row(std::ostream& os, const Checkpoint& c) {
    using text::format_double;
    os << c.step << ',' << format_double(c.eval.deviation_deg) << ','
       << format_double(c.eval.power_w) << ',' << format_double(c.eval.mean_reward) << ','
       << format_double(c.eval.mean_abs_action_change) << ','
       << format_double(c.eval.sign_flip_rate) << ','
       << format_double(c.last_update.policy_loss) << ','
       << format_double(c.last_update.value_loss) << ',' << format_double(c.last_update.entropy)
       << ',' << format_double(c.last_update.approx_kl) << ','
       << format_double(c.last_update.clip_fraction) << '\n';
}

}  // namespace pitchrl::ppo
