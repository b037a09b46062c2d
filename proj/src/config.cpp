#include "pitchrl/config.hpp"

#include <openssl/evp.h>

#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

#include "pitchrl/text.hpp"

namespace pitchrl::config {

namespace {

using text::format_double;

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("not a boolean: '" + v + "'");
}

// Shortest decimal degree value that maps back to the same radians.
std::string format_deg(double rad) {
    const double deg = rad * env::kRadToDeg;
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), deg, std::chars_format::general, 15);
    std::string s(buf.data(), res.ptr);
    return text::parse_double(s) * env::kDegToRad == rad ? s : format_double(deg);
}

std::string format_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) out += ",";
        if constexpr (std::is_floating_point_v<T>) {
            out += format_double(xs[i]);
        } else {
            out += std::to_string(xs[i]);
        }
    }
    return out;
}

std::vector<std::uint64_t> to_seed_list(const std::string& v) {
    std::vector<std::uint64_t> out;
    for (auto s : text::parse_int_list(v)) {
        if (s < 0) throw std::invalid_argument("seeds must be non-negative");
        out.push_back(static_cast<std::uint64_t>(s));
    }
    return out;
}

std::vector<std::size_t> to_size_list(const std::string& v) {
    std::vector<std::size_t> out;
    for (auto s : text::parse_int_list(v)) {
        if (s <= 0) throw std::invalid_argument("layer widths must be positive");
        out.push_back(static_cast<std::size_t>(s));
    }
    return out;
}

struct Field {
    std::function<void(WorkbenchConfig&, const std::string&)> set;
    std::function<std::string(const WorkbenchConfig&)> get;
};

#define PITCHRL_NUM(expr)                                                                  \
    Field {                                                                                \
        [](WorkbenchConfig& c, const std::string& v) { c.expr = text::parse_double(v); }, \
            [](const WorkbenchConfig& c) { return format_double(c.expr); }                 \
    }
#define PITCHRL_INT(expr, type)                                                                 \
    Field {                                                                                     \
        [](WorkbenchConfig& c, const std::string& v) { c.expr = static_cast<type>(text::parse_int(v)); }, \
            [](const WorkbenchConfig& c) { return std::to_string(c.expr); }                     \
    }
#define PITCHRL_BOOL(expr)                                                                \
    Field {                                                                               \
        [](WorkbenchConfig& c, const std::string& v) { c.expr = parse_bool(v); },         \
            [](const WorkbenchConfig& c) { return format_bool(c.expr); }                  \
    }

// Key order of to_ini.
using Section = std::vector<std::pair<std::string, Field>>;

const std::vector<std::pair<std::string, Section>>& schema() {
    static const std::vector<std::pair<std::string, Section>> s = {
        {"plant",
         {
             {"resistance", PITCHRL_NUM(plant.motor.resistance)},
             {"motor_constant", PITCHRL_NUM(plant.motor.motor_constant)},
             {"rotor_inertia", PITCHRL_NUM(plant.motor.rotor_inertia)},
             {"viscous_friction", PITCHRL_NUM(plant.motor.viscous_friction)},
             {"pitch_inertia", PITCHRL_NUM(plant.pitch.inertia)},
             {"pitch_damping", PITCHRL_NUM(plant.pitch.damping)},
             {"pitch_stiffness", PITCHRL_NUM(plant.pitch.stiffness)},
             {"thrust_coefficient", PITCHRL_NUM(plant.pitch.thrust_coefficient)},
             {"moment_arm", PITCHRL_NUM(plant.pitch.moment_arm)},
         }},
        {"env",
         {
             {"alpha", PITCHRL_NUM(env.alpha)},
             {"u_max", PITCHRL_NUM(env.u_max)},
             {"delta_max", PITCHRL_NUM(env.delta_max)},
             {"p_max",
              {[](WorkbenchConfig& c, const std::string& v) {
                   c.env.p_max = text::parse_double(v);
                   c.p_max_explicit = true;
               },
               [](const WorkbenchConfig& c) { return format_double(c.env.p_max); }}},
             {"episode_steps", PITCHRL_INT(env.episode_steps, int)},
             {"dt", PITCHRL_NUM(env.dt)},
             {"substeps", PITCHRL_INT(env.substeps, int)},
             {"ref_schedule_deg",
              {[](WorkbenchConfig& c, const std::string& v) { c.env.ref_schedule = parse_schedule_deg(v); },
               [](const WorkbenchConfig& c) { return format_schedule_deg(c.env.ref_schedule); }}},
             {"randomize_reference", PITCHRL_BOOL(env.randomize_reference)},
             {"random_target_max_deg",
              {[](WorkbenchConfig& c, const std::string& v) {
                   c.env.random_target_max = text::parse_double(v) * env::kDegToRad;
               },
               [](const WorkbenchConfig& c) {
                   return format_deg(c.env.random_target_max);
               }}},
             {"phi_dot_scale", PITCHRL_NUM(env.phi_dot_scale)},
             {"seed", PITCHRL_INT(env.seed, std::uint64_t)},
         }},
        {"ppo",
         {
             {"total_steps", PITCHRL_INT(ppo.total_steps, std::int64_t)},
             {"eval_every", PITCHRL_INT(ppo.eval_every, std::int64_t)},
             {"rollout_len", PITCHRL_INT(ppo.rollout_len, std::int64_t)},
             {"minibatch_size", PITCHRL_INT(ppo.minibatch_size, std::int64_t)},
             {"epochs_per_update", PITCHRL_INT(ppo.epochs_per_update, int)},
             {"gamma", PITCHRL_NUM(ppo.gamma)},
             {"gae_lambda", PITCHRL_NUM(ppo.gae_lambda)},
             {"clip_eps", PITCHRL_NUM(ppo.clip_eps)},
             {"value_coef", PITCHRL_NUM(ppo.value_coef)},
             {"entropy_coef", PITCHRL_NUM(ppo.entropy_coef)},
             {"max_grad_norm", PITCHRL_NUM(ppo.max_grad_norm)},
             {"optimizer",
              {[](WorkbenchConfig& c, const std::string& v) { c.ppo.optimizer = optim::parse_optimizer(v); },
               [](const WorkbenchConfig& c) { return std::string(optim::to_string(c.ppo.optimizer)); }}},
             {"adam_lr", PITCHRL_NUM(ppo.adam.lr)},
             {"adam_beta1", PITCHRL_NUM(ppo.adam.beta1)},
             {"adam_beta2", PITCHRL_NUM(ppo.adam.beta2)},
             {"adam_eps", PITCHRL_NUM(ppo.adam.eps)},
             {"sgd_lr", PITCHRL_NUM(ppo.sgd.lr)},
             {"sgd_momentum", PITCHRL_NUM(ppo.sgd.momentum)},
             {"hidden",
              {[](WorkbenchConfig& c, const std::string& v) { c.ppo.hidden = to_size_list(v); },
               [](const WorkbenchConfig& c) { return join(c.ppo.hidden); }}},
             {"initial_log_std", PITCHRL_NUM(ppo.initial_log_std)},
             {"random_training_reference", PITCHRL_BOOL(ppo.random_training_reference)},
         }},
        {"sweep",
         {
             {"alphas",
              {[](WorkbenchConfig& c, const std::string& v) { c.sweep.alphas = text::parse_double_list(v); },
               [](const WorkbenchConfig& c) { return join(c.sweep.alphas); }}},
             {"seeds",
              {[](WorkbenchConfig& c, const std::string& v) { c.sweep.seeds = to_seed_list(v); },
               [](const WorkbenchConfig& c) { return join(c.sweep.seeds); }}},
             {"compare_alphas",
              {[](WorkbenchConfig& c, const std::string& v) {
                   c.sweep.compare_alphas = text::parse_double_list(v);
               },
               [](const WorkbenchConfig& c) { return join(c.sweep.compare_alphas); }}},
             {"workers", PITCHRL_INT(sweep.workers, int)},
             {"selection",
              {[](WorkbenchConfig& c, const std::string& v) { c.sweep.selection = parse_selection(v); },
               [](const WorkbenchConfig& c) { return std::string(to_string(c.sweep.selection)); }}},
             {"keep_all_checkpoints", PITCHRL_BOOL(sweep.keep_all_checkpoints)},
         }},
    };
    return s;
}

#undef PITCHRL_NUM
#undef PITCHRL_INT
#undef PITCHRL_BOOL

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& [name, fields] : schema()) {
        if (name != section) continue;
        for (const auto& [k, f] : fields) {
            if (k == key) return &f;
        }
    }
    return nullptr;
}

void validate_alphas(const std::vector<double>& alphas, const char* what) {
    if (alphas.empty()) throw ConfigError(std::string("sweep.") + what + " must not be empty");
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw ConfigError(std::string("sweep.") + what + " entries must lie in [0, 1]");
        }
    }
}

}  // namespace

void WorkbenchConfig::finalize() {
    if (!p_max_explicit) env.p_max = physics::stall_power(env.u_max, plant.motor);
    try {
        plant.validate();
        env.validate();
        ppo.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    validate_alphas(sweep.alphas, "alphas");
    validate_alphas(sweep.compare_alphas, "compare_alphas");
    if (sweep.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
    auto sorted = sweep.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ConfigError("sweep.seeds must be distinct");
    }
    if (sweep.workers < 1) throw ConfigError("sweep.workers must be >= 1");
}

void apply_fast_profile(WorkbenchConfig& cfg) { cfg.ppo.total_steps = kFastTotalSteps; }

void set_value(WorkbenchConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value) {
    const Field* f = find_field(section, key);
    if (f == nullptr) throw ConfigError("unknown config key '" + section + "." + key + "'");
    try {
        f->set(cfg, std::string(text::trim(value)));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("bad value for '" + section + "." + key + "': " + e.what());
    }
}

WorkbenchConfig parse_config(std::istream& is, const std::string& source) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    WorkbenchConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError(source + ": key '" + section + "' must live inside a [section]");
        }
        for (const auto& [key, value] : body) {
            try {
                set_value(cfg, section, key, value.data());
            } catch (const ConfigError& e) {
                throw ConfigError(source + ": " + e.what());
            }
        }
    }
    cfg.finalize();
    return cfg;
}

WorkbenchConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse_config(is, path.string());
}

void apply_override(WorkbenchConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override must look like section.key=value, got '" + assignment + "'");
    }
    set_value(cfg, std::string(text::trim(assignment.substr(0, dot))),
              std::string(text::trim(assignment.substr(dot + 1, eq - dot - 1))),
              assignment.substr(eq + 1));
}

std::string to_ini(const WorkbenchConfig& cfg) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [section, fields] : schema()) {
        if (!first) os << '\n';
        first = false;
        os << '[' << section << "]\n";
        for (const auto& [key, f] : fields) os << key << " = " << f.get(cfg) << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const physics::PlantParams& p) {
    return {{"resistance", p.motor.resistance},
            {"motor_constant", p.motor.motor_constant},
            {"rotor_inertia", p.motor.rotor_inertia},
            {"viscous_friction", p.motor.viscous_friction},
            {"pitch_inertia", p.pitch.inertia},
            {"pitch_damping", p.pitch.damping},
            {"pitch_stiffness", p.pitch.stiffness},
            {"thrust_coefficient", p.pitch.thrust_coefficient},
            {"moment_arm", p.pitch.moment_arm}};
}

nlohmann::json to_json(const env::EnvConfig& e) {
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& p : e.ref_schedule) sched.push_back({p.time, p.target});
    return {{"alpha", e.alpha},
            {"u_max", e.u_max},
            {"delta_max", e.delta_max},
            {"p_max", e.p_max},
            {"episode_steps", e.episode_steps},
            {"dt", e.dt},
            {"substeps", e.substeps},
            {"ref_schedule", sched},
            {"randomize_reference", e.randomize_reference},
            {"random_target_max", e.random_target_max},
            {"phi_dot_scale", e.phi_dot_scale},
            {"seed", e.seed}};
}

nlohmann::json to_json(const ppo::PpoConfig& p) {
    return {{"total_steps", p.total_steps},
            {"eval_every", p.eval_every},
            {"rollout_len", p.rollout_len},
            {"minibatch_size", p.minibatch_size},
            {"epochs_per_update", p.epochs_per_update},
            {"gamma", p.gamma},
            {"gae_lambda", p.gae_lambda},
            {"clip_eps", p.clip_eps},
            {"value_coef", p.value_coef},
            {"entropy_coef", p.entropy_coef},
            {"max_grad_norm", p.max_grad_norm},
            {"optimizer", optim::to_string(p.optimizer)},
            {"adam", {{"lr", p.adam.lr}, {"beta1", p.adam.beta1}, {"beta2", p.adam.beta2}, {"eps", p.adam.eps}}},
            {"sgd", {{"lr", p.sgd.lr}, {"momentum", p.sgd.momentum}}},
            {"hidden", p.hidden},
            {"initial_log_std", p.initial_log_std},
            {"random_training_reference", p.random_training_reference}};
}

std::string_view to_string(CheckpointSelection s) {
    return s == CheckpointSelection::Final ? "final" : "best";
}

CheckpointSelection parse_selection(std::string_view s) {
    if (s == "final") return CheckpointSelection::Final;
    if (s == "best") return CheckpointSelection::BestReward;
    throw std::invalid_argument("selection must be 'final' or 'best', got '" + std::string(s) + "'");
}

env::ReferenceSchedule parse_schedule_deg(std::string_view s) {
    env::ReferenceSchedule out;
    for (const auto& entry : text::split(s, ',')) {
        const auto parts = text::split(entry, ':');
        if (parts.size() != 2) {
            throw std::invalid_argument("schedule entries must be time:target_deg, got '" + entry + "'");
        }
        out.push_back({text::parse_double(parts[0]), text::parse_double(parts[1]) * env::kDegToRad});
    }
    env::validate_schedule(out);
    return out;
}

std::string format_schedule_deg(const env::ReferenceSchedule& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) out += ", ";
        out += format_double(s[i].time) + ":" + format_deg(s[i].target);
    }
    return out;
}

std::string content_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw std::runtime_error("SHA-1 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        hex += kHex[digest[i] >> 4];
        hex += kHex[digest[i] & 0xF];
    }
    return hex;
}

}  // namespace pitchrl::config
