#include "pitchrl/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "pitchrl/config.hpp"
#include "pitchrl/env.hpp"
#include "pitchrl/experiment.hpp"
#include "pitchrl/kernels.hpp"
#include "pitchrl/pareto.hpp"
#include "pitchrl/plot.hpp"
#include "pitchrl/text.hpp"

namespace pitchrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using text::format_fixed;

namespace {

// Raised for bad flags, configs or inputs; maps to kExitUsage.
class UsageError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

struct ConfigOptions {
    std::string config_path;
    std::string manifest_path;
    std::vector<std::string> sets;
    bool fast = false;
    // dedicated flags, each an alias for one section.key
    std::vector<std::pair<std::string, std::string>> flags;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o, bool with_manifest) {
    cmd->add_option("-c,--config", o.config_path, "INI configuration file");
    if (with_manifest) {
        cmd->add_option("--manifest", o.manifest_path, "Re-run from a manifest.json (replaces --config)");
    }
    cmd->add_option("--set", o.sets, "Override one key, section.key=value (repeatable)");
    cmd->add_flag("--fast", o.fast, "Desk-scale profile: 100000 training steps");
}

// Registers a string flag that overrides section.key when given.
void add_alias(CLI::App* cmd, ConfigOptions& o, const std::string& flag, const std::string& key,
               const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&o, key](const std::string& v) { o.flags.emplace_back(key, v); }, help);
}

config::WorkbenchConfig resolve_config(const ConfigOptions& o) {
    config::WorkbenchConfig cfg;
    try {
        if (!o.manifest_path.empty()) {
            if (!o.config_path.empty()) throw UsageError("--manifest and --config are mutually exclusive");
            cfg = experiment::manifest_config(experiment::read_manifest(o.manifest_path));
        } else if (!o.config_path.empty()) {
            cfg = config::load_config(o.config_path);
        }
        if (o.fast) config::apply_fast_profile(cfg);
        for (const auto& s : o.sets) config::apply_override(cfg, s);
        for (const auto& [key, value] : o.flags) config::apply_override(cfg, key + "=" + value);
        cfg.finalize();
    } catch (const config::ConfigError& e) {
        throw UsageError(e.what());
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const UsageError*>(&e)) throw;
        throw UsageError(e.what());
    }
    return cfg;
}

fs::path output_root() {
    const char* env = std::getenv("PITCHRL_OUTPUT_ROOT");
    return (env != nullptr && *env != '\0') ? fs::path(env) : fs::path("runs");
}

// Piecewise-constant voltage: value of the last entry with time <= t, 0 before the first.
struct VoltageProfile {
    std::vector<std::pair<double, double>> points;

    double at(double t) const {
        double u = 0.0;
        for (const auto& [time, volts] : points) {
            if (time <= t + 1e-12) u = volts;
        }
        return u;
    }
};

VoltageProfile read_profile(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("cannot open voltage profile '" + path.string() + "'");
    VoltageProfile p;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const auto f = text::split(trimmed, ',');
        if (f.size() != 2) {
            throw UsageError(path.string() + " line " + std::to_string(lineno) + ": expected time,volts");
        }
        try {
            p.points.emplace_back(text::parse_double(f[0]), text::parse_double(f[1]));
        } catch (const std::invalid_argument&) {
            if (p.points.empty() && lineno == 1) continue;  // header
            throw UsageError(path.string() + " line " + std::to_string(lineno) + ": not numeric");
        }
    }
    if (p.points.empty()) throw UsageError("voltage profile '" + path.string() + "' has no rows");
    for (std::size_t i = 1; i < p.points.size(); ++i) {
        if (p.points[i].first < p.points[i - 1].first) {
            throw UsageError("voltage profile '" + path.string() + "' times must be non-decreasing");
        }
    }
    for (const auto& [t, u] : p.points) {
        if (!std::isfinite(t) || !std::isfinite(u)) throw UsageError("voltage profile values must be finite");
    }
    return p;
}

void write_text(const fs::path& path, const std::string& s) { plot::write_file(path, s); }

std::string describe(const experiment::RunOutcome& o) {
    std::ostringstream os;
    os << "alpha=" << text::format_double(o.alpha) << " seed=" << o.seed << ": ";
    if (!o.error.empty()) {
        os << "FAILED " << o.error;
    } else if (o.point) {
        if (o.skipped) os << "already complete, ";
        if (o.resumed_from >= 0) os << "resumed at step " << o.resumed_from << ", ";
        os << "deviation " << format_fixed(o.point->deviation_deg, 3) << " deg, power "
           << format_fixed(o.point->power_w, 4) << " W";
    }
    return os.str();
}

void print_aggregates(std::ostream& out, const std::vector<experiment::AggregatePoint>& aggs,
                      const std::vector<pareto::FrontRow>* front) {
    out << "alpha     n  deviation_deg (mean +- std)   power_W (mean +- std)";
    if (front) out << "   front";
    out << '\n';
    for (std::size_t i = 0; i < aggs.size(); ++i) {
        const auto& g = aggs[i];
        out << format_fixed(g.alpha, 3) << "   " << g.n_seeds << "  " << format_fixed(g.deviation_deg_mean, 3)
            << " +- " << format_fixed(g.deviation_deg_std, 3) << "   " << format_fixed(g.power_w_mean, 4)
            << " +- " << format_fixed(g.power_w_std, 4);
        if (front) out << "   " << ((*front)[i].on_front ? "o" : "x");
        out << '\n';
    }
}

int cmd_simulate(const ConfigOptions& co, const std::string& constant, const std::string& profile_path,
                 double duration, const std::string& out_dir, std::ostream& out) {
    auto cfg = resolve_config(co);
    VoltageProfile profile;
    json args;
    if (!co.manifest_path.empty() && constant.empty() && profile_path.empty()) {
        const auto m = experiment::read_manifest(co.manifest_path);
        if (m.command != "simulate") throw UsageError("manifest is not from a simulate run");
        profile.points = m.args.at("profile").get<std::vector<std::pair<double, double>>>();
        if (duration <= 0.0) duration = m.args.at("duration_s").get<double>();
    } else if (!constant.empty() && !profile_path.empty()) {
        throw UsageError("give either --constant or --profile, not both");
    } else if (!constant.empty()) {
        try {
            profile.points = {{0.0, text::parse_double(constant)}};
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--constant: ") + e.what());
        }
    } else if (!profile_path.empty()) {
        profile = read_profile(profile_path);
    } else {
        throw UsageError("simulate needs --constant VOLTS or --profile FILE");
    }
    if (duration <= 0.0) duration = cfg.env.episode_steps * cfg.env.dt;
    const int steps = static_cast<int>(std::llround(duration / cfg.env.dt));
    if (steps < 1) throw UsageError("--duration must cover at least one control period");

    env::EnvConfig ecfg = cfg.env;
    ecfg.episode_steps = steps;
    ecfg.randomize_reference = false;
    env::PitchEnv e(cfg.plant, ecfg);
    e.reset(ecfg.seed);
    std::vector<env::TraceRow> rows;
    rows.reserve(static_cast<std::size_t>(steps));
    bool clamped = false;
    for (int k = 0; k < steps; ++k) {
        const double u = profile.at(e.time());
        if (std::abs(u) > ecfg.u_max) clamped = true;
        rows.push_back(env::trace_row(e.step(u / ecfg.u_max)));
    }

    const fs::path dir = out_dir.empty() ? output_root() / "simulate" : fs::path(out_dir);
    fs::create_directories(dir);
    std::ostringstream csv;
    env::write_trace_csv(csv, rows);
    write_text(dir / "trace.csv", csv.str());
    auto manifest = experiment::make_manifest("simulate", cfg);
    args["profile"] = profile.points;
    args["duration_s"] = duration;
    manifest.args = args;
    experiment::write_manifest(manifest, dir / "manifest.json");
    if (clamped) out << "warning: profile exceeds u_max; voltages were clamped\n";
    out << "simulated " << steps << " steps; final pitch " << format_fixed(rows.back().phi_deg, 4) << " deg\n"
        << "wrote " << (dir / "trace.csv").string() << '\n';
    return kExitOk;
}

int cmd_train(const ConfigOptions& co, const std::string& alpha_s, const std::string& seed_s,
              const std::string& out_dir, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(co);
    double alpha = cfg.env.alpha;
    std::uint64_t seed = cfg.sweep.seeds.front();
    try {
        if (!alpha_s.empty()) alpha = text::parse_double(alpha_s);
        if (!seed_s.empty()) {
            const auto s = text::parse_int(seed_s);
            if (s < 0) throw std::invalid_argument("seed must be non-negative");
            seed = static_cast<std::uint64_t>(s);
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    config::WorkbenchConfig run_cfg;
    try {
        run_cfg = experiment::run_config(cfg, alpha, seed);
    } catch (const config::ConfigError& e) {
        throw UsageError(e.what());
    }
    const fs::path dir = out_dir.empty() ? output_root() / "train" / experiment::run_directory_name(alpha, seed)
                                         : fs::path(out_dir);
    const auto o = experiment::run_single(run_cfg, seed, dir);
    if (!o.error.empty()) {
        err << "error: " << describe(o) << '\n';
        return kExitFailure;
    }
    out << describe(o) << '\n' << "run directory " << dir.string() << '\n';
    return kExitOk;
}

int cmd_sweep(const ConfigOptions& co, const std::string& out_dir, bool per_seed, std::ostream& out,
              std::ostream& err) {
    experiment::SweepConfig sc;
    sc.base = resolve_config(co);
    sc.output_dir = out_dir.empty() ? output_root() / "sweep" : fs::path(out_dir);
    const auto result = experiment::run_sweep(sc, [&](const experiment::RunOutcome& o) { err << describe(o) << '\n'; });
    const auto aggs = experiment::aggregate(result.points);
    const auto paths = pareto::export_front(aggs, sc.output_dir);
    if (per_seed) pareto::export_seed_front(result.points, sc.output_dir);
    const auto rows = pareto::classify(aggs);
    print_aggregates(out, aggs, &rows);
    out << result.outcomes.size() << " runs, " << result.skipped() << " already complete, "
        << result.failures() << " failed\n"
        << "wrote " << (sc.output_dir / "results.csv").string() << ", " << paths.csv.string() << ", "
        << paths.svg.string() << '\n';
    return result.failures() == 0 ? kExitOk : kExitFailure;
}

int cmd_compare(const ConfigOptions& co, const std::string& arms_s, const std::string& out_dir, std::ostream& out,
                std::ostream& err) {
    experiment::CompareConfig cc;
    cc.base = resolve_config(co);
    if (!arms_s.empty()) {
        cc.arms.clear();
        try {
            for (const auto& a : text::split(arms_s, ',')) cc.arms.push_back(optim::parse_optimizer(text::trim(a)));
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--arms: ") + e.what());
        }
    }
    cc.output_dir = out_dir.empty() ? output_root() / "compare-optim" : fs::path(out_dir);
    const auto report =
        experiment::compare_optimizers(cc, [&](const experiment::RunOutcome& o) { err << describe(o) << '\n'; });
    out << "optimizer  alpha  n  deviation_deg  power_W  mean_abs_action_change  sign_flip_rate\n";
    std::size_t failures = 0;
    for (const auto& arm : report.arms) {
        failures += arm.failures;
        for (const auto& g : arm.aggregates) {
            out << optim::to_string(arm.optimizer) << "  " << format_fixed(g.alpha, 2) << "  " << g.n_seeds << "  "
                << format_fixed(g.deviation_deg_mean, 3) << "  " << format_fixed(g.power_w_mean, 4) << "  "
                << format_fixed(g.mean_abs_action_change, 4) << "  " << format_fixed(g.sign_flip_rate, 4) << '\n';
        }
    }
    out << "wrote " << (cc.output_dir / "comparison.csv").string() << '\n';
    return failures == 0 ? kExitOk : kExitFailure;
}

int cmd_pareto(const std::string& results, const std::string& out_dir, bool per_seed, std::ostream& out) {
    std::vector<experiment::EvalPoint> points;
    try {
        points = experiment::read_points_csv(fs::path(results));
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
    if (points.empty()) throw UsageError("'" + results + "' contains no result rows");
    const fs::path dir = out_dir.empty() ? fs::path(results).parent_path() : fs::path(out_dir);
    const auto aggs = experiment::aggregate(points);
    const auto paths = pareto::export_front(aggs, dir.empty() ? fs::path(".") : dir);
    if (per_seed) pareto::export_seed_front(points, dir.empty() ? fs::path(".") : dir);
    const auto rows = pareto::classify(aggs);
    print_aggregates(out, aggs, &rows);
    out << "wrote " << paths.csv.string() << ", " << paths.svg.string() << '\n';
    return kExitOk;
}

int cmd_plot(const std::string& input, const std::string& out_file, std::ostream& out) {
    std::ifstream is(input);
    if (!is) throw UsageError("cannot open '" + input + "'");
    std::string header;
    std::getline(is, header);
    is.clear();
    is.seekg(0);
    std::string svg;
    try {
        if (header.rfind("t,phi_deg,", 0) == 0) {
            svg = plot::render_trace_svg(plot::read_trace_csv(is));
        } else if (header.rfind("alpha,deviation_deg_mean,", 0) == 0) {
            std::vector<plot::ScatterPoint> sp;
            for (const auto& r : pareto::read_front_csv(is)) {
                sp.push_back({r.point.deviation_deg_mean, r.point.power_w_mean, r.point.deviation_deg_std,
                              r.point.power_w_std, r.point.alpha, r.on_front});
            }
            svg = plot::render_scatter_svg(sp);
        } else if (header.rfind("alpha,seed,optimizer,", 0) == 0) {
            std::vector<plot::ScatterPoint> sp;
            for (const auto& r : pareto::classify(experiment::aggregate(experiment::read_points_csv(is)))) {
                sp.push_back({r.point.deviation_deg_mean, r.point.power_w_mean, r.point.deviation_deg_std,
                              r.point.power_w_std, r.point.alpha, r.on_front});
            }
            svg = plot::render_scatter_svg(sp);
        } else {
            throw UsageError("'" + input + "' is not a trace, front or results CSV");
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(input + ": " + e.what());
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const UsageError*>(&e)) throw;
        throw UsageError(input + ": " + e.what());
    }
    fs::path target = out_file.empty() ? fs::path(input).replace_extension(".svg") : fs::path(out_file);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    write_text(target, svg);
    out << "wrote " << target.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Energy-aware pitch control: simulation, PPO training, alpha sweeps and Pareto fronts", "pitchrl"};
    app.set_version_flag("--version", experiment::tool_version());
    app.require_subcommand(1);
    std::string kernels;
    app.add_option("--kernels", kernels, "Force the kernel backend: scalar, avx2 or neon");

    std::function<int()> action;

    // simulate
    ConfigOptions sim_co;
    std::string sim_constant, sim_profile, sim_out;
    double sim_duration = 0.0;
    auto* sim = app.add_subcommand("simulate", "Open-loop simulation with a scripted voltage profile");
    add_config_options(sim, sim_co, true);
    sim->add_option("--constant", sim_constant, "Constant voltage [V]");
    sim->add_option("--profile", sim_profile, "CSV of time_s,volts rows (piecewise constant)");
    sim->add_option("--duration", sim_duration, "Simulated time [s] (default: one episode)");
    sim->add_option("-o,--out", sim_out, "Output directory");
    sim->callback([&] { action = [&] { return cmd_simulate(sim_co, sim_constant, sim_profile, sim_duration, sim_out, out); }; });

    // train
    ConfigOptions tr_co;
    std::string tr_alpha, tr_seed, tr_out;
    auto* tr = app.add_subcommand("train", "Train one agent (one alpha, one seed)");
    add_config_options(tr, tr_co, true);
    tr->add_option("--alpha", tr_alpha, "Energy weight in [0, 1]");
    tr->add_option("--seed", tr_seed, "Run seed");
    add_alias(tr, tr_co, "--optimizer", "ppo.optimizer", "adam or sgd");
    add_alias(tr, tr_co, "--selection", "sweep.selection", "final or best");
    tr->add_option("-o,--out", tr_out, "Run directory");
    tr->callback([&] { action = [&] { return cmd_train(tr_co, tr_alpha, tr_seed, tr_out, out, err); }; });

    // sweep
    ConfigOptions sw_co;
    std::string sw_out;
    bool sw_per_seed = false;
    auto* sw = app.add_subcommand("sweep", "Train every (alpha, seed) pair and export the Pareto front");
    add_config_options(sw, sw_co, true);
    add_alias(sw, sw_co, "--alphas", "sweep.alphas", "Comma-separated energy weights");
    add_alias(sw, sw_co, "--seeds", "sweep.seeds", "Comma-separated seeds");
    add_alias(sw, sw_co, "--workers", "sweep.workers", "Concurrent runs");
    add_alias(sw, sw_co, "--optimizer", "ppo.optimizer", "adam or sgd");
    add_alias(sw, sw_co, "--selection", "sweep.selection", "final or best");
    sw->add_option_function<std::string>(
        "--keep-checkpoints",
        [&](const std::string& v) {
            if (v != "all" && v != "last") throw CLI::ValidationError("--keep-checkpoints", "must be all or last");
            sw_co.flags.emplace_back("sweep.keep_all_checkpoints", v == "all" ? "true" : "false");
        },
        "all or last");
    sw->add_flag("--per-seed", sw_per_seed, "Also export a front over individual runs");
    sw->add_option("-o,--out", sw_out, "Sweep directory");
    sw->callback([&] { action = [&] { return cmd_sweep(sw_co, sw_out, sw_per_seed, out, err); }; });

    // compare-optim
    ConfigOptions cmp_co;
    std::string cmp_arms, cmp_out;
    auto* cmp = app.add_subcommand("compare-optim", "Paired Adam vs SGD sweeps with oscillation metrics");
    add_config_options(cmp, cmp_co, true);
    add_alias(cmp, cmp_co, "--alphas", "sweep.compare_alphas", "Comma-separated energy weights");
    add_alias(cmp, cmp_co, "--seeds", "sweep.seeds", "Comma-separated seeds");
    add_alias(cmp, cmp_co, "--workers", "sweep.workers", "Concurrent runs");
    cmp->add_option("--arms", cmp_arms, "Optimizer arms (default adam,sgd)");
    cmp->add_option("-o,--out", cmp_out, "Output directory");
    cmp->callback([&] { action = [&] { return cmd_compare(cmp_co, cmp_arms, cmp_out, out, err); }; });

    // pareto
    std::string par_in, par_out;
    bool par_per_seed = false;
    auto* par = app.add_subcommand("pareto", "Aggregate a results CSV and export the front");
    par->add_option("results", par_in, "results.csv from a sweep")->required();
    par->add_option("-o,--out", par_out, "Output directory (default: next to the input)");
    par->add_flag("--per-seed", par_per_seed, "Also export a front over individual runs");
    par->callback([&] { action = [&] { return cmd_pareto(par_in, par_out, par_per_seed, out); }; });

    // plot
    std::string plot_in, plot_out;
    auto* pl = app.add_subcommand("plot", "Render a trace, front or results CSV to SVG");
    pl->add_option("input", plot_in, "CSV file")->required();
    pl->add_option("-o,--out", plot_out, "SVG path (default: input with .svg)");
    pl->callback([&] { action = [&] { return cmd_plot(plot_in, plot_out, out); }; });

    std::vector<std::string> argv_store{"pitchrl"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (!kernels.empty()) kernels::set_active_backend(kernels::parse_backend(kernels));
    } catch (const std::exception& e) {
        err << "error: --kernels: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        return action ? action() : kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace pitchrl::cli
