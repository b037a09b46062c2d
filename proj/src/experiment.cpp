#include "pitchrl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "pitchrl/ppo.hpp"
#include "pitchrl/text.hpp"

#ifndef PITCHRL_VERSION
#define PITCHRL_VERSION "0.0.0"
#endif

namespace pitchrl::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using text::format_double;

std::string tool_version() { return PITCHRL_VERSION; }

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << content;
    os.flush();
    if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

}  // namespace

RunManifest make_manifest(const std::string& command, const config::WorkbenchConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.config_ini = config::to_ini(cfg);
    m.alphas = cfg.sweep.alphas;
    m.seeds = cfg.sweep.seeds;
    m.tool_version = tool_version();
    m.timestamp = utc_timestamp();
    m.config_hash = config::content_hash(m.config_ini);
    return m;
}

json to_json(const RunManifest& m) {
    return {{"format", "pitchrl-manifest"},
            {"version", 1},
            {"command", m.command},
            {"tool_version", m.tool_version},
            {"timestamp", m.timestamp},
            {"alphas", m.alphas},
            {"seeds", m.seeds},
            {"config_hash", m.config_hash},
            {"config_ini", m.config_ini},
            {"args", m.args}};
}

RunManifest manifest_from_json(const json& j) {
    if (j.value("format", "") != "pitchrl-manifest") {
        throw std::runtime_error("not a pitchrl manifest");
    }
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config_ini = j.at("config_ini").get<std::string>();
    m.args = j.value("args", json::object());
    return m;
}

void write_manifest(const RunManifest& m, const fs::path& path) {
    write_text(path, to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
    try {
        return manifest_from_json(read_json(path));
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed manifest '" + path.string() + "': " + e.what());
    }
}

config::WorkbenchConfig manifest_config(const RunManifest& m) {
    std::istringstream is(m.config_ini);
    return config::parse_config(is, "manifest");
}

void SweepConfig::validate() const {
    auto copy = base;
    copy.finalize();
    if (output_dir.empty()) throw std::invalid_argument("sweep output directory must be set");
}

std::pair<double, double> mean_and_std(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean_and_std of an empty sample");
    std::sort(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    if (xs.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::vector<AggregatePoint> aggregate(const std::vector<EvalPoint>& points) {
    if (points.empty()) throw std::invalid_argument("aggregate needs at least one point");
    std::vector<double> alphas;
    for (const auto& p : points) alphas.push_back(p.alpha);
    std::sort(alphas.begin(), alphas.end());
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());

    std::vector<AggregatePoint> out;
    for (double a : alphas) {
        std::vector<double> dev, pow, mac, sfr;
        for (const auto& p : points) {
            if (p.alpha != a) continue;
            dev.push_back(p.deviation_deg);
            pow.push_back(p.power_w);
            mac.push_back(p.mean_abs_action_change);
            sfr.push_back(p.sign_flip_rate);
        }
        AggregatePoint g;
        g.alpha = a;
        g.n_seeds = static_cast<int>(dev.size());
        std::tie(g.deviation_deg_mean, g.deviation_deg_std) = mean_and_std(dev);
        std::tie(g.power_w_mean, g.power_w_std) = mean_and_std(pow);
        g.mean_abs_action_change = mean_and_std(mac).first;
        g.sign_flip_rate = mean_and_std(sfr).first;
        out.push_back(g);
    }
    return out;
}

void write_points_csv(std::ostream& os, const std::vector<EvalPoint>& points) {
    os << "alpha,seed,optimizer,checkpoint_id,deviation_deg,power_w,mean_reward,"
          "mean_abs_action_change,sign_flip_rate\n";
    for (const auto& p : points) {
        os << format_double(p.alpha) << ',' << p.seed << ',' << p.optimizer << ','
           << p.checkpoint_id << ',' << format_double(p.deviation_deg) << ','
           << format_double(p.power_w) << ',' << format_double(p.mean_reward) << ','
           << format_double(p.mean_abs_action_change) << ',' << format_double(p.sign_flip_rate)
           << '\n';
    }
}

std::vector<EvalPoint> read_points_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("results CSV is empty");
    if (line.rfind("alpha,seed,optimizer,", 0) != 0) {
        throw std::runtime_error("results CSV has an unexpected header: " + line);
    }
    std::vector<EvalPoint> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() != 9) {
            throw std::runtime_error("results CSV line " + std::to_string(lineno) + ": expected 9 fields");
        }
        try {
            EvalPoint p;
            p.alpha = text::parse_double(f[0]);
            p.seed = static_cast<std::uint64_t>(text::parse_int(f[1]));
            p.optimizer = std::string(text::trim(f[2]));
            p.checkpoint_id = text::parse_int(f[3]);
            p.deviation_deg = text::parse_double(f[4]);
            p.power_w = text::parse_double(f[5]);
            p.mean_reward = text::parse_double(f[6]);
            p.mean_abs_action_change = text::parse_double(f[7]);
            p.sign_flip_rate = text::parse_double(f[8]);
            out.push_back(p);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("results CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<EvalPoint> read_points_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
    try {
        return read_points_csv(is);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

json to_json(const EvalPoint& p) {
    return {{"alpha", p.alpha},
            {"seed", p.seed},
            {"optimizer", p.optimizer},
            {"checkpoint_id", p.checkpoint_id},
            {"deviation_deg", p.deviation_deg},
            {"power_w", p.power_w},
            {"mean_reward", p.mean_reward},
            {"mean_abs_action_change", p.mean_abs_action_change},
            {"sign_flip_rate", p.sign_flip_rate}};
}

EvalPoint point_from_json(const json& j) {
    EvalPoint p;
    p.alpha = j.at("alpha").get<double>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.optimizer = j.at("optimizer").get<std::string>();
    p.checkpoint_id = j.at("checkpoint_id").get<std::int64_t>();
    p.deviation_deg = j.at("deviation_deg").get<double>();
    p.power_w = j.at("power_w").get<double>();
    p.mean_reward = j.at("mean_reward").get<double>();
    p.mean_abs_action_change = j.at("mean_abs_action_change").get<double>();
    p.sign_flip_rate = j.at("sign_flip_rate").get<double>();
    return p;
}

std::string run_directory_name(double alpha, std::uint64_t seed) {
    return "alpha-" + format_double(alpha) + "_seed-" + std::to_string(seed);
}

config::WorkbenchConfig run_config(const config::WorkbenchConfig& base, double alpha,
                                   std::uint64_t seed) {
    auto c = base;
    c.env.alpha = alpha;
    c.sweep.alphas = {alpha};
    c.sweep.seeds = {seed};
    c.sweep.compare_alphas = {alpha};
    c.sweep.workers = 1;
    c.finalize();
    return c;
}

namespace {

struct LogEntry {
    std::int64_t step = 0;
    ppo::EvalMetrics eval;
};

fs::path checkpoint_path(const fs::path& dir, std::int64_t step) {
    std::string digits = std::to_string(step);
    if (digits.size() < 10) digits.insert(0, 10 - digits.size(), '0');
    return dir / "checkpoints" / ("step-" + digits + ".json");
}

std::vector<std::int64_t> checkpoint_steps(const fs::path& dir) {
    std::vector<std::int64_t> out;
    const fs::path cdir = dir / "checkpoints";
    if (!fs::is_directory(cdir)) return out;
    for (const auto& e : fs::directory_iterator(cdir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("step-", 0) != 0 || e.path().extension() != ".json") continue;
        try {
            out.push_back(text::parse_int(name.substr(5, name.size() - 10)));
        } catch (const std::invalid_argument&) {
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void clear_run_artifacts(const fs::path& dir) {
    for (const char* f : {"manifest.json", "train_log.csv", "eval_trace.csv", "result.json", "failure.txt"}) {
        fs::remove(dir / f);
    }
    fs::remove_all(dir / "checkpoints");
}

// Rows of an existing log up to and including max_step.
std::vector<std::pair<std::string, LogEntry>> read_log_prefix(const fs::path& path,
                                                              std::int64_t max_step) {
    std::vector<std::pair<std::string, LogEntry>> out;
    std::ifstream is(path);
    std::string line;
    if (!is || !std::getline(is, line)) return out;
    while (std::getline(is, line)) {
        const auto f = text::split(line, ',');
        if (f.size() < 6) break;
        LogEntry e;
        e.step = text::parse_int(f[0]);
        if (e.step > max_step) break;
        e.eval.deviation_deg = text::parse_double(f[1]);
        e.eval.power_w = text::parse_double(f[2]);
        e.eval.mean_reward = text::parse_double(f[3]);
        e.eval.mean_abs_action_change = text::parse_double(f[4]);
        e.eval.sign_flip_rate = text::parse_double(f[5]);
        out.emplace_back(line, e);
    }
    return out;
}

std::size_t select_entry(const std::vector<LogEntry>& log, config::CheckpointSelection sel) {
    if (sel == config::CheckpointSelection::Final) return log.size() - 1;
    std::size_t best = 0;
    for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i].eval.mean_reward > log[best].eval.mean_reward) best = i;
    }
    return best;
}

json result_json(const EvalPoint& p, const std::string& hash, config::CheckpointSelection sel) {
    json j = to_json(p);
    j["config_hash"] = hash;
    j["selection"] = config::to_string(sel);
    return j;
}

}  // namespace

RunOutcome run_single(const config::WorkbenchConfig& run_cfg, std::uint64_t seed, const fs::path& dir) {
    RunOutcome out;
    out.alpha = run_cfg.env.alpha;
    out.seed = seed;
    out.dir = dir;
    try {
        fs::create_directories(dir);
        const RunManifest manifest = make_manifest("train", run_cfg);
        const fs::path manifest_path = dir / "manifest.json";
        const fs::path result_path = dir / "result.json";

        bool same_config = false;
        if (fs::exists(manifest_path)) {
            try {
                same_config = read_manifest(manifest_path).config_hash == manifest.config_hash;
            } catch (const std::exception&) {
                same_config = false;
            }
        }
        if (same_config && fs::exists(result_path)) {
            try {
                const json r = read_json(result_path);
                if (r.value("config_hash", "") == manifest.config_hash) {
                    out.point = point_from_json(r);
                    out.skipped = true;
                    return out;
                }
            } catch (const std::exception&) {
            }
        }

        const auto& ppo_cfg = run_cfg.ppo;
        std::optional<ppo::Checkpoint> resume_from;
        if (same_config) {
            const auto steps = checkpoint_steps(dir);
            if (!steps.empty()) {
                try {
                    resume_from = ppo::load_checkpoint(checkpoint_path(dir, steps.back()));
                } catch (const std::exception&) {
                    resume_from.reset();
                }
            }
        }

        std::vector<LogEntry> log;
        std::vector<std::string> log_lines;
        if (resume_from) {
            for (auto& [line, e] : read_log_prefix(dir / "train_log.csv", resume_from->step)) {
                log_lines.push_back(line);
                log.push_back(e);
            }
            if (log.empty() || log.back().step != resume_from->step) {
                resume_from.reset();
                log.clear();
                log_lines.clear();
            }
        }
        if (!resume_from) {
            clear_run_artifacts(dir);
            write_manifest(manifest, manifest_path);
        }
        fs::remove(result_path);
        fs::remove(dir / "failure.txt");
        fs::create_directories(dir / "checkpoints");

        std::ofstream log_os(dir / "train_log.csv", std::ios::binary | std::ios::trunc);
        ppo::write_training_log_header(log_os);
        for (const auto& l : log_lines) log_os << l << '\n';
        log_os.flush();

        ppo::Trainer trainer = resume_from
                                   ? ppo::Trainer::resume(run_cfg.plant, run_cfg.env, ppo_cfg, *resume_from)
                                   : ppo::Trainer(run_cfg.plant, run_cfg.env, ppo_cfg, seed);
        if (resume_from) out.resumed_from = resume_from->step;
        resume_from.reset();

        const bool keep_all = run_cfg.sweep.keep_all_checkpoints;
        const auto selection = run_cfg.sweep.selection;
        while (!trainer.finished()) {
            const ppo::Checkpoint c = trainer.next_checkpoint();
            ppo::save_checkpoint(c, checkpoint_path(dir, c.step));
            ppo::write_training_log_row(log_os, c);
            log_os.flush();
            if (!log_os) throw std::runtime_error("cannot write training log in '" + dir.string() + "'");
            log.push_back({c.step, c.eval});
            if (!keep_all) {
                const std::int64_t keep = log[select_entry(log, selection)].step;
                for (auto s : checkpoint_steps(dir)) {
                    if (s != c.step && s != keep) fs::remove(checkpoint_path(dir, s));
                }
            }
        }
        log_os.close();
        if (log.empty()) throw std::runtime_error("training produced no checkpoints");

        const LogEntry& chosen = log[select_entry(log, selection)];
        policy::PolicyParams params = trainer.params();
        if (chosen.step != trainer.step()) {
            params = ppo::load_checkpoint(checkpoint_path(dir, chosen.step)).params;
        }
        std::vector<env::TraceRow> trace;
        ppo::evaluate_policy(params, run_cfg.plant, run_cfg.env, &trace);
        {
            std::ofstream ts(dir / "eval_trace.csv", std::ios::binary | std::ios::trunc);
            env::write_trace_csv(ts, trace);
            if (!ts) throw std::runtime_error("cannot write '" + (dir / "eval_trace.csv").string() + "'");
        }

        EvalPoint p;
        p.alpha = run_cfg.env.alpha;
        p.seed = seed;
        p.optimizer = std::string(optim::to_string(ppo_cfg.optimizer));
        p.checkpoint_id = chosen.step;
        p.deviation_deg = chosen.eval.deviation_deg;
        p.power_w = chosen.eval.power_w;
        p.mean_reward = chosen.eval.mean_reward;
        p.mean_abs_action_change = chosen.eval.mean_abs_action_change;
        p.sign_flip_rate = chosen.eval.sign_flip_rate;
        write_text(result_path, result_json(p, manifest.config_hash, selection).dump(2) + "\n");
        out.point = p;
    } catch (const std::exception& e) {
        out.error = e.what();
        out.point.reset();
        try {
            write_text(dir / "failure.txt", out.error + "\n");
        } catch (const std::exception&) {
        }
    }
    return out;
}

std::size_t SweepResult::failures() const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return !o.error.empty(); }));
}

std::size_t SweepResult::skipped() const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [](const RunOutcome& o) { return o.skipped; }));
}

void write_results(const SweepResult& r, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream csv;
    write_points_csv(csv, r.points);
    write_text(dir / "results.csv", csv.str());

    json j;
    j["points"] = json::array();
    for (const auto& p : r.points) j["points"].push_back(to_json(p));
    j["failures"] = json::array();
    for (const auto& o : r.outcomes) {
        if (o.error.empty()) continue;
        j["failures"].push_back({{"alpha", o.alpha}, {"seed", o.seed}, {"error", o.error}});
    }
    write_text(dir / "results.json", j.dump(2) + "\n");
}

SweepResult run_sweep(const SweepConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    fs::create_directories(cfg.output_dir);
    write_manifest(make_manifest("sweep", cfg.base), cfg.output_dir / "manifest.json");

    struct Job {
        double alpha;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double a : cfg.alphas()) {
        for (auto s : cfg.seeds()) jobs.push_back({a, s});
    }

    SweepResult result;
    result.outcomes.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            RunOutcome o;
            try {
                o = run_single(run_config(cfg.base, job.alpha, job.seed), job.seed,
                               cfg.output_dir / run_directory_name(job.alpha, job.seed));
            } catch (const std::exception& e) {
                o.alpha = job.alpha;
                o.seed = job.seed;
                o.error = e.what();
            }
            result.outcomes[i] = o;
            if (progress) {
                std::lock_guard<std::mutex> lock(progress_mutex);
                progress(result.outcomes[i]);
            }
        }
    };

    const std::size_t n_threads =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.base.sweep.workers)), jobs.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (const auto& o : result.outcomes) {
        if (o.point) result.points.push_back(*o.point);
    }
    write_results(result, cfg.output_dir);
    if (result.points.empty()) {
        std::string first;
        for (const auto& o : result.outcomes) {
            if (!o.error.empty()) {
                first = o.error;
                break;
            }
        }
        throw std::runtime_error("every run of the sweep failed; first error: " + first);
    }
    return result;
}

ComparisonReport compare_optimizers(const CompareConfig& cfg, const ProgressFn& progress) {
    if (cfg.arms.empty()) throw std::invalid_argument("comparison needs at least one optimizer arm");
    ComparisonReport report;
    std::vector<std::string> used;
    for (auto kind : cfg.arms) {
        std::string name(optim::to_string(kind));
        const auto dup = std::count(used.begin(), used.end(), name);
        used.push_back(name);
        if (dup > 0) name += "-" + std::to_string(dup + 1);

        SweepConfig sc;
        sc.base = cfg.base;
        sc.base.ppo.optimizer = kind;
        sc.base.sweep.alphas = cfg.base.sweep.compare_alphas;
        sc.base.finalize();
        sc.output_dir = cfg.output_dir / name;
        SweepResult r = run_sweep(sc, progress);

        ArmReport arm;
        arm.optimizer = kind;
        arm.points = r.points;
        arm.aggregates = aggregate(r.points);
        arm.failures = r.failures();
        report.arms.push_back(std::move(arm));
    }

    std::ostringstream csv;
    write_comparison_csv(csv, report);
    write_text(cfg.output_dir / "comparison.csv", csv.str());
    write_text(cfg.output_dir / "comparison.json", to_json(report).dump(2) + "\n");
    write_manifest(make_manifest("compare-optim", cfg.base), cfg.output_dir / "manifest.json");
    return report;
}

void write_comparison_csv(std::ostream& os, const ComparisonReport& r) {
    os << "optimizer,alpha,n_seeds,deviation_deg_mean,deviation_deg_std,power_w_mean,power_w_std,"
          "mean_abs_action_change,sign_flip_rate\n";
    for (const auto& arm : r.arms) {
        for (const auto& g : arm.aggregates) {
            os << optim::to_string(arm.optimizer) << ',' << format_double(g.alpha) << ',' << g.n_seeds
               << ',' << format_double(g.deviation_deg_mean) << ',' << format_double(g.deviation_deg_std)
               << ',' << format_double(g.power_w_mean) << ',' << format_double(g.power_w_std) << ','
               << format_double(g.mean_abs_action_change) << ',' << format_double(g.sign_flip_rate)
               << '\n';
        }
    }
}

json to_json(const ComparisonReport& r) {
    json arms = json::array();
    for (const auto& arm : r.arms) {
        json aggs = json::array();
        for (const auto& g : arm.aggregates) {
            aggs.push_back({{"alpha", g.alpha},
                            {"n_seeds", g.n_seeds},
                            {"deviation_deg_mean", g.deviation_deg_mean},
                            {"deviation_deg_std", g.deviation_deg_std},
                            {"power_w_mean", g.power_w_mean},
                            {"power_w_std", g.power_w_std},
                            {"mean_abs_action_change", g.mean_abs_action_change},
                            {"sign_flip_rate", g.sign_flip_rate}});
        }
        json points = json::array();
        for (const auto& p : arm.points) points.push_back(to_json(p));
        arms.push_back({{"optimizer", optim::to_string(arm.optimizer)},
                        {"failures", arm.failures},
                        {"aggregates", aggs},
                        {"points", points}});
    }
    return {{"arms", arms}};
}

}  // namespace pitchrl::experiment
