#pragma once

// Command-line front end: gen-heaps, train, eval, rollout, report.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "core/error.hpp"
#include "eval.hpp"
#include "heapgen.hpp"
#include "nn/checkpoint.hpp"
#include "rl/train.hpp"

namespace vmms::cli {

namespace fs = std::filesystem;

struct Io {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
};

struct CommonOptions {
    std::string config_path;
    std::vector<std::string> overrides; ///< "section.key=value"
    std::optional<std::uint64_t> seed;
};

inline std::optional<std::uint64_t> env_seed()
{
    const char* v = std::getenv("VMMS_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        return detail::parse_int<std::uint64_t>(v);
    } catch (const Error&) {
        throw usage_error(std::string("VMMS_SEED is not an unsigned integer: '") + v + "'");
    }
}

/// Defaults, then VMMS_SEED, then the config file, then --set overrides.
inline RunConfig build_config(const CommonOptions& o)
{
    RunConfig c;
    if (auto s = env_seed()) {
        c.train.seed = *s;
        c.generator.seed = *s;
    }
    if (!o.config_path.empty()) load_config_into(c, o.config_path);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw usage_error("--set expects section.key=value, got '" + kv + "'");
        set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

inline void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config_path, "Run config file (sectioned key = value)");
    cmd->add_option("--set", o.overrides, "Override one config key: section.key=value")->take_all();
    cmd->add_option("--seed", o.seed, "Seed (falls back to VMMS_SEED)");
}

inline void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path.string());
    out << text;
}

// ---- gen-heaps ----------------------------------------------------------------

struct GenOptions {
    CommonOptions common;
    std::string mode;
    std::optional<int> count;
    std::vector<int> object_counts;
    std::string out;
    int jobs = 1;
};

inline int cmd_gen_heaps(const GenOptions& o, Io io)
{
    RunConfig c = build_config(o.common);
    auto& g = c.generator;
    if (!o.mode.empty()) g.mode = parse_heap_mode(o.mode);
    if (o.common.seed) g.seed = *o.common.seed;
    if (o.count) g.count = *o.count;
    else if (g.mode == HeapMode::dual && o.common.config_path.empty()) g.count = 120;
    if (!o.object_counts.empty()) g.object_counts = o.object_counts;
    g.workspace = c.rollout.world.workspace;
    if (g.count < 2) throw usage_error("--count must be at least 2");
    if (o.jobs < 1) throw usage_error("--jobs must be positive");

    const auto report = generate_dataset(g, o.jobs);
    save_dataset(report.dataset, o.out);
    io.out << "wrote " << report.dataset.heaps.size() << " " << to_string(g.mode) << " heaps to " << o.out
           << " (acceptance rate " << fmt_num(report.acceptance_rate(), 4) << " over " << report.attempts
           << " attempts)\n";
    return 0;
}

// ---- train ----------------------------------------------------------------------

struct TrainOptions {
    CommonOptions common;
    std::string heaps;
    std::string out;
    int seeds = 1;
    std::string ablation;
    std::optional<std::int64_t> max_env_steps;
    std::optional<int> jobs;
    bool quiet = false;
};

inline HeapDataset load_heaps(const std::string& path)
{
    if (path.empty()) throw usage_error("no heap dataset given (--heaps or paths.heaps)");
    if (!fs::exists(path)) throw data_error("heap dataset not found: " + path);
    return load_dataset(path);
}

inline int cmd_train(const TrainOptions& o, Io io)
{
    RunConfig c = build_config(o.common);
    if (!o.heaps.empty()) c.heaps_path = o.heaps;
    if (!o.out.empty()) c.run_dir = o.out;
    if (o.common.seed) c.train.seed = *o.common.seed;
    if (!o.ablation.empty()) c.ablation = rl::parse_ablation(o.ablation);
    if (o.max_env_steps) c.train.max_env_steps = *o.max_env_steps;
    if (o.jobs) c.train.eval_jobs = *o.jobs;
    if (o.seeds < 1) throw usage_error("--seeds must be positive");
    if (c.run_dir.empty()) throw usage_error("no run directory given (--out or paths.run_dir)");
    c.train.validate();

    const auto ds = load_heaps(c.heaps_path);
    const auto [train_ids, eval_ids] = split(ds);
    const std::uint64_t base_seed = c.train.seed;
    for (int k = 0; k < o.seeds; ++k) {
        RunConfig rc = c;
        rc.train.seed = base_seed + static_cast<std::uint64_t>(k);
        if (o.seeds > 1) rc.run_dir = (fs::path(c.run_dir) / ("seed_" + std::to_string(rc.train.seed))).string();

        rl::TrainJob job;
        job.dataset = &ds;
        job.train_ids = train_ids;
        job.eval_ids = eval_ids;
        job.cfg = rc.train;
        job.settings = rc.rollout;
        rl::apply_ablation(rc.ablation, job.cfg, job.settings.observe);
        job.run_dir = rc.run_dir;
        job.config_hash = config_hash(rc);
        if (!o.quiet) job.log = [&io, seed = rc.train.seed](const std::string& m) { io.err << "[seed " << seed << "] " << m << "\n"; };

        fs::create_directories(rc.run_dir);
        write_text(fs::path(rc.run_dir) / "config.toml", emit_config(rc));
        write_text(fs::path(rc.run_dir) / "config.hash", job.config_hash + "\n");
        const auto r = rl::train(job);
        io.out << "run " << rc.run_dir << ": " << r.env_steps << " env steps, " << r.episodes << " episodes, final "
               << "visibility change " << fmt_num(r.evals.back().means.visibility_change, 4) << "\n";
    }
    return 0;
}

// ---- eval / rollout --------------------------------------------------------------

/// Resolves a policy tag; actor policies load their checkpoint and are
/// checked against the architecture the config describes.
inline Policy resolve_policy(const std::string& tag, RunConfig& c)
{
    Policy p = parse_policy(tag);
    if (p.kind != PolicyKind::actor) return p;
    const auto ck = nn::load_checkpoint(p.checkpoint);
    c.rollout.observe = rl::observe_params_from(ck);
    nn::Network actor(rl::actor_architecture(c.rollout.observe.grid, c.train));
    nn::restore(ck, "actor", actor);
    p.actor = std::make_shared<const nn::Network>(std::move(actor));
    return p;
}

inline std::vector<int> split_ids(const HeapDataset& ds, const std::string& which)
{
    const auto [train_ids, eval_ids] = split(ds);
    if (which == "eval") return eval_ids;
    if (which == "train") return train_ids;
    if (which == "all") {
        std::vector<int> all;
        for (const auto& h : ds.heaps) all.push_back(h.heap_id);
        return all;
    }
    throw usage_error("--split must be eval, train or all");
}

struct EvalOptions {
    CommonOptions common;
    std::string policy;
    std::string heaps;
    std::optional<int> episodes;
    std::string csv;
    std::string split = "eval";
    int jobs = 1;
};

inline int cmd_eval(const EvalOptions& o, Io io)
{
    RunConfig c = build_config(o.common);
    if (!o.heaps.empty()) c.heaps_path = o.heaps;
    if (o.common.seed) c.train.seed = *o.common.seed;
    if (o.jobs < 1) throw usage_error("--jobs must be positive");
    const Policy policy = resolve_policy(o.policy, c);
    const auto ds = load_heaps(c.heaps_path);
    const auto ids = split_ids(ds, o.split);
    if (ids.empty()) throw data_error("no heaps in the selected split");
    const int episodes = o.episodes.value_or(static_cast<int>(ids.size()));
    if (episodes < 1) throw usage_error("--episodes must be positive");

    std::vector<EpisodeJob> work;
    for (int i = 0; i < episodes; ++i)
        work.push_back({&ds.heaps.at(static_cast<std::size_t>(ids[static_cast<std::size_t>(i) % ids.size()])),
                        derive_seed(c.train.seed, {static_cast<std::uint64_t>(i)})});
    const auto summary = summarize(run_episodes(policy, work, c.rollout, o.jobs));
    const double actor_fraction = policy.kind == PolicyKind::actor ? 1.0 : 0.0;
    const auto row = metrics_row(0, summary.aggregate, actor_fraction, 0.0);
    if (!o.csv.empty()) write_text(o.csv, std::string(kMetricsHeader) + "\n" + row + "\n");
    const auto& m = summary.aggregate;
    io.out << policy.tag() << ": " << episodes << " episodes on " << summary.per_heap.size() << " heaps\n"
           << "  mean reward             " << fmt_num(m.reward, 6) << "\n"
           << "  mean visibility change  " << fmt_num(m.visibility_change, 6) << "\n"
           << "  mean steps              " << fmt_num(m.steps, 6) << "\n"
           << "  mean graspability change " << fmt_num(m.graspability_change, 6) << "\n"
           << "  mean heap disturbance   " << fmt_num(m.heap_disturbance, 6) << "\n";
    return 0;
}

struct RolloutOptions {
    CommonOptions common;
    std::string policy;
    std::string heaps;
    int heap_id = 0;
    std::string trace;
};

inline int cmd_rollout(const RolloutOptions& o, Io io)
{
    RunConfig c = build_config(o.common);
    if (!o.heaps.empty()) c.heaps_path = o.heaps;
    if (o.common.seed) c.train.seed = *o.common.seed;
    const Policy policy = resolve_policy(o.policy, c);
    const auto ds = load_heaps(c.heaps_path);
    if (o.heap_id < 0 || o.heap_id >= static_cast<int>(ds.heaps.size()))
        throw data_error("heap id " + std::to_string(o.heap_id) + " not in dataset (" + std::to_string(ds.heaps.size()) +
                         " heaps)");
    const auto tr = rollout(policy, ds.heaps[static_cast<std::size_t>(o.heap_id)], c.train.seed, c.rollout);
    if (!o.trace.empty()) save_trace(tr, o.trace, config_hash(c));
    io.out << policy.tag() << " on heap " << o.heap_id << ": " << tr.step_count() << " steps, " << tr.termination
           << ", visibility " << fmt_num(tr.steps.front().visibility, 4) << " -> " << fmt_num(tr.steps.back().visibility, 4)
           << ", reward " << fmt_num(tr.total_reward(), 6) << "\n";
    return 0;
}

// ---- report --------------------------------------------------------------------

struct ReportOptions {
    std::vector<std::string> runs;
    std::string out;
};

struct MetricsTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline MetricsTable read_metrics(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path.string());
    MetricsTable t;
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader) throw data_error(path.string() + ": not a metrics file");
    std::stringstream hs(line);
    for (std::string col; std::getline(hs, col, ',');) t.columns.push_back(col);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) row.push_back(detail::parse_double(cell));
        if (row.size() != t.columns.size()) throw data_error(path.string() + ": ragged row");
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Finds metrics.csv files: each argument is a file, a run directory, or a
/// directory of run directories.
inline std::vector<fs::path> find_metrics(const std::vector<std::string>& runs)
{
    std::vector<fs::path> out;
    for (const auto& r : runs) {
        const fs::path p(r);
        if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else if (fs::is_regular_file(p / "metrics.csv")) {
            out.push_back(p / "metrics.csv");
        } else if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (fs::is_regular_file(e.path() / "metrics.csv")) found.push_back(e.path() / "metrics.csv");
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            throw data_error("no metrics found at " + r);
        }
    }
    if (out.empty()) throw data_error("no metrics files found");
    return out;
}

/// Mean and sample standard deviation per step across runs.
inline std::string merge_metrics(const std::vector<MetricsTable>& tables)
{
    const auto& cols = tables.front().columns;
    std::map<long long, std::vector<const std::vector<double>*>> by_step;
    for (const auto& t : tables)
        for (const auto& row : t.rows) by_step[std::llround(row[0])].push_back(&row);
    std::ostringstream out;
    out << "step,runs";
    for (std::size_t c = 1; c < cols.size(); ++c) out << ',' << cols[c] << "_mean," << cols[c] << "_sd";
    out << "\n";
    for (const auto& [step, rows] : by_step) {
        out << step << ',' << rows.size();
        for (std::size_t c = 1; c < cols.size(); ++c) {
            double mean = 0.0;
            for (const auto* r : rows) mean += (*r)[c];
            mean /= static_cast<double>(rows.size());
            double var = 0.0;
            for (const auto* r : rows) var += ((*r)[c] - mean) * ((*r)[c] - mean);
            const double sd = rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
            out << ',' << fmt_num(mean, 9) << ',' << fmt_num(sd, 9);
        }
        out << "\n";
    }
    return out.str();
}

inline int cmd_report(const ReportOptions& o, Io io)
{
    std::vector<MetricsTable> tables;
    for (const auto& p : find_metrics(o.runs)) tables.push_back(read_metrics(p));
    const auto text = merge_metrics(tables);
    if (o.out.empty()) io.out << text;
    else write_text(o.out, text);
    return 0;
}

// ---- entry point ------------------------------------------------------------------

inline int run(int argc, const char* const* argv, Io io = {})
{
    CLI::App app{"Teacher-guided asymmetric actor-critic workbench for uncovering occluded objects"};
    app.require_subcommand(1);

    GenOptions gen;
    auto* g = app.add_subcommand("gen-heaps", "Generate a heap dataset");
    add_common(g, gen.common);
    g->add_option("--mode", gen.mode, "single or dual");
    g->add_option("--count", gen.count, "Number of heaps");
    g->add_option("--object-counts", gen.object_counts, "Single mode object counts, cycled by heap index");
    g->add_option("--out", gen.out, "Output dataset file")->required();
    g->add_option("--jobs", gen.jobs, "Worker threads");

    TrainOptions tr;
    auto* t = app.add_subcommand("train", "Train an agent");
    add_common(t, tr.common);
    t->add_option("--heaps", tr.heaps, "Heap dataset file");
    t->add_option("--out", tr.out, "Run directory");
    t->add_option("--seeds", tr.seeds, "Number of consecutive seeds, each in its own subdirectory");
    t->add_option("--ablation", tr.ablation, "none|no-teachers|no-asymmetry|no-pose|plain-ddpg");
    t->add_option("--max-env-steps", tr.max_env_steps, "Environment steps per run");
    t->add_option("--jobs", tr.jobs, "Evaluation worker threads");
    t->add_flag("--quiet", tr.quiet, "No progress output");

    EvalOptions ev;
    auto* e = app.add_subcommand("eval", "Evaluate a policy over many episodes");
    add_common(e, ev.common);
    e->add_option("--policy", ev.policy, "random | teacher:<kind> | actor:<checkpoint>")->required();
    e->add_option("--heaps", ev.heaps, "Heap dataset file");
    e->add_option("--episodes", ev.episodes, "Episode count (default: one per heap)");
    e->add_option("--csv", ev.csv, "Summary CSV output");
    e->add_option("--split", ev.split, "eval | train | all");
    e->add_option("--jobs", ev.jobs, "Worker threads");

    RolloutOptions ro;
    auto* r = app.add_subcommand("rollout", "Run one episode and write its trace");
    add_common(r, ro.common);
    r->add_option("--policy", ro.policy, "random | teacher:<kind> | actor:<checkpoint>")->required();
    r->add_option("--heaps", ro.heaps, "Heap dataset file");
    r->add_option("--heap-id", ro.heap_id, "Heap id");
    r->add_option("--trace", ro.trace, "Trace JSON output");

    ReportOptions rep;
    auto* p = app.add_subcommand("report", "Merge metrics across seeds into mean and sd per step");
    p->add_option("runs", rep.runs, "Metrics files or run directories")->required();
    p->add_option("--out", rep.out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        if (ex.get_exit_code() == 0) {
            io.out << app.help();
            return 0;
        }
        io.err << "error: " << ex.what() << "\n";
        return static_cast<int>(ErrorKind::usage);
    }

    try {
        if (g->parsed()) return cmd_gen_heaps(gen, io);
        if (t->parsed()) return cmd_train(tr, io);
        if (e->parsed()) return cmd_eval(ev, io);
        if (r->parsed()) return cmd_rollout(ro, io);
        if (p->parsed()) return cmd_report(rep, io);
    } catch (const Error& ex) {
        io.err << "error: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const std::exception& ex) {
        io.err << "error: " << ex.what() << "\n";
        return 1;
    }
    return static_cast<int>(ErrorKind::usage);
}

} // namespace vmms::cli
