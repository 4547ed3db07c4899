#pragma once

// The training loop: teacher-guided behavior selection, replay, one update
// per environment step after warmup, and periodic held-out evaluation.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "../eval.hpp"
#include "../heapgen.hpp"
#include "../nn/checkpoint.hpp"
#include "agent.hpp"
#include "config.hpp"
#include "replay.hpp"

namespace vmms::rl {

/// Applies an ablation toggle to the training and observation settings.
inline void apply_ablation(Ablation a, TrainConfig& cfg, ObserveParams& obs)
{
    switch (a) {
    case Ablation::none: break;
    case Ablation::no_teachers: cfg.use_teachers = false; break;
    case Ablation::no_asymmetry: cfg.asymmetric = false; break;
    case Ablation::no_pose: obs.zero_position_channels = true; break;
    case Ablation::plain_ddpg:
        cfg.use_teachers = false;
        cfg.asymmetric = false;
        cfg.ensemble = 1;
        break;
    }
}

struct TrainJob {
    const HeapDataset* dataset = nullptr;
    std::vector<int> train_ids;
    std::vector<int> eval_ids;
    TrainConfig cfg{};
    RolloutSettings settings{};
    std::string run_dir;
    std::string config_hash;
    std::function<void(const std::string&)> log;
};

struct EvalPoint {
    std::int64_t step = 0;
    MetricMeans means;
    double actor_fraction = 0.0;
};

struct TrainResult {
    std::vector<EvalPoint> evals;
    std::int64_t env_steps = 0;
    std::int64_t episodes = 0;
};

namespace detail {

enum StreamTag : std::uint64_t { kEpisodes = 11, kBehavior = 12, kSample = 13, kTeacher = 14, kEval = 15 };

inline nn::Checkpoint make_checkpoint(Agent& agent, std::int64_t step, const TrainJob& job)
{
    nn::Checkpoint c;
    c.step = step;
    c.seed = job.cfg.seed;
    c.config_hash = job.config_hash;
    const auto& o = agent.observe_params();
    c.observation = {{"grid", o.grid},
                     {"max_objects", o.max_objects},
                     {"height_scale", o.height_scale},
                     {"zero_position_channels", o.zero_position_channels}};
    c.networks.push_back({"actor", agent.actor()});
    c.networks.push_back({"actor_target", agent.actor_target()});
    for (int e = 0; e < agent.ensemble_size(); ++e) {
        c.networks.push_back({"critic_" + std::to_string(e), agent.critic(e)});
        c.networks.push_back({"critic_target_" + std::to_string(e), agent.critic_target(e)});
    }
    return c;
}

} // namespace detail

/// Observation settings stored with a checkpoint.
inline ObserveParams observe_params_from(const nn::Checkpoint& c)
{
    ObserveParams o;
    const auto& j = c.observation;
    o.grid = j.value("grid", o.grid);
    o.max_objects = j.value("max_objects", o.max_objects);
    o.height_scale = j.value("height_scale", o.height_scale);
    o.zero_position_channels = j.value("zero_position_channels", o.zero_position_channels);
    return o;
}

/// Noise-free, teacher-free actor on every evaluation heap.
inline EvalSummary evaluate_actor(const nn::Network& actor, const HeapDataset& ds, const std::vector<int>& eval_ids,
                                  std::uint64_t seed, const RolloutSettings& rs, int jobs)
{
    Policy p;
    p.kind = PolicyKind::actor;
    p.checkpoint = "current";
    p.actor = std::make_shared<const nn::Network>(actor);
    std::vector<EpisodeJob> work;
    for (int id : eval_ids)
        work.push_back({&ds.heaps.at(static_cast<std::size_t>(id)), derive_seed(seed, {detail::kEval, static_cast<std::uint64_t>(id)})});
    return summarize(run_episodes(p, work, rs, jobs));
}

/// Done flag kept in the replay buffer. With bootstrap_timeouts a step-limit
/// cut is not a terminal state of the task, so its target still bootstraps.
inline bool stored_done(const StepResult& r, const TrainConfig& cfg, const WorldParams& world)
{
    if (!r.done) return false;
    if (!cfg.bootstrap_timeouts) return true;
    return visibility(r.state, r.state.target_id) >= world.visible_threshold;
}

inline TrainResult train(const TrainJob& job)
{
    const auto& cfg = job.cfg;
    cfg.validate();
    if (!job.dataset) throw logic_error("train needs a dataset");
    if (job.train_ids.empty() || job.eval_ids.empty()) throw data_error("train needs non-empty train and eval splits");
    const auto& ds = *job.dataset;
    const auto& rs = job.settings;
    auto log = [&](const std::string& m) {
        if (job.log) job.log(m);
    };

    namespace fs = std::filesystem;
    fs::create_directories(job.run_dir);
    fs::create_directories(fs::path(job.run_dir) / "checkpoints");
    std::ofstream csv(fs::path(job.run_dir) / "metrics.csv", std::ios::binary);
    if (!csv) throw data_error("cannot write metrics in " + job.run_dir);
    csv << kMetricsHeader << "\n";

    Agent agent(cfg, rs.observe, cfg.seed);
    ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
    Rng episode_rng(derive_seed(cfg.seed, {detail::kEpisodes}));
    Rng behavior_rng(derive_seed(cfg.seed, {detail::kBehavior}));
    Rng sample_rng(derive_seed(cfg.seed, {detail::kSample}));
    std::vector<Teacher> teachers;
    if (cfg.use_teachers)
        for (std::size_t k = 0; k < kAllTeachers.size(); ++k)
            teachers.emplace_back(kAllTeachers[k], derive_seed(cfg.seed, {detail::kTeacher, k}), rs.teacher);

    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        return cfg.record_wall_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
    };

    TrainResult result;
    std::int64_t window_steps = 0, window_actor = 0;
    auto eval_point = [&](std::int64_t step) {
        const auto summary = evaluate_actor(agent.actor(), ds, job.eval_ids, cfg.seed, rs, cfg.eval_jobs);
        const double frac = window_steps ? static_cast<double>(window_actor) / static_cast<double>(window_steps) : 0.0;
        result.evals.push_back({step, summary.aggregate, frac});
        csv << metrics_row(step, summary.aggregate, frac, wall()) << "\n" << std::flush;
        log("step " + std::to_string(step) + " visibility_change " + fmt_num(summary.aggregate.visibility_change, 4) +
            " reward " + fmt_num(summary.aggregate.reward, 4) + " actor_fraction " + fmt_num(frac, 3));
        window_steps = window_actor = 0;
    };
    auto save = [&](std::int64_t step, const std::string& name) {
        nn::save_checkpoint(detail::make_checkpoint(agent, step, job), (fs::path(job.run_dir) / "checkpoints" / name).string());
    };

    std::int64_t t = 0;
    try {
        eval_point(0);
        WorldState state;
        std::shared_ptr<const Observation> obs;
        PrivilegedState priv;
        CommitState commit;
        bool active = false;
        while (t < cfg.max_env_steps) {
            if (!active) {
                const int id = job.train_ids[episode_rng.index(job.train_ids.size())];
                state = reset(ds.heaps.at(static_cast<std::size_t>(id)), episode_rng, rs.world);
                for (auto& teacher : teachers) teacher.begin_episode(state);
                commit = {};
                obs = std::make_shared<const Observation>(render(state, rs.observe));
                priv = privileged(state, rs.observe);
                active = true;
                ++result.episodes;
            }
            const auto choice = select_behavior_action(*obs, priv, state, agent, teachers, behavior_rng, commit);
            auto r = step(state, choice.action, rs.world);
            auto next_obs = std::make_shared<const Observation>(render(r.state, rs.observe));
            auto next_priv = privileged(r.state, rs.observe);
            replay.push({obs, priv, choice.action, r.reward.total, next_obs, next_priv, stored_done(r, cfg, rs.world)});
            ++window_steps;
            if (choice.source == 0) ++window_actor;

            state = std::move(r.state);
            obs = std::move(next_obs);
            priv = std::move(next_priv);
            active = !r.done;
            ++t;

            if (t >= cfg.warmup_steps) {
                const auto items = replay.sample(static_cast<std::size_t>(cfg.batch), sample_rng);
                agent.update(agent.make_batch(items));
            }
            if (t % cfg.eval_every == 0 || t == cfg.max_env_steps) eval_point(t);
            if (cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 && t != cfg.max_env_steps)
                save(t, "step_" + std::to_string(t) + ".json");
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::divergence) throw;
        save(t, "diverged.json");
        throw divergence_error(std::string(e.what()) + " at env step " + std::to_string(t) + "; checkpoint written to " +
                               (fs::path(job.run_dir) / "checkpoints" / "diverged.json").string());
    }
    save(t, "final.json");
    result.env_steps = t;
    return result;
}

} // namespace vmms::rl
