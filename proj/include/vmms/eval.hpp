#pragma once

// Rollouts, episode traces, the geometric graspability proxy and summaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/numfmt.hpp"
#include "core/rng.hpp"
#include "heapgen.hpp"
#include "nn/network.hpp"
#include "observe.hpp"
#include "rl/agent.hpp"
#include "teachers.hpp"
#include "world.hpp"

namespace vmms {

struct GraspParams {
    int axes = 16;
    double finger_radius = 0.008;
    double clearance = 0.002;
};

/// Whether the antipodal finger pair along axis angle theta is unobstructed.
inline bool grasp_axis_free(const WorldState& s, double theta, const GraspParams& p = {})
{
    const auto& t = s.target();
    const double reach = t.radius + p.finger_radius + p.clearance;
    for (double sign : {1.0, -1.0}) {
        const Vec2 f = t.center + unit(theta) * (sign * reach);
        if (!s.workspace.contains(f, p.finger_radius)) return false;
        for (const auto& o : s.objects) {
            if (o.id == s.target_id) continue;
            const double rr = o.radius + p.finger_radius;
            if ((f - o.center).norm2() < rr * rr) return false;
        }
    }
    return true;
}

/// visibility(target) times the fraction of unobstructed grasp axes.
inline double graspability(const WorldState& s, const GraspParams& p = {})
{
    int free = 0;
    for (int k = 0; k < p.axes; ++k)
        if (grasp_axis_free(s, k * std::numbers::pi / p.axes, p)) ++free;
    return visibility(s, s.target_id) * static_cast<double>(free) / p.axes;
}

// ---- policies ---------------------------------------------------------------

enum class PolicyKind { actor, teacher, random };

struct Policy {
    PolicyKind kind = PolicyKind::random;
    TeacherKind teacher = TeacherKind::straight;
    std::string checkpoint; ///< actor policies: source path, for the tag only
    std::shared_ptr<const nn::Network> actor;

    std::string tag() const
    {
        switch (kind) {
        case PolicyKind::actor: return "actor:" + checkpoint;
        case PolicyKind::teacher: return "teacher:" + to_string(teacher);
        case PolicyKind::random: return "random";
        }
        return "?";
    }
};

/// Parses "random", "teacher:<kind>" or "actor:<checkpoint>". Actor
/// policies still need their network attached.
inline Policy parse_policy(const std::string& s)
{
    Policy p;
    if (s == "random") return p;
    if (s.starts_with("teacher:")) {
        p.kind = PolicyKind::teacher;
        p.teacher = parse_teacher(s.substr(8));
        return p;
    }
    if (s.starts_with("actor:") && s.size() > 6) {
        p.kind = PolicyKind::actor;
        p.checkpoint = s.substr(6);
        return p;
    }
    throw usage_error("unknown policy '" + s + "' (expected random|teacher:<kind>|actor:<checkpoint>)");
}

// ---- traces -----------------------------------------------------------------

struct StepRecord {
    Vec2 ee;
    Vec2 action;
    RewardBreakdown reward;
    double visibility = 0.0;
    std::vector<Vec2> objects;
};

struct EpisodeTrace {
    int heap_id = 0;
    std::string policy;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps; ///< steps[0] is the initial state (zero action and reward)
    double graspability_initial = 0.0;
    double graspability_final = 0.0;
    std::string termination; ///< "visible" or "max_steps"
    int target_id = 0;

    int step_count() const { return static_cast<int>(steps.size()) - 1; }

    double total_reward() const
    {
        double r = 0.0;
        for (std::size_t k = 1; k < steps.size(); ++k) r += steps[k].reward.total;
        return r;
    }

    double visibility_change() const { return steps.back().visibility - steps.front().visibility; }
    double graspability_change() const { return graspability_final - graspability_initial; }

    /// Mean displacement of the non-target objects over the episode.
    double heap_disturbance() const
    {
        const auto& a = steps.front().objects;
        const auto& b = steps.back().objects;
        double sum = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (static_cast<int>(i) == target_id) continue;
            sum += (b[i] - a[i]).norm();
            ++n;
        }
        return n ? sum / n : 0.0;
    }
};

inline StepRecord record(const WorldState& s, Vec2 action, const RewardBreakdown& r)
{
    StepRecord rec{s.ee, action, r, visibility(s, s.target_id), {}};
    rec.objects.resize(s.objects.size());
    for (const auto& o : s.objects) rec.objects[static_cast<std::size_t>(o.id)] = o.center;
    return rec;
}

struct RolloutSettings {
    WorldParams world{};
    ObserveParams observe{};
    TeacherParams teacher{};
    GraspParams grasp{};
};

/// One noise-free episode of `policy` on `heap`; deterministic in (heap, seed).
inline EpisodeTrace rollout(const Policy& policy, const HeapSpec& heap, std::uint64_t seed,
                            const RolloutSettings& rs = {})
{
    Rng reset_rng(derive_seed(seed, {1}));
    Rng policy_rng(derive_seed(seed, {2}));
    WorldState s = reset(heap, reset_rng, rs.world);

    EpisodeTrace tr;
    tr.heap_id = heap.heap_id;
    tr.policy = policy.tag();
    tr.seed = seed;
    tr.target_id = heap.target_id;
    tr.graspability_initial = graspability(s, rs.grasp);
    tr.steps.push_back(record(s, {}, {}));

    std::optional<nn::Network> net;
    std::optional<Teacher> teacher;
    if (policy.kind == PolicyKind::actor) {
        if (!policy.actor) throw logic_error("actor policy without a network");
        net = *policy.actor;
    } else if (policy.kind == PolicyKind::teacher) {
        teacher.emplace(policy.teacher, policy_rng.next_u64(), rs.teacher);
        teacher->begin_episode(s);
    }

    while (!s.done) {
        Action a;
        switch (policy.kind) {
        case PolicyKind::actor: {
            const auto y = net->forward(rl::actor_inputs(render(s, rs.observe)));
            a = Action{{y[0], y[1]}};
            break;
        }
        case PolicyKind::teacher: a = teacher->propose(s); break;
        case PolicyKind::random:
            a = Action{{policy_rng.uniform(-rs.world.max_action, rs.world.max_action),
                        policy_rng.uniform(-rs.world.max_action, rs.world.max_action)}};
            break;
        }
        a = Action::clamped(a.delta, rs.world.max_action);
        auto r = step(s, a, rs.world);
        s = std::move(r.state);
        tr.steps.push_back(record(s, a.delta, r.reward));
    }
    tr.graspability_final = graspability(s, rs.grasp);
    tr.termination = tr.steps.back().visibility >= rs.world.visible_threshold ? "visible" : "max_steps";
    return tr;
}

inline constexpr int kTraceFormatVersion = 1;

inline nlohmann::ordered_json trace_to_json(const EpisodeTrace& tr, const std::string& config_hash = "")
{
    using J = nlohmann::ordered_json;
    J j;
    j["format_version"] = kTraceFormatVersion;
    j["config_hash"] = config_hash;
    j["heap_id"] = tr.heap_id;
    j["policy"] = tr.policy;
    j["seed"] = tr.seed;
    J steps = J::array();
    for (const auto& st : tr.steps) {
        J js;
        js["ee"] = {st.ee.x, st.ee.y};
        js["action"] = {st.action.x, st.action.y};
        js["reward"] = {{"uncover", st.reward.uncover},
                        {"heap_move_penalty", st.reward.heap_move_penalty},
                        {"target_move_penalty", st.reward.target_move_penalty},
                        {"workspace_penalty", st.reward.workspace_penalty},
                        {"idleness_penalty", st.reward.idleness_penalty},
                        {"total", st.reward.total},
                        {"c", st.reward.c},
                        {"m_t", st.reward.m_t},
                        {"sum_m_o", st.reward.sum_m_o}};
        js["visibility"] = st.visibility;
        J objs = J::array();
        for (auto p : st.objects) objs.push_back({p.x, p.y});
        js["objects"] = std::move(objs);
        steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
    j["graspability"] = {{"initial", tr.graspability_initial}, {"final", tr.graspability_final}};
    j["termination"] = tr.termination;
    return j;
}

inline void save_trace(const EpisodeTrace& tr, const std::string& path, const std::string& config_hash = "")
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write trace " + path);
    out << trace_to_json(tr, config_hash).dump(1) << "\n";
}

// ---- summaries ----------------------------------------------------------------

struct EpisodeMetrics {
    int heap_id = 0;
    std::uint64_t seed = 0;
    double reward = 0.0;
    double visibility_change = 0.0;
    double steps = 0.0;
    double graspability_change = 0.0;
    double heap_disturbance = 0.0;

    auto key() const { return std::tie(heap_id, seed, reward, visibility_change, steps, graspability_change, heap_disturbance); }
};

inline EpisodeMetrics metrics(const EpisodeTrace& tr)
{
    return {tr.heap_id,          tr.seed, tr.total_reward(), tr.visibility_change(), static_cast<double>(tr.step_count()),
            tr.graspability_change(), tr.heap_disturbance()};
}

struct MetricMeans {
    double reward = 0.0;
    double visibility_change = 0.0;
    double steps = 0.0;
    double graspability_change = 0.0;
    double heap_disturbance = 0.0;
    int episodes = 0;
};

struct EvalSummary {
    std::map<int, MetricMeans> per_heap;
    MetricMeans aggregate; ///< mean of the per-heap means
    std::vector<std::uint64_t> seeds;
};

/// Order-independent: metrics are sorted before any floating-point sums.
inline EvalSummary summarize(const std::vector<EpisodeMetrics>& episodes)
{
    if (episodes.empty()) throw logic_error("summarize needs at least one trace");
    auto sorted = episodes;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });

    EvalSummary out;
    auto add = [](MetricMeans& m, double r, double v, double s, double g, double d) {
        m.reward += r;
        m.visibility_change += v;
        m.steps += s;
        m.graspability_change += g;
        m.heap_disturbance += d;
        ++m.episodes;
    };
    auto finish = [](MetricMeans& m) {
        const double n = m.episodes;
        m.reward /= n;
        m.visibility_change /= n;
        m.steps /= n;
        m.graspability_change /= n;
        m.heap_disturbance /= n;
    };
    for (const auto& e : sorted) {
        add(out.per_heap[e.heap_id], e.reward, e.visibility_change, e.steps, e.graspability_change, e.heap_disturbance);
        out.seeds.push_back(e.seed);
    }
    for (auto& [id, m] : out.per_heap) {
        finish(m);
        add(out.aggregate, m.reward, m.visibility_change, m.steps, m.graspability_change, m.heap_disturbance);
    }
    const int total = static_cast<int>(sorted.size());
    finish(out.aggregate);
    out.aggregate.episodes = total;
    std::sort(out.seeds.begin(), out.seeds.end());
    out.seeds.erase(std::unique(out.seeds.begin(), out.seeds.end()), out.seeds.end());
    return out;
}

inline EvalSummary summarize(const std::vector<EpisodeTrace>& traces)
{
    std::vector<EpisodeMetrics> m;
    for (const auto& t : traces) m.push_back(metrics(t));
    return summarize(m);
}

inline const char* kMetricsHeader =
    "step,mean_reward,mean_visibility_change,mean_steps,mean_graspability_change,mean_heap_disturbance,actor_fraction,"
    "wall_seconds";

inline std::string metrics_row(std::int64_t step, const MetricMeans& m, double actor_fraction, double wall_seconds)
{
    std::ostringstream out;
    out << step << ',' << fmt_num(m.reward, 9) << ',' << fmt_num(m.visibility_change, 9) << ',' << fmt_num(m.steps, 9)
        << ',' << fmt_num(m.graspability_change, 9) << ',' << fmt_num(m.heap_disturbance, 9) << ','
        << fmt_num(actor_fraction, 9) << ',' << fmt_num(wall_seconds, 6);
    return out.str();
}

struct EpisodeJob {
    const HeapSpec* heap = nullptr;
    std::uint64_t seed = 0;
};

/// Runs every job, in parallel when jobs > 1; results are in job order.
inline std::vector<EpisodeTrace> run_episodes(const Policy& policy, const std::vector<EpisodeJob>& work,
                                              const RolloutSettings& rs = {}, int jobs = 1)
{
    std::vector<EpisodeTrace> out(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    auto run = [&](std::size_t i) {
        try {
            out[i] = rollout(policy, *work[i].heap, work[i].seed, rs);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const auto n = static_cast<std::size_t>(std::max(1, jobs));
    if (n == 1 || work.size() < 2) {
        for (std::size_t i = 0; i < work.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(n, work.size()); ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < work.size();) run(i);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace vmms
