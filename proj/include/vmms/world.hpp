#pragma once

// Deterministic 2D quasi-static pushing world.
//
// Objects are discs resting on a table; overlapping discs are stacked, the
// one with the higher z_rank on top. The end effector is a disc moving in the
// table plane that collides with every object. Planar overlap between stacked
// objects is allowed, but a push can never deepen an existing overlap or
// create a new one: those are resolved by position projection.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/rng.hpp"

namespace vmms {

struct ObjectDisc {
    int id = 0;
    Vec2 center;
    double radius = 0.03;
    int z_rank = 0;
    double height = 0.0; ///< top height in meters, derived from z_rank

    bool operator==(const ObjectDisc&) const = default;
};

struct RewardParams {
    double uncover_gain = 2.5;
    double heap_gate = 0.05; ///< heap penalty only when c is below this
    double heap_weight = 75.0;
    double target_weight = 75.0;
    double workspace_penalty = 0.5;
    double idleness_penalty = 0.5;
    double min_occlusion = 1e-6;
};

struct WorldParams {
    Rect workspace{};
    double ee_radius = 0.01;
    int max_steps = 50;
    double max_action = 0.05;
    double substep = 0.005;
    int projection_iterations = 16;
    double overlap_tolerance = 1e-4;
    double ee_overlap_tolerance = 1e-6;
    double visible_threshold = 0.99;
    double min_start_distance = 0.2;
    int start_samples = 1000;
    double layer_height = 0.01;
    RewardParams reward{};
};

struct WorldState {
    std::vector<ObjectDisc> objects;
    int target_id = 0;
    Vec2 ee;
    double ee_radius = 0.01;
    Rect workspace{};
    int step_count = 0;
    bool done = false;

    const ObjectDisc& object(int id) const
    {
        for (const auto& o : objects)
            if (o.id == id) return o;
        throw data_error("no such object: " + std::to_string(id));
    }
    const ObjectDisc& target() const { return object(target_id); }

    bool operator==(const WorldState&) const = default;
};

struct Action {
    Vec2 delta;

    /// Box-clamps each component to [-limit, limit].
    static Action clamped(Vec2 d, double limit = 0.05)
    {
        return {{std::clamp(d.x, -limit, limit), std::clamp(d.y, -limit, limit)}};
    }
};

struct RewardBreakdown {
    double uncover = 0.0;
    double heap_move_penalty = 0.0;
    double target_move_penalty = 0.0;
    double workspace_penalty = 0.0;
    double idleness_penalty = 0.0;
    double total = 0.0;
    double c = 0.0;       ///< relative occlusion change
    double m_t = 0.0;     ///< target displacement, meters
    double sum_m_o = 0.0; ///< summed non-target displacement, meters
};

struct StepResult {
    WorldState state;
    RewardBreakdown reward;
    bool done = false;
    bool clamped = false;
};

namespace detail {

inline constexpr int kLattice = 21;

/// 21x21 lattice over [-1,1]^2 clipped to the unit disc. The lattice is
/// offset from the disc center by golden-ratio fractions of a cell so that
/// lattice points do not cluster on common radii (concentric occluders would
/// otherwise flip whole rings of points at once).
inline const std::vector<Vec2>& unit_disc_lattice()
{
    static const std::vector<Vec2> pts = [] {
        constexpr double off_x = 0.3819660112501051;
        constexpr double off_y = 0.6180339887498949;
        std::vector<Vec2> out;
        for (int i = 0; i < kLattice; ++i)
            for (int j = 0; j < kLattice; ++j) {
                const Vec2 u{2.0 * (j + off_x) / kLattice - 1.0, 2.0 * (i + off_y) / kLattice - 1.0};
                if (u.norm2() <= 1.0) out.push_back(u);
            }
        return out;
    }();
    return pts;
}

inline bool covers(const ObjectDisc& d, Vec2 p) { return (p - d.center).norm2() <= d.radius * d.radius; }

inline double overlap_depth(Vec2 a, double ra, Vec2 b, double rb) { return ra + rb - (a - b).norm(); }

} // namespace detail

inline double visibility(const WorldState& s, int object_id)
{
    const ObjectDisc& o = s.object(object_id);
    std::array<const ObjectDisc*, 64> occluders_buf{};
    std::vector<const ObjectDisc*> occluders_heap;
    std::size_t n_occ = 0;
    for (const auto& other : s.objects) {
        if (other.z_rank <= o.z_rank) continue;
        if ((other.center - o.center).norm() >= other.radius + o.radius) continue;
        if (n_occ < occluders_buf.size()) {
            occluders_buf[n_occ++] = &other;
        } else {
            occluders_heap.push_back(&other);
        }
    }
    if (n_occ == 0) return 1.0;

    const auto& lattice = detail::unit_disc_lattice();
    std::size_t visible = 0;
    for (Vec2 u : lattice) {
        const Vec2 p = o.center + u * o.radius;
        bool hidden = false;
        for (std::size_t k = 0; k < n_occ && !hidden; ++k) hidden = detail::covers(*occluders_buf[k], p);
        for (const auto* d : occluders_heap) {
            if (hidden) break;
            hidden = detail::covers(*d, p);
        }
        if (!hidden) ++visible;
    }
    return static_cast<double>(visible) / static_cast<double>(lattice.size());
}

inline double occlusion(const WorldState& s, int object_id) { return 1.0 - visibility(s, object_id); }

/// Reward assembly from the measured step quantities.
inline RewardBreakdown assemble_reward(double c, double m_t, double sum_m_o, int n_others, bool clamped,
                                       const RewardParams& p = {})
{
    RewardBreakdown r;
    r.c = c;
    r.m_t = m_t;
    r.sum_m_o = sum_m_o;
    r.uncover = p.uncover_gain * c;
    if (c < p.heap_gate && n_others > 0) r.heap_move_penalty = -(p.heap_weight / n_others) * sum_m_o;
    r.target_move_penalty = -p.target_weight * m_t;
    r.workspace_penalty = clamped ? -p.workspace_penalty : 0.0;
    r.idleness_penalty = -p.idleness_penalty;
    r.total = r.uncover + r.heap_move_penalty + r.target_move_penalty + r.workspace_penalty + r.idleness_penalty;
    return r;
}

/// Reward for the transition prev -> next. Objects are matched by position in the list.
inline RewardBreakdown compute_reward(const WorldState& prev, const WorldState& next, bool clamped,
                                      const RewardParams& p = {})
{
    const double occ_prev = occlusion(prev, prev.target_id);
    const double occ_next = occlusion(next, next.target_id);
    const double c = occ_prev < p.min_occlusion ? 0.0 : (occ_prev - occ_next) / occ_prev;

    double m_t = 0.0;
    double sum_m_o = 0.0;
    int n_others = 0;
    for (std::size_t i = 0; i < prev.objects.size(); ++i) {
        const double m = (next.objects[i].center - prev.objects[i].center).norm();
        if (prev.objects[i].id == prev.target_id) {
            m_t = m;
        } else {
            sum_m_o += m;
            ++n_others;
        }
    }
    return assemble_reward(c, m_t, sum_m_o, n_others, clamped, p);
}

namespace detail {

struct PushOutcome {
    WorldState state;
    double max_pair_excess = 0.0;
    double max_ee_overlap = 0.0;
    double max_displacement = 0.0;
};

inline PushOutcome project_push(const WorldState& before, Vec2 ee_target, const WorldParams& params)
{
    PushOutcome out{before, 0.0, 0.0, 0.0};
    WorldState& s = out.state;
    auto& objs = s.objects;
    const std::size_t n = objs.size();
    const Rect& ws = s.workspace;

    std::vector<double> allowed(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            allowed[i * n + j] = std::max(0.0, overlap_depth(objs[i].center, objs[i].radius, objs[j].center, objs[j].radius));

    Vec2 push_dir = ee_target - before.ee;
    push_dir = push_dir.norm2() > 0.0 ? push_dir / push_dir.norm() : Vec2{1.0, 0.0};
    s.ee = ee_target;

    std::vector<char> moved(n, 0);
    auto resolve_ee = [&] {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double reach = s.ee_radius + objs[i].radius;
            const Vec2 off = objs[i].center - s.ee;
            if (off.norm2() >= reach * reach) continue;
            const double d = off.norm();
            const Vec2 normal = d > 1e-12 ? off / d : push_dir;
            objs[i].center = ws.clamp(s.ee + normal * reach);
            moved[i] = 1;
            any = true;
        }
        return any;
    };

    resolve_ee();
    for (int iter = 0; iter < params.projection_iterations; ++iter) {
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!moved[i] && !moved[j]) continue;
                const double excess =
                    overlap_depth(objs[i].center, objs[i].radius, objs[j].center, objs[j].radius) - allowed[i * n + j];
                if (excess <= 1e-12) continue;
                const Vec2 off = objs[j].center - objs[i].center;
                const double d = off.norm();
                const Vec2 normal = d > 1e-12 ? off / d : push_dir;
                if (moved[i] && !moved[j]) {
                    objs[j].center = ws.clamp(objs[j].center + normal * excess);
                    moved[j] = 1;
                } else if (moved[j] && !moved[i]) {
                    objs[i].center = ws.clamp(objs[i].center - normal * excess);
                    moved[i] = 1;
                } else {
                    objs[i].center = ws.clamp(objs[i].center - normal * (0.5 * excess));
                    objs[j].center = ws.clamp(objs[j].center + normal * (0.5 * excess));
                }
                any = true;
            }
        }
        any = resolve_ee() || any;
        if (!any) break;
    }

    for (std::size_t i = 0; i < n; ++i) {
        out.max_ee_overlap =
            std::max(out.max_ee_overlap, overlap_depth(s.ee, s.ee_radius, objs[i].center, objs[i].radius));
        out.max_displacement = std::max(out.max_displacement, (objs[i].center - before.objects[i].center).norm());
        for (std::size_t j = i + 1; j < n; ++j)
            out.max_pair_excess = std::max(
                out.max_pair_excess,
                overlap_depth(objs[i].center, objs[i].radius, objs[j].center, objs[j].radius) - allowed[i * n + j]);
    }
    return out;
}

} // namespace detail

/// Moves the end effector to `ee_target` (at most one substep away) and
/// resolves contacts. When the push is blocked (an object jammed against the
/// workspace edge), the end effector advances only as far as the contacts
/// allow.
inline WorldState resolve_push(const WorldState& state, Vec2 ee_target, const WorldParams& params = {})
{
    const double step_len = (ee_target - state.ee).norm();
    auto valid = [&](const detail::PushOutcome& o, double len) {
        return o.max_ee_overlap <= params.ee_overlap_tolerance && o.max_pair_excess <= params.overlap_tolerance &&
               o.max_displacement <= len + params.overlap_tolerance;
    };

    auto full = detail::project_push(state, ee_target, params);
    if (valid(full, step_len)) return std::move(full.state);

    // Bisect on the fraction of the substep that can be executed.
    double lo = 0.0;
    double hi = 1.0;
    WorldState best = state;
    for (int k = 0; k < 20; ++k) {
        const double mid = 0.5 * (lo + hi);
        auto trial = detail::project_push(state, state.ee + (ee_target - state.ee) * mid, params);
        if (valid(trial, step_len * mid)) {
            lo = mid;
            best = std::move(trial.state);
        } else {
            hi = mid;
        }
    }
    return best;
}

/// Advances the episode by one action.
inline StepResult step(const WorldState& state, const Action& action, const WorldParams& params = {})
{
    if (state.done) throw logic_error("episode finished");

    const Action a = Action::clamped(action.delta, params.max_action);
    const Vec2 wanted = state.ee + a.delta;
    const Vec2 goal = state.workspace.clamp(wanted);
    const bool clamped = !(goal == wanted);

    StepResult r{state, {}, false, clamped};
    const Vec2 travel = goal - state.ee;
    const int n_sub = std::max(1, static_cast<int>(std::ceil(travel.norm() / params.substep - 1e-9)));
    const Vec2 sub = travel / static_cast<double>(n_sub);
    for (int k = 0; k < n_sub; ++k) {
        const Vec2 next_ee = (k + 1 == n_sub) ? goal : r.state.ee + sub;
        r.state = resolve_push(r.state, next_ee, params);
    }

    r.reward = compute_reward(state, r.state, clamped, params.reward);
    r.state.step_count = state.step_count + 1;
    r.done = visibility(r.state, r.state.target_id) >= params.visible_threshold ||
             r.state.step_count >= params.max_steps;
    r.state.done = r.done;
    return r;
}

/// Starts an episode on the given object layout. The end effector is placed
/// by rejection sampling at least `min_start_distance` from the target and
/// clear of every object.
inline WorldState reset(std::span<const ObjectDisc> objects, int target_id, Rng& rng, const WorldParams& params = {})
{
    WorldState s;
    s.objects.assign(objects.begin(), objects.end());
    for (auto& o : s.objects) o.height = params.layer_height * (o.z_rank + 1);
    s.target_id = target_id;
    s.ee_radius = params.ee_radius;
    s.workspace = params.workspace;
    const Vec2 target = s.target().center;

    for (int k = 0; k < params.start_samples; ++k) {
        const Vec2 p{rng.uniform(0.0, s.workspace.w), rng.uniform(0.0, s.workspace.h)};
        if ((p - target).norm() < params.min_start_distance) continue;
        bool clear = true;
        for (const auto& o : s.objects)
            if ((p - o.center).norm() < o.radius + s.ee_radius) {
                clear = false;
                break;
            }
        if (!clear) continue;
        s.ee = p;
        return s;
    }
    throw data_error("workspace too small");
}

} // namespace vmms
