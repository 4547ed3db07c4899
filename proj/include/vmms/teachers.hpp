#pragma once

// Scripted pushing teachers. They read the true target position and propose
// one action per step by following a waypoint plan.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "world.hpp"

namespace vmms {

enum class TeacherKind { straight, zigzag, spiral };

inline constexpr std::array<TeacherKind, 3> kAllTeachers{TeacherKind::straight, TeacherKind::zigzag,
                                                         TeacherKind::spiral};

inline std::string to_string(TeacherKind k)
{
    switch (k) {
    case TeacherKind::straight: return "straight";
    case TeacherKind::zigzag: return "zigzag";
    case TeacherKind::spiral: return "spiral";
    }
    return "?";
}

inline TeacherKind parse_teacher(const std::string& s)
{
    for (auto k : kAllTeachers)
        if (to_string(k) == s) return k;
    throw usage_error("unknown teacher '" + s + "' (expected straight|zigzag|spiral)");
}

struct TeacherParams {
    double overshoot = 0.10; ///< push continues this far past the target center
    double zigzag_amplitude = 0.02;
    double zigzag_period = 0.04;
    double spiral_pitch = 0.006; ///< meters of radius per radian
    double spiral_max_radius = 0.12;
    double max_segment = 0.05;
    double arrive_tolerance = 1e-3;
    double max_action = 0.05;
};

struct TeacherPlan {
    TeacherKind kind = TeacherKind::straight;
    std::vector<Vec2> waypoints;
    std::size_t cursor = 0;
    TeacherParams params{};
};

namespace detail {

/// Points strictly after `from` up to and including `to`, spaced at most `max_seg` apart.
inline void append_segment(std::vector<Vec2>& out, Vec2 from, Vec2 to, double max_seg)
{
    const double len = (to - from).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / max_seg - 1e-9)));
    for (int k = 1; k <= n; ++k) out.push_back(from + (to - from) * (static_cast<double>(k) / n));
}

inline void clip_to(std::vector<Vec2>& pts, const Rect& ws)
{
    for (auto& p : pts) p = ws.clamp(p);
}

/// Symmetric triangle wave: 0 at s=0, +amp at period/4, 0 at period/2, -amp at 3*period/4.
inline double triangle(double s, double amp, double period)
{
    double ph = std::fmod(s / period, 1.0);
    if (ph < 0) ph += 1.0;
    if (ph < 0.25) return amp * 4.0 * ph;
    if (ph < 0.75) return amp * (2.0 - 4.0 * ph);
    return amp * (4.0 * ph - 4.0);
}

} // namespace detail

inline TeacherPlan plan_straight(const WorldState& s, double theta, const TeacherParams& p = {})
{
    TeacherPlan plan{TeacherKind::straight, {}, 0, p};
    const Vec2 t = s.target().center;
    const Vec2 u = unit(theta);
    const Vec2 start = t - u * p.overshoot;
    const Vec2 end = t + u * p.overshoot;
    detail::append_segment(plan.waypoints, s.ee, start, p.max_segment);
    detail::append_segment(plan.waypoints, start, end, p.max_segment);
    detail::clip_to(plan.waypoints, s.workspace);
    return plan;
}

inline TeacherPlan plan_zigzag(const WorldState& s, double theta, const TeacherParams& p = {})
{
    TeacherPlan plan{TeacherKind::zigzag, {}, 0, p};
    const Vec2 t = s.target().center;
    const Vec2 u = unit(theta);
    const Vec2 lateral{-u.y, u.x};
    const Vec2 start = t - u * p.overshoot;
    detail::append_segment(plan.waypoints, s.ee, start, p.max_segment);
    const double chord = 2.0 * p.overshoot;
    const double ds = std::min(p.zigzag_period / 4.0, p.max_segment);
    const int n = static_cast<int>(std::ceil(chord / ds - 1e-9));
    for (int k = 1; k <= n; ++k) {
        const double along = std::min(chord, k * ds);
        plan.waypoints.push_back(start + u * along +
                                 lateral * detail::triangle(along, p.zigzag_amplitude, p.zigzag_period));
    }
    detail::clip_to(plan.waypoints, s.workspace);
    return plan;
}

/// Approach the target center, then follow r(phi) = pitch * phi out to the maximum radius.
inline TeacherPlan plan_spiral(const WorldState& s, double phase, int direction, const TeacherParams& p = {})
{
    TeacherPlan plan{TeacherKind::spiral, {}, 0, p};
    const Vec2 t = s.target().center;
    detail::append_segment(plan.waypoints, s.ee, t, p.max_segment);
    const double phi_max = p.spiral_max_radius / p.spiral_pitch;
    double phi = 0.0;
    Vec2 prev = t;
    while (phi < phi_max) {
        const double r = p.spiral_pitch * phi;
        const double dphi = std::min(0.5, 0.02 / std::hypot(p.spiral_pitch, r));
        phi = std::min(phi_max, phi + dphi);
        const Vec2 q = t + unit(phase + direction * phi) * (p.spiral_pitch * phi);
        detail::append_segment(plan.waypoints, prev, q, p.max_segment);
        prev = q;
    }
    detail::clip_to(plan.waypoints, s.workspace);
    return plan;
}

inline TeacherPlan plan(TeacherKind kind, const WorldState& s, Rng& rng, const TeacherParams& p = {})
{
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    switch (kind) {
    case TeacherKind::straight: return plan_straight(s, angle, p);
    case TeacherKind::zigzag: return plan_zigzag(s, angle, p);
    case TeacherKind::spiral: return plan_spiral(s, angle, rng.uniform() < 0.5 ? 1 : -1, p);
    }
    throw logic_error("unreachable teacher kind");
}

/// Step toward the current waypoint, scaled so that |action|_inf <= max_action.
/// Replans (same kind, fresh randomness) once every waypoint has been reached.
inline std::pair<Action, TeacherPlan> next_action(TeacherPlan tp, const WorldState& s, Rng& rng)
{
    const auto& p = tp.params;
    auto skip_reached = [&] {
        while (tp.cursor < tp.waypoints.size() && (tp.waypoints[tp.cursor] - s.ee).norm() <= p.arrive_tolerance)
            ++tp.cursor;
    };
    skip_reached();
    if (tp.cursor >= tp.waypoints.size()) {
        tp = plan(tp.kind, s, rng, p);
        skip_reached();
        if (tp.cursor >= tp.waypoints.size()) return {Action{}, tp};
    }
    const Vec2 d = tp.waypoints[tp.cursor] - s.ee;
    const double inf = d.norm_inf();
    const double scale = inf > p.max_action ? p.max_action / inf : 1.0;
    return {Action{d * scale}, tp};
}

/// A teacher bound to one rng stream; owns its plan for the current episode.
class Teacher {
public:
    Teacher(TeacherKind kind, std::uint64_t seed, TeacherParams params = {})
        : kind_(kind), params_(params), rng_(seed)
    {
    }

    TeacherKind kind() const { return kind_; }

    void begin_episode(const WorldState& s) { plan_ = plan(kind_, s, rng_, params_); }

    Action propose(const WorldState& s)
    {
        auto [a, next] = next_action(std::move(plan_), s, rng_);
        plan_ = std::move(next);
        return a;
    }

    const TeacherPlan& current_plan() const { return plan_; }

private:
    TeacherKind kind_;
    TeacherParams params_;
    Rng rng_;
    TeacherPlan plan_{};
};

} // namespace vmms
