#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "vmms/heapgen.hpp"
#include "vmms/world.hpp"

namespace vmms::testing {

/// Visible fraction of disc (c1, r1) under an occluding disc (c2, r2), from
/// the circle-circle intersection area.
inline double lens_visibility(double r1, double r2, double d)
{
    const double pi = std::numbers::pi;
    if (d >= r1 + r2) return 1.0;
    if (d <= std::abs(r1 - r2)) return r2 >= r1 ? 0.0 : 1.0 - (r2 * r2) / (r1 * r1);
    const double a1 = r1 * r1 * std::acos((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1));
    const double a2 = r2 * r2 * std::acos((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2));
    const double k = 0.5 * std::sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2));
    return 1.0 - (a1 + a2 - k) / (pi * r1 * r1);
}

inline WorldState make_state(std::vector<ObjectDisc> objects, int target_id, Vec2 ee, double ee_radius = 0.01)
{
    WorldState s;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        objects[i].id = static_cast<int>(i);
        if (objects[i].height == 0.0) objects[i].height = 0.01 * (objects[i].z_rank + 1);
    }
    s.objects = std::move(objects);
    s.target_id = target_id;
    s.ee = ee;
    s.ee_radius = ee_radius;
    return s;
}

inline ObjectDisc disc(double x, double y, double r, int z) { return {0, {x, y}, r, z, 0.0}; }

/// A small accepted single heap drawn from `rng`.
inline HeapSpec random_heap(Rng& rng, int n = 5)
{
    GeneratorConfig cfg;
    for (;;)
        if (auto h = generate_heap(HeapMode::single, {n, n}, rng, cfg)) return *h;
}

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace vmms::testing
