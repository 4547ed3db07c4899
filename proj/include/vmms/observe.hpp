#pragma once

// Actor observation (height grid, target-masked position grid, pose) and the
// critic's privileged low-dimensional state.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "core/error.hpp"
#include "world.hpp"

namespace vmms {

struct ObserveParams {
    int grid = 32;
    int max_objects = 20;
    double height_scale = 0.1;
    bool zero_position_channels = false; ///< drops the offset channels, keeps the mask
};

/// Grids are row-major with row index along y; the position image is
/// channel-major (3 x G x G): dx, dy, mask.
struct Observation {
    int grid = 0;
    std::vector<double> height;
    std::vector<double> position;
    Vec2 ee_pose;

    double& pos(int channel, int row, int col)
    {
        return position[static_cast<std::size_t>((channel * grid + row) * grid + col)];
    }
    double pos(int channel, int row, int col) const
    {
        return position[static_cast<std::size_t>((channel * grid + row) * grid + col)];
    }
    double h(int row, int col) const { return height[static_cast<std::size_t>(row * grid + col)]; }

    bool operator==(const Observation&) const = default;
};

struct PrivilegedState {
    Vec2 target_rel;
    std::vector<double> others_rel; ///< 2*M entries, nearest-first, zero padded
    Vec2 ee_pose;

    bool operator==(const PrivilegedState&) const = default;
};

inline Vec2 normalized_pose(Vec2 ee, const Rect& ws) { return {2.0 * ee.x / ws.w - 1.0, 2.0 * ee.y / ws.h - 1.0}; }

inline Vec2 cell_center(const Rect& ws, int grid, int row, int col)
{
    return {(col + 0.5) * ws.w / grid, (row + 0.5) * ws.h / grid};
}

inline Observation render(const WorldState& s, const ObserveParams& p = {})
{
    const int g = p.grid;
    Observation obs;
    obs.grid = g;
    obs.height.assign(static_cast<std::size_t>(g * g), 0.0);
    obs.position.assign(static_cast<std::size_t>(3 * g * g), 0.0);
    obs.ee_pose = normalized_pose(s.ee, s.workspace);

    for (int row = 0; row < g; ++row) {
        for (int col = 0; col < g; ++col) {
            const Vec2 c = cell_center(s.workspace, g, row, col);
            const ObjectDisc* top = nullptr;
            for (const auto& o : s.objects)
                if (detail::covers(o, c) && (!top || o.z_rank > top->z_rank)) top = &o;
            if (!top) continue;
            obs.height[static_cast<std::size_t>(row * g + col)] = top->height / p.height_scale;
            if (top->id != s.target_id) continue;
            if (!p.zero_position_channels) {
                obs.pos(0, row, col) = c.x - s.ee.x;
                obs.pos(1, row, col) = c.y - s.ee.y;
            }
            obs.pos(2, row, col) = 1.0;
        }
    }
    return obs;
}

inline PrivilegedState privileged(const WorldState& s, const ObserveParams& p = {})
{
    if (static_cast<int>(s.objects.size()) > p.max_objects) throw data_error("exceeds max_objects");
    PrivilegedState out;
    out.target_rel = s.target().center - s.ee;
    out.ee_pose = normalized_pose(s.ee, s.workspace);

    std::vector<Vec2> rel;
    rel.reserve(s.objects.size());
    for (const auto& o : s.objects)
        if (o.id != s.target_id) rel.push_back(o.center - s.ee);
    // Ties on distance fall back to coordinates so the order is canonical.
    std::sort(rel.begin(), rel.end(), [](Vec2 a, Vec2 b) {
        const double da = a.norm2(), db = b.norm2();
        if (da != db) return da < db;
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    });
    out.others_rel.assign(static_cast<std::size_t>(2 * p.max_objects), 0.0);
    for (std::size_t i = 0; i < rel.size(); ++i) {
        out.others_rel[2 * i] = rel[i].x;
        out.others_rel[2 * i + 1] = rel[i].y;
    }
    return out;
}

} // namespace vmms
