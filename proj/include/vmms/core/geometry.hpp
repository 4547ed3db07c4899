#pragma once

#include <algorithm>
#include <cmath>

namespace vmms {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
    constexpr Vec2 operator/(double k) const { return {x / k, y / k}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;

    constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    constexpr double norm2() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm2()); }
    double norm_inf() const { return std::max(std::abs(x), std::abs(y)); }
};

constexpr Vec2 operator*(double k, Vec2 v) { return v * k; }

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Axis-aligned rectangle [0, w] x [0, h]; the table workspace.
struct Rect {
    double w = 0.6;
    double h = 0.6;

    constexpr Vec2 center() const { return {0.5 * w, 0.5 * h}; }
    constexpr bool contains(Vec2 p, double margin = 0.0) const
    {
        return p.x >= margin && p.x <= w - margin && p.y >= margin && p.y <= h - margin;
    }
    Vec2 clamp(Vec2 p, double margin = 0.0) const
    {
        return {std::clamp(p.x, margin, w - margin), std::clamp(p.y, margin, h - margin)};
    }
    constexpr bool operator==(const Rect&) const = default;
};

} // namespace vmms
