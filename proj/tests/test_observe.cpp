#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "support.hpp"
#include "vmms/observe.hpp"

using namespace vmms;
using vmms::testing::disc;
using vmms::testing::make_state;

TEST(Render, TargetCellsCarryOffsetsFromEndEffector)
{
    // Cell (row 15, col 15) has center (0.290625, 0.290625); place the target there.
    const Vec2 c = cell_center(Rect{}, 32, 15, 15);
    auto s = make_state({disc(c.x, c.y, 0.03, 0)}, 0, {0.1, 0.1});
    const auto obs = render(s);
    EXPECT_DOUBLE_EQ(obs.pos(0, 15, 15), c.x - 0.1);
    EXPECT_DOUBLE_EQ(obs.pos(1, 15, 15), c.y - 0.1);
    EXPECT_EQ(obs.pos(2, 15, 15), 1.0);
}

TEST(Render, CellCenterOffsetExample)
{
    // A 3x3 grid on the 0.6 m table puts cell (1, 1) at (0.3, 0.3).
    ObserveParams p;
    p.grid = 3;
    auto s = make_state({disc(0.3, 0.3, 0.03, 0)}, 0, {0.1, 0.1});
    const auto obs = render(s, p);
    EXPECT_NEAR(obs.pos(0, 1, 1), 0.2, 1e-15);
    EXPECT_NEAR(obs.pos(1, 1, 1), 0.2, 1e-15);
    EXPECT_EQ(obs.pos(2, 1, 1), 1.0);
}

TEST(Render, FullyCoveredTargetHasEmptyMask)
{
    auto s = make_state({disc(0.3, 0.3, 0.03, 0), disc(0.3, 0.3, 0.035, 1)}, 0, {0.1, 0.1});
    const auto obs = render(s);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) EXPECT_EQ(obs.pos(2, r, c), 0.0);
}

TEST(Render, MaskCountMatchesEnumeration)
{
    const Vec2 center{0.3, 0.3};
    const double radius = 0.03;
    auto s = make_state({disc(center.x, center.y, radius, 0)}, 0, {0.05, 0.05});
    const auto obs = render(s);
    int mask = 0;
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) mask += obs.pos(2, r, c) > 0.5;

    int enumerated = 0;
    const double w = 0.6 / 32;
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            const double dx = (c + 0.5) * w - center.x, dy = (r + 0.5) * w - center.y;
            if (dx * dx + dy * dy <= radius * radius) ++enumerated;
        }
    EXPECT_EQ(mask, enumerated);
    const double area_cells = std::numbers::pi * radius * radius * 32 * 32 / (0.6 * 0.6);
    EXPECT_NEAR(mask, area_cells, 4.0);
}

TEST(Render, ChannelsZeroOutsideMaskAndHeightsFromTopDisc)
{
    Rng rng(4);
    const auto heap = vmms::testing::random_heap(rng, 10);
    const auto s = reset(heap, rng);
    const auto obs = render(s);
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            if (obs.pos(2, r, c) == 0.0) {
                EXPECT_EQ(obs.pos(0, r, c), 0.0);
                EXPECT_EQ(obs.pos(1, r, c), 0.0);
            }
            const Vec2 p = cell_center(s.workspace, 32, r, c);
            double top = 0.0;
            int top_z = -1;
            for (const auto& o : s.objects)
                if ((p - o.center).norm2() <= o.radius * o.radius && o.z_rank > top_z) {
                    top_z = o.z_rank;
                    top = o.height;
                }
            EXPECT_DOUBLE_EQ(obs.h(r, c), top / 0.1);
        }
    EXPECT_EQ(render(s), obs);
}

TEST(Render, ZeroPositionChannelsKeepsMask)
{
    auto s = make_state({disc(0.3, 0.3, 0.03, 0)}, 0, {0.1, 0.1});
    ObserveParams p;
    p.zero_position_channels = true;
    const auto obs = render(s, p);
    const auto full = render(s);
    EXPECT_EQ(std::count(obs.position.begin(), obs.position.begin() + 2 * 32 * 32, 0.0), 2 * 32 * 32);
    EXPECT_TRUE(std::equal(obs.position.begin() + 2 * 32 * 32, obs.position.end(), full.position.begin() + 2 * 32 * 32));
}

TEST(Render, MaskFractionTracksVisibility)
{
    // A fine grid keeps the cell quantization well below the tolerance.
    ObserveParams p;
    p.grid = 128;
    const double cell = 0.6 / p.grid;
    Rng rng(12);
    for (int k = 0; k < 200; ++k) {
        const double r = rng.uniform(0.02, 0.06);
        const double d = rng.uniform(0.0, 0.08);
        const double a = rng.uniform(0.0, 2 * std::numbers::pi);
        auto s = make_state({disc(0.3, 0.3, r, 0), disc(0.3 + d * std::cos(a), 0.3 + d * std::sin(a), 0.03, 1)}, 0,
                            {0.05, 0.05});
        const auto obs = render(s, p);
        int mask = 0, covered = 0;
        for (int row = 0; row < p.grid; ++row)
            for (int col = 0; col < p.grid; ++col) {
                mask += obs.pos(2, row, col) > 0.5;
                covered += (cell_center(s.workspace, p.grid, row, col) - Vec2{0.3, 0.3}).norm2() <= r * r;
            }
        ASSERT_GT(covered, 0) << cell;
        EXPECT_NEAR(static_cast<double>(mask) / covered, visibility(s, 0), 0.05) << "r=" << r << " d=" << d;
    }
}

TEST(Privileged, TargetRelativeAndPose)
{
    auto s = make_state({disc(0.3, 0.3, 0.03, 0)}, 0, {0.3, 0.3});
    const auto p = privileged(s);
    EXPECT_EQ(p.target_rel, (Vec2{0.0, 0.0}));
    EXPECT_EQ(p.ee_pose, (Vec2{0.0, 0.0}));
}

TEST(Privileged, PaddingWithZeros)
{
    auto s = make_state({disc(0.3, 0.3, 0.03, 0), disc(0.1, 0.1, 0.02, 1), disc(0.5, 0.1, 0.02, 2),
                         disc(0.1, 0.5, 0.02, 3)},
                        0, {0.3, 0.35});
    const auto p = privileged(s);
    ASSERT_EQ(p.others_rel.size(), 40u);
    EXPECT_EQ(std::count(p.others_rel.begin() + 6, p.others_rel.end(), 0.0), 34);
    for (int i = 0; i < 6; ++i) EXPECT_NE(p.others_rel[static_cast<std::size_t>(i)], 0.0);
}

TEST(Privileged, NearestFirst)
{
    auto s = make_state({disc(0.3, 0.3, 0.03, 0), disc(0.2, 0.1, 0.02, 1), disc(0.15, 0.1, 0.02, 2)}, 0, {0.1, 0.1});
    const auto p = privileged(s);
    EXPECT_NEAR(p.others_rel[0], 0.05, 1e-15);
    EXPECT_NEAR(p.others_rel[2], 0.1, 1e-15);
}

TEST(Privileged, PermutationInvariant)
{
    Rng rng(6);
    const auto heap = vmms::testing::random_heap(rng, 10);
    const auto s = reset(heap, rng);
    auto shuffled = s;
    std::reverse(shuffled.objects.begin(), shuffled.objects.end());
    EXPECT_EQ(privileged(s), privileged(shuffled));
}

TEST(Privileged, TooManyObjects)
{
    std::vector<ObjectDisc> objs;
    for (int i = 0; i < 21; ++i) objs.push_back(disc(0.02 * i + 0.05, 0.3, 0.01, i));
    auto s = make_state(objs, 0, {0.3, 0.1});
    try {
        privileged(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "exceeds max_objects");
    }
}
