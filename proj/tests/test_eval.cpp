#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vmms/eval.hpp"
#include "vmms/rl/agent.hpp"

using namespace vmms;
using vmms::testing::disc;
using vmms::testing::make_state;
using vmms::testing::random_heap;

namespace {

/// Axes blocked by a single disc of radius rb whose center lies at distance D
/// from the target center along angle phi0: a finger at distance `reach`
/// along phi overlaps it iff cos(phi - phi0) exceeds the law-of-cosines bound.
int blocked_axes_oracle(double reach, double D, double rb, double finger, double phi0)
{
    const double bound = (reach * reach + D * D - (rb + finger) * (rb + finger)) / (2.0 * reach * D);
    int blocked = 0;
    for (int k = 0; k < 16; ++k) {
        const double theta = k * std::numbers::pi / 16;
        if (std::cos(theta - phi0) > bound || std::cos(theta + std::numbers::pi - phi0) > bound) ++blocked;
    }
    return blocked;
}

} // namespace

TEST(Graspability, IsolatedDiscScoresOne)
{
    const auto s = make_state({disc(0.3, 0.3, 0.03, 0)}, 0, {0.05, 0.05});
    EXPECT_EQ(graspability(s), 1.0);
}

TEST(Graspability, HiddenTargetScoresZero)
{
    const auto s = make_state({disc(0.3, 0.3, 0.03, 0), disc(0.3, 0.3, 0.05, 1)}, 0, {0.05, 0.05});
    EXPECT_EQ(visibility(s, 0), 0.0);
    EXPECT_EQ(graspability(s), 0.0);
}

TEST(Graspability, TangentBlockerMatchesEnumeration)
{
    for (double rb : {0.01, 0.02, 0.035, 0.05}) {
        const double R = 0.03;
        // Blocker sits below the target so visibility stays 1.
        const auto s = make_state({disc(0.3, 0.3, R, 1), disc(0.3 + R + rb, 0.3, rb, 0)}, 0, {0.05, 0.05});
        ASSERT_EQ(visibility(s, 0), 1.0);
        const int blocked = blocked_axes_oracle(R + 0.008 + 0.002, R + rb, rb, 0.008, 0.0);
        EXPECT_GT(blocked, 0);
        EXPECT_DOUBLE_EQ(graspability(s), 1.0 - blocked / 16.0) << rb;
    }
}

TEST(Graspability, FingerOutsideWorkspaceBlocks)
{
    // Target touching the left wall: an axis is free iff the left finger keeps
    // its 0.008 margin, i.e. 0.03 - 0.04 |cos theta| >= 0.008.
    const auto s = make_state({disc(0.03, 0.3, 0.03, 0)}, 0, {0.3, 0.3});
    int free = 0;
    for (int k = 0; k < 16; ++k) free += 0.03 - 0.04 * std::abs(std::cos(k * std::numbers::pi / 16)) >= 0.008;
    EXPECT_EQ(free, 5);
    EXPECT_EQ(graspability(s), free / 16.0);
}

TEST(Graspability, RotationInvariantWithinOneAxis)
{
    Rng rng(41);
    for (int trial = 0; trial < 300; ++trial) {
        const double R = rng.uniform(0.02, 0.04), rb = rng.uniform(0.01, 0.05);
        const double D = R + rb + rng.uniform(0.0, 0.02);
        const double phi = rng.uniform(0.0, 2 * std::numbers::pi), alpha = rng.uniform(0.0, 2 * std::numbers::pi);
        auto scene = [&](double a) {
            return make_state({disc(0.3, 0.3, R, 1), disc(0.3 + D * std::cos(a), 0.3 + D * std::sin(a), rb, 0)}, 0,
                              {0.05, 0.05});
        };
        const double g0 = graspability(scene(phi)), g1 = graspability(scene(phi + alpha));
        ASSERT_LE(std::abs(g0 - g1), 1.0 / 16 + 1e-12);
        EXPECT_NEAR(g0, 1.0 - blocked_axes_oracle(R + 0.01, D, rb, 0.008, phi) / 16.0, 1e-12);
    }
}

TEST(Policies, ParseTags)
{
    EXPECT_EQ(parse_policy("random").tag(), "random");
    EXPECT_EQ(parse_policy("teacher:zigzag").tag(), "teacher:zigzag");
    EXPECT_EQ(parse_policy("actor:a/b.json").checkpoint, "a/b.json");
    for (const char* bad : {"", "actor:", "teacher:wobble", "greedy"}) EXPECT_THROW(parse_policy(bad), Error) << bad;
}

TEST(Rollout, RandomPolicyRepeatsExactly)
{
    Rng rng(42);
    const auto heap = random_heap(rng);
    const auto a = rollout(parse_policy("random"), heap, 77), b = rollout(parse_policy("random"), heap, 77);
    EXPECT_EQ(trace_to_json(a).dump(), trace_to_json(b).dump());
    const auto c = rollout(parse_policy("random"), heap, 78);
    EXPECT_NE(trace_to_json(a).dump(), trace_to_json(c).dump());
}

TEST(Rollout, RewardSumAndRecordInvariants)
{
    Rng rng(43);
    for (const char* tag : {"random", "teacher:straight", "teacher:zigzag", "teacher:spiral"}) {
        for (int k = 0; k < 10; ++k) {
            const auto heap = random_heap(rng);
            const auto tr = rollout(parse_policy(tag), heap, k);
            ASSERT_LE(tr.steps.size(), 51u);
            ASSERT_GE(tr.steps.size(), 2u);
            double sum = 0.0;
            for (std::size_t i = 1; i < tr.steps.size(); ++i) sum += tr.steps[i].reward.total;
            EXPECT_EQ(sum, tr.total_reward());
            EXPECT_EQ(metrics(tr).reward, sum);
            EXPECT_EQ(tr.steps[0].reward.total, 0.0);
            EXPECT_EQ(tr.termination == "visible", tr.steps.back().visibility >= 0.99);
            if (tr.termination == "max_steps") {
                EXPECT_EQ(tr.step_count(), 50);
            }
            const auto j = trace_to_json(tr);
            EXPECT_EQ(j["format_version"], 1);
            EXPECT_EQ(j["steps"].size(), tr.steps.size());
            EXPECT_EQ(j["policy"], tag);
        }
    }
}

TEST(Rollout, ActorWithWrongGridFails)
{
    Rng rng(44);
    const auto heap = random_heap(rng);
    Policy p = parse_policy("actor:x");
    Rng init(1);
    p.actor = std::make_shared<const nn::Network>(rl::actor_architecture(16), init);
    EXPECT_THROW(rollout(p, heap, 1), Error);
    RolloutSettings rs;
    rs.observe.grid = 16;
    EXPECT_NO_THROW(rollout(p, heap, 1, rs));
}

TEST(Rollout, ParallelMatchesSerial)
{
    Rng rng(45);
    std::vector<HeapSpec> heaps;
    for (int k = 0; k < 6; ++k) heaps.push_back(random_heap(rng));
    std::vector<EpisodeJob> work;
    for (int k = 0; k < 12; ++k) work.push_back({&heaps[k % 6], static_cast<std::uint64_t>(k)});
    const auto serial = run_episodes(parse_policy("teacher:spiral"), work, {}, 1);
    const auto parallel = run_episodes(parse_policy("teacher:spiral"), work, {}, 4);
    for (std::size_t k = 0; k < work.size(); ++k)
        EXPECT_EQ(trace_to_json(serial[k]).dump(), trace_to_json(parallel[k]).dump());
}

TEST(Summary, DisturbanceMeanExample)
{
    std::vector<EpisodeMetrics> m(2);
    m[0].heap_disturbance = 0.01;
    m[1].heap_disturbance = 0.03;
    m[1].seed = 1;
    EXPECT_DOUBLE_EQ(summarize(m).aggregate.heap_disturbance, 0.02);
}

TEST(Summary, StillTraceHasNoDisturbance)
{
    EpisodeTrace tr;
    tr.steps.push_back({{0.1, 0.1}, {}, {}, 0.5, {{0.2, 0.2}, {0.3, 0.3}}});
    tr.steps.push_back({{0.1, 0.1}, {}, {}, 0.5, {{0.2, 0.2}, {0.3, 0.3}}});
    EXPECT_EQ(tr.heap_disturbance(), 0.0);
    EXPECT_EQ(summarize(std::vector<EpisodeTrace>{tr}).aggregate.heap_disturbance, 0.0);
}

TEST(Summary, DisturbanceSkipsTarget)
{
    EpisodeTrace tr;
    tr.target_id = 0;
    tr.steps.push_back({{}, {}, {}, 0.5, {{0.2, 0.2}, {0.3, 0.3}, {0.4, 0.4}}});
    tr.steps.push_back({{}, {}, {}, 0.5, {{0.5, 0.2}, {0.3, 0.34}, {0.4, 0.4}}});
    EXPECT_NEAR(tr.heap_disturbance(), 0.02, 1e-15);
}

TEST(Summary, AggregateIsMeanOfPerHeapMeans)
{
    std::vector<EpisodeMetrics> m;
    for (int k = 0; k < 3; ++k) m.push_back({0, static_cast<std::uint64_t>(k), 0.0, 0.3, 0, 0, 0});
    m.push_back({1, 9, 0.0, 0.1, 0, 0, 0});
    const auto s = summarize(m);
    EXPECT_DOUBLE_EQ(s.per_heap.at(0).visibility_change, 0.3);
    EXPECT_DOUBLE_EQ(s.aggregate.visibility_change, 0.2);
    EXPECT_EQ(s.aggregate.episodes, 4);
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{0, 1, 2, 9}));
}

TEST(Summary, PermutationInvariant)
{
    Rng rng(46);
    std::vector<EpisodeMetrics> m;
    for (int k = 0; k < 40; ++k)
        m.push_back({static_cast<int>(rng.index(5)), static_cast<std::uint64_t>(k), rng.uniform(-30, 0), rng.uniform(),
                     rng.uniform(1, 50), rng.uniform(-1, 1), rng.uniform(0, 0.1)});
    const auto base = summarize(m);
    for (int k = 0; k < 10; ++k) {
        for (std::size_t i = m.size() - 1; i > 0; --i) std::swap(m[i], m[rng.index(i + 1)]);
        const auto s = summarize(m);
        EXPECT_EQ(s.aggregate.reward, base.aggregate.reward);
        EXPECT_EQ(s.aggregate.visibility_change, base.aggregate.visibility_change);
        EXPECT_EQ(s.aggregate.heap_disturbance, base.aggregate.heap_disturbance);
        EXPECT_EQ(s.seeds, base.seeds);
    }
    EXPECT_THROW(summarize(std::vector<EpisodeMetrics>{}), Error);
}

TEST(Summary, MetricsRowFormat)
{
    MetricMeans m{-12.5, 0.25, 10, 0.125, 0.0375, 4};
    EXPECT_EQ(metrics_row(500, m, 0.5, 0.0), "500,-12.5,0.25,10,0.125,0.0375,0.5,0");
    const std::string header = kMetricsHeader;
    EXPECT_EQ(std::count(header.begin(), header.end(), ','), 7);
}
