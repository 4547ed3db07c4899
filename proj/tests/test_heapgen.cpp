#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"
#include "vmms/heapgen.hpp"

using namespace vmms;
using vmms::testing::disc;

namespace {

GeneratorConfig small_config(HeapMode mode, int count, std::uint64_t seed)
{
    GeneratorConfig c;
    c.mode = mode;
    c.count = count;
    c.seed = seed;
    return c;
}

double stored_target_occlusion(const HeapSpec& h)
{
    WorldState s;
    s.objects = h.objects;
    s.target_id = h.target_id;
    return occlusion(s, h.target_id);
}

} // namespace

TEST(SelectTarget, RejectsHeavilyOccludedOnly)
{
    // Object 0 is 95%+ hidden by a bigger disc on top; the top disc is fully visible.
    std::vector<ObjectDisc> objs{disc(0.3, 0.3, 0.02, 0), disc(0.3005, 0.3, 0.04, 1)};
    objs[1].id = 1;
    EXPECT_FALSE(select_target(objs).has_value());
}

TEST(SelectTarget, FirstValidInDropOrder)
{
    std::vector<ObjectDisc> objs{disc(0.1, 0.1, 0.03, 0), disc(0.3, 0.3, 0.03, 1), disc(0.33, 0.3, 0.03, 2),
                                 disc(0.36, 0.3, 0.03, 3)};
    for (int i = 0; i < 4; ++i) objs[static_cast<std::size_t>(i)].id = i;
    EXPECT_EQ(select_target(objs), 1);
}

TEST(GenerateHeap, SameSeedSameHeap)
{
    Rng a(11), b(11);
    EXPECT_EQ(generate_heap(HeapMode::single, {10, 0}, a), generate_heap(HeapMode::single, {10, 0}, b));
}

TEST(GenerateHeap, SingleHeapAcceptanceRate)
{
    Rng rng(2024);
    int accepted = 0;
    for (int k = 0; k < 1000; ++k)
        if (generate_heap(HeapMode::single, {10, 0}, rng)) ++accepted;
    EXPECT_GT(accepted / 1000.0, 0.2);
}

TEST(GenerateHeap, SingleHeapGeometry)
{
    Rng rng(8);
    const GeneratorConfig cfg;
    for (int k = 0; k < 200; ++k) {
        auto h = generate_heap(HeapMode::single, {5, 0}, rng, cfg);
        if (!h) continue;
        ASSERT_EQ(h->centers.size(), 1u);
        EXPECT_LE((h->centers[0] - cfg.workspace.center()).norm(), 0.05 + 1e-8);
        std::set<int> z;
        for (const auto& o : h->objects) {
            EXPECT_GE(o.radius, 0.02 - 1e-9);
            EXPECT_LE(o.radius, 0.04 + 1e-9);
            EXPECT_TRUE(cfg.workspace.contains(o.center, cfg.edge_margin - 1e-9));
            z.insert(o.z_rank);
        }
        EXPECT_EQ(z.size(), h->objects.size());
        EXPECT_EQ(*z.begin(), 0);
        EXPECT_EQ(*z.rbegin(), static_cast<int>(h->objects.size()) - 1);
        const double occ = stored_target_occlusion(*h);
        EXPECT_GE(occ, 0.10);
        EXPECT_LE(occ, 0.90);
    }
}

TEST(GenerateDataset, EqualThirdsOfObjectCounts)
{
    const auto ds = generate_dataset(small_config(HeapMode::single, 30, 7)).dataset;
    ASSERT_EQ(ds.heaps.size(), 30u);
    std::map<std::size_t, int> counts;
    for (const auto& h : ds.heaps) ++counts[h.objects.size()];
    EXPECT_EQ(counts[5], 10);
    EXPECT_EQ(counts[10], 10);
    EXPECT_EQ(counts[15], 10);
}

TEST(GenerateDataset, DualHeapsAreSeparated)
{
    const auto ds = generate_dataset(small_config(HeapMode::dual, 20, 3)).dataset;
    for (const auto& h : ds.heaps) {
        ASSERT_EQ(h.centers.size(), 2u);
        EXPECT_GE((h.centers[0] - h.centers[1]).norm(), 0.25);
        EXPECT_GE(h.objects.size(), 10u);
        EXPECT_LE(h.objects.size(), 20u);
        EXPECT_EQ(h.condition, HeapMode::dual);
    }
}

TEST(GenerateDataset, ParallelMatchesSerial)
{
    const auto cfg = small_config(HeapMode::single, 24, 5);
    EXPECT_EQ(dataset_to_json(generate_dataset(cfg, 1).dataset), dataset_to_json(generate_dataset(cfg, 4).dataset));
}

TEST(GenerateDataset, RejectsTinyCount)
{
    EXPECT_THROW(generate_dataset(small_config(HeapMode::single, 1, 0)), Error);
}

TEST(GenerateDataset, AbortsWhenAcceptanceCollapses)
{
    auto cfg = small_config(HeapMode::single, 4, 0);
    cfg.min_occlusion = 0.999; // practically unsatisfiable
    cfg.max_attempts = 200;
    try {
        generate_dataset(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("aborted"), std::string::npos);
    }
}

TEST(Persistence, FileIsByteReproducible)
{
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "vmms_heapgen_test";
    fs::create_directories(dir);
    const auto a = (dir / "a.json").string(), b = (dir / "b.json").string();
    const auto cfg = small_config(HeapMode::single, 30, 7);
    save_dataset(generate_dataset(cfg).dataset, a);
    save_dataset(generate_dataset(cfg).dataset, b);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto text = slurp(a);
    EXPECT_EQ(text, slurp(b));

    // Regenerating from the stored generator config reproduces the file.
    const auto loaded = load_dataset(a);
    EXPECT_EQ(dataset_to_json(generate_dataset(loaded.generator).dataset), text);
    EXPECT_EQ(dataset_to_json(loaded), text);

    for (const auto& h : loaded.heaps) {
        const double occ = stored_target_occlusion(h);
        EXPECT_GE(occ, 0.10);
        EXPECT_LE(occ, 0.90);
    }
    fs::remove_all(dir);
}

TEST(Persistence, RejectsWrongVersion)
{
    auto text = dataset_to_json(generate_dataset(small_config(HeapMode::single, 2, 1)).dataset);
    text.replace(text.find("\"format_version\": 1"), 19, "\"format_version\": 9");
    EXPECT_THROW(dataset_from_json(text), Error);
}

TEST(Split, ParityPartition)
{
    const auto ds = generate_dataset(small_config(HeapMode::single, 10, 4)).dataset;
    const auto [train, eval] = split(ds);
    EXPECT_EQ(train, (std::vector<int>{0, 2, 4, 6, 8}));
    EXPECT_EQ(eval, (std::vector<int>{1, 3, 5, 7, 9}));

    const auto two = generate_dataset(small_config(HeapMode::single, 2, 4)).dataset;
    const auto [t2, e2] = split(two);
    EXPECT_EQ(t2, std::vector<int>{0});
    EXPECT_EQ(e2, std::vector<int>{1});
}

TEST(Split, DisjointAndCovering)
{
    const auto ds = generate_dataset(small_config(HeapMode::single, 13, 9)).dataset;
    const auto [train, eval] = split(ds);
    std::set<int> all(train.begin(), train.end());
    for (int id : eval) EXPECT_TRUE(all.insert(id).second);
    EXPECT_EQ(all.size(), ds.heaps.size());
}
