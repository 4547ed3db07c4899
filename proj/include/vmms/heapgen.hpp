#pragma once

// Procedural heap generation, persistence and train/eval splitting.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/numfmt.hpp"
#include "core/rng.hpp"
#include "world.hpp"

namespace vmms {

enum class HeapMode { single, dual };

inline std::string to_string(HeapMode m) { return m == HeapMode::single ? "single" : "dual"; }

inline HeapMode parse_heap_mode(const std::string& s)
{
    if (s == "single") return HeapMode::single;
    if (s == "dual") return HeapMode::dual;
    throw usage_error("unknown heap mode '" + s + "' (expected single|dual)");
}

struct GeneratorConfig {
    HeapMode mode = HeapMode::single;
    int count = 300;
    std::uint64_t seed = 0;
    std::vector<int> object_counts{5, 10, 15}; ///< single mode, cycled by heap index
    int dual_min_objects = 5;                  ///< per heap, dual mode
    int dual_max_objects = 10;
    double center_jitter = 0.05;
    double scatter_sigma = 0.04;
    double radius_min = 0.02;
    double radius_max = 0.04;
    double edge_margin = 0.05;
    double dual_min_separation = 0.25;
    double dual_center_margin = 0.12;
    double min_occlusion = 0.10;
    double max_occlusion = 0.90;
    int max_attempts = 100000;
    double min_acceptance = 0.01;
    Rect workspace{};
};

struct HeapSpec {
    int heap_id = 0;
    std::vector<ObjectDisc> objects; ///< index == id == drop order
    int target_id = 0;
    HeapMode condition = HeapMode::single;
    std::uint64_t seed = 0;
    std::vector<Vec2> centers; ///< cluster centers the objects were scattered around

    bool operator==(const HeapSpec&) const = default;
};

struct HeapDataset {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    Rect workspace{};
    GeneratorConfig generator{};
    std::vector<HeapSpec> heaps;
};

struct GenerationReport {
    HeapDataset dataset;
    std::uint64_t attempts = 0;
    std::uint64_t accepted = 0;

    double acceptance_rate() const { return attempts ? static_cast<double>(accepted) / attempts : 0.0; }
};

/// First object in drop order whose occlusion lies in [min_occ, max_occ].
inline std::optional<int> select_target(const std::vector<ObjectDisc>& objects, double min_occ = 0.10,
                                        double max_occ = 0.90)
{
    WorldState probe;
    probe.objects = objects;
    for (const auto& o : objects) {
        const double occ = occlusion(probe, o.id);
        if (occ >= min_occ && occ <= max_occ) return o.id;
    }
    return std::nullopt;
}

namespace detail {

inline Vec2 quantized(Vec2 p) { return {round_sig(p.x), round_sig(p.y)}; }

inline void scatter(std::vector<ObjectDisc>& out, Vec2 center, int n, Rng& rng, const GeneratorConfig& cfg)
{
    for (int k = 0; k < n; ++k) {
        ObjectDisc o;
        o.id = static_cast<int>(out.size());
        o.z_rank = o.id;
        const Vec2 p{rng.normal(center.x, cfg.scatter_sigma), rng.normal(center.y, cfg.scatter_sigma)};
        o.center = quantized(cfg.workspace.clamp(p, cfg.edge_margin));
        o.radius = round_sig(rng.uniform(cfg.radius_min, cfg.radius_max));
        out.push_back(o);
    }
}

} // namespace detail

/// One generation attempt. Returns nullopt when no object has a valid
/// occlusion (the caller retries).
inline std::optional<HeapSpec> generate_heap(HeapMode mode, std::pair<int, int> n_objects, Rng& rng,
                                             const GeneratorConfig& cfg = {})
{
    HeapSpec heap;
    heap.condition = mode;
    const Vec2 mid = cfg.workspace.center();
    if (mode == HeapMode::single) {
        const double rad = cfg.center_jitter * std::sqrt(rng.uniform());
        const double ang = 2.0 * std::numbers::pi * rng.uniform();
        const Vec2 c = detail::quantized(mid + unit(ang) * rad);
        heap.centers = {c};
        detail::scatter(heap.objects, c, n_objects.first, rng, cfg);
    } else {
        Vec2 a;
        Vec2 b;
        for (int k = 0;; ++k) {
            if (k == 1000) throw data_error("cannot place two heap centers with the requested separation");
            a = {rng.uniform(cfg.dual_center_margin, cfg.workspace.w - cfg.dual_center_margin),
                 rng.uniform(cfg.dual_center_margin, cfg.workspace.h - cfg.dual_center_margin)};
            b = {rng.uniform(cfg.dual_center_margin, cfg.workspace.w - cfg.dual_center_margin),
                 rng.uniform(cfg.dual_center_margin, cfg.workspace.h - cfg.dual_center_margin)};
            a = detail::quantized(a);
            b = detail::quantized(b);
            if ((a - b).norm() >= cfg.dual_min_separation) break;
        }
        heap.centers = {a, b};
        detail::scatter(heap.objects, a, n_objects.first, rng, cfg);
        detail::scatter(heap.objects, b, n_objects.second, rng, cfg);
    }
    const auto target = select_target(heap.objects, cfg.min_occlusion, cfg.max_occlusion);
    if (!target) return std::nullopt;
    heap.target_id = *target;
    return heap;
}

struct IndexedHeap {
    std::optional<HeapSpec> heap;
    std::uint64_t attempts = 0;
};

/// Generates heap `index` of a dataset from its own derived stream.
inline IndexedHeap generate_indexed_heap(const GeneratorConfig& cfg, int index)
{
    const std::uint64_t heap_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)});
    Rng rng(heap_seed);
    IndexedHeap out;
    while (out.attempts < static_cast<std::uint64_t>(cfg.max_attempts)) {
        ++out.attempts;
        std::pair<int, int> n{0, 0};
        if (cfg.mode == HeapMode::single) {
            n.first = cfg.object_counts[static_cast<std::size_t>(index) % cfg.object_counts.size()];
        } else {
            const auto span = static_cast<std::uint64_t>(cfg.dual_max_objects - cfg.dual_min_objects + 1);
            n.first = cfg.dual_min_objects + static_cast<int>(rng.index(span));
            n.second = cfg.dual_min_objects + static_cast<int>(rng.index(span));
        }
        if (auto h = generate_heap(cfg.mode, n, rng, cfg)) {
            h->heap_id = index;
            h->seed = heap_seed;
            out.heap = std::move(h);
            break;
        }
    }
    return out;
}

inline GenerationReport generate_dataset(const GeneratorConfig& cfg, int jobs = 1)
{
    if (cfg.count < 2) throw usage_error("heap count must be at least 2");
    if (cfg.mode == HeapMode::single) {
        if (cfg.object_counts.empty()) throw usage_error("object_counts must not be empty");
        for (int n : cfg.object_counts)
            if (n < 1) throw usage_error("object counts must be positive");
    } else if (cfg.dual_min_objects < 1 || cfg.dual_max_objects < cfg.dual_min_objects) {
        throw usage_error("invalid dual-heap object range");
    }

    std::vector<IndexedHeap> results(static_cast<std::size_t>(cfg.count));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < cfg.count; i = next++) results[static_cast<std::size_t>(i)] = generate_indexed_heap(cfg, i);
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    GenerationReport report;
    report.dataset.workspace = cfg.workspace;
    report.dataset.generator = cfg;
    for (auto& r : results) {
        report.attempts += r.attempts;
        if (r.heap) {
            ++report.accepted;
            report.dataset.heaps.push_back(std::move(*r.heap));
        }
    }
    const bool exhausted = report.accepted < static_cast<std::uint64_t>(cfg.count);
    const bool starved = report.attempts >= 100000 && report.acceptance_rate() < cfg.min_acceptance;
    if (exhausted || starved) {
        std::ostringstream msg;
        msg << "heap generation aborted: accepted " << report.accepted << " of " << report.attempts
            << " attempts (rate " << report.acceptance_rate() << ", minimum " << cfg.min_acceptance << ")";
        throw data_error(msg.str());
    }
    return report;
}

/// Even heap ids train, odd heap ids evaluate.
inline std::pair<std::vector<int>, std::vector<int>> split(const HeapDataset& ds)
{
    std::pair<std::vector<int>, std::vector<int>> out;
    for (const auto& h : ds.heaps) (h.heap_id % 2 == 0 ? out.first : out.second).push_back(h.heap_id);
    return out;
}

inline WorldState reset(const HeapSpec& heap, Rng& rng, const WorldParams& params = {})
{
    return reset(std::span<const ObjectDisc>(heap.objects), heap.target_id, rng, params);
}

// ---- persistence ----------------------------------------------------------

inline nlohmann::ordered_json generator_to_json(const GeneratorConfig& c)
{
    nlohmann::ordered_json j;
    j["mode"] = to_string(c.mode);
    j["count"] = c.count;
    j["seed"] = c.seed;
    j["object_counts"] = c.object_counts;
    j["dual_min_objects"] = c.dual_min_objects;
    j["dual_max_objects"] = c.dual_max_objects;
    j["center_jitter"] = round_sig(c.center_jitter);
    j["scatter_sigma"] = round_sig(c.scatter_sigma);
    j["radius_min"] = round_sig(c.radius_min);
    j["radius_max"] = round_sig(c.radius_max);
    j["edge_margin"] = round_sig(c.edge_margin);
    j["dual_min_separation"] = round_sig(c.dual_min_separation);
    j["dual_center_margin"] = round_sig(c.dual_center_margin);
    j["min_occlusion"] = round_sig(c.min_occlusion);
    j["max_occlusion"] = round_sig(c.max_occlusion);
    j["max_attempts"] = c.max_attempts;
    j["min_acceptance"] = round_sig(c.min_acceptance);
    return j;
}

inline GeneratorConfig generator_from_json(const nlohmann::ordered_json& j, Rect workspace)
{
    GeneratorConfig c;
    c.mode = parse_heap_mode(j.at("mode").get<std::string>());
    c.count = j.at("count").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.object_counts = j.at("object_counts").get<std::vector<int>>();
    c.dual_min_objects = j.at("dual_min_objects").get<int>();
    c.dual_max_objects = j.at("dual_max_objects").get<int>();
    c.center_jitter = j.at("center_jitter").get<double>();
    c.scatter_sigma = j.at("scatter_sigma").get<double>();
    c.radius_min = j.at("radius_min").get<double>();
    c.radius_max = j.at("radius_max").get<double>();
    c.edge_margin = j.at("edge_margin").get<double>();
    c.dual_min_separation = j.at("dual_min_separation").get<double>();
    c.dual_center_margin = j.at("dual_center_margin").get<double>();
    c.min_occlusion = j.at("min_occlusion").get<double>();
    c.max_occlusion = j.at("max_occlusion").get<double>();
    c.max_attempts = j.at("max_attempts").get<int>();
    c.min_acceptance = j.at("min_acceptance").get<double>();
    c.workspace = workspace;
    return c;
}

inline std::string dataset_to_json(const HeapDataset& ds)
{
    nlohmann::ordered_json j;
    j["format_version"] = ds.format_version;
    j["workspace"] = {{"w", round_sig(ds.workspace.w)}, {"h", round_sig(ds.workspace.h)}};
    j["generator_config"] = generator_to_json(ds.generator);
    auto& heaps = j["heaps"] = nlohmann::ordered_json::array();
    for (const auto& h : ds.heaps) {
        nlohmann::ordered_json jh;
        jh["heap_id"] = h.heap_id;
        jh["condition"] = to_string(h.condition);
        jh["seed"] = h.seed;
        jh["target_id"] = h.target_id;
        auto& cs = jh["centers"] = nlohmann::ordered_json::array();
        for (Vec2 c : h.centers) cs.push_back({round_sig(c.x), round_sig(c.y)});
        auto& os = jh["objects"] = nlohmann::ordered_json::array();
        for (const auto& o : h.objects)
            os.push_back({{"x", round_sig(o.center.x)}, {"y", round_sig(o.center.y)}, {"r", round_sig(o.radius)},
                          {"z", o.z_rank}});
        heaps.push_back(std::move(jh));
    }
    return j.dump(1) + "\n";
}

inline HeapDataset dataset_from_json(const std::string& text)
{
    HeapDataset ds;
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        ds.format_version = j.at("format_version").get<int>();
        if (ds.format_version != HeapDataset::kFormatVersion)
            throw data_error("unsupported heap dataset format_version " + std::to_string(ds.format_version));
        ds.workspace = {j.at("workspace").at("w").get<double>(), j.at("workspace").at("h").get<double>()};
        ds.generator = generator_from_json(j.at("generator_config"), ds.workspace);
        for (const auto& jh : j.at("heaps")) {
            HeapSpec h;
            h.heap_id = jh.at("heap_id").get<int>();
            h.condition = parse_heap_mode(jh.at("condition").get<std::string>());
            h.seed = jh.at("seed").get<std::uint64_t>();
            h.target_id = jh.at("target_id").get<int>();
            if (jh.contains("centers"))
                for (const auto& c : jh.at("centers")) h.centers.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
            for (const auto& jo : jh.at("objects")) {
                ObjectDisc o;
                o.id = static_cast<int>(h.objects.size());
                o.center = {jo.at("x").get<double>(), jo.at("y").get<double>()};
                o.radius = jo.at("r").get<double>();
                o.z_rank = jo.at("z").get<int>();
                h.objects.push_back(o);
            }
            if (h.target_id < 0 || h.target_id >= static_cast<int>(h.objects.size()))
                throw data_error("heap " + std::to_string(h.heap_id) + ": target_id out of range");
            ds.heaps.push_back(std::move(h));
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed heap dataset: ") + e.what());
    }
    for (std::size_t i = 0; i < ds.heaps.size(); ++i)
        if (ds.heaps[i].heap_id != static_cast<int>(i)) throw data_error("heap ids must be contiguous from 0");
    return ds;
}

inline void save_dataset(const HeapDataset& ds, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write " + path);
    out << dataset_to_json(ds);
}

inline HeapDataset load_dataset(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read heap dataset " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return dataset_from_json(ss.str());
}

} // namespace vmms
