#pragma once

// RunConfig: every tunable of an experiment in one flat, sectioned
// key = value text format. Unknown keys are rejected; the canonical emitted
// text is hashed to tag every artifact.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "core/error.hpp"
#include "core/numfmt.hpp"
#include "eval.hpp"
#include "heapgen.hpp"
#include "rl/config.hpp"

namespace vmms {

struct RunConfig {
    rl::TrainConfig train{};
    rl::Ablation ablation = rl::Ablation::none;
    RolloutSettings rollout{};
    GeneratorConfig generator{};
    std::string heaps_path;
    std::string run_dir;
};

namespace detail {

struct ConfigField {
    std::string section;
    std::string key;
    std::function<std::string()> get;
    std::function<void(const std::string&)> set;
};

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v)
{
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw data_error("expected a number, got '" + v + "'");
    return out;
}

template <class Int>
Int parse_int(const std::string& v)
{
    Int out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw data_error("expected an integer, got '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& v)
{
    if (v == "true") return true;
    if (v == "false") return false;
    throw data_error("expected true or false, got '" + v + "'");
}

inline std::string parse_string(const std::string& v)
{
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    throw data_error("expected a quoted string, got '" + v + "'");
}

inline std::string quote(const std::string& s) { return "\"" + s + "\""; }

/// Shortest text that parses back to the same double.
inline std::string num(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<ConfigField> fields(RunConfig& c)
{
    std::vector<ConfigField> f;
    auto dbl = [&](const char* sec, const char* key, double& ref) {
        f.push_back({sec, key, [&ref] { return num(ref); }, [&ref](const std::string& v) { ref = parse_double(v); }});
    };
    auto i32 = [&](const char* sec, const char* key, int& ref) {
        f.push_back({sec, key, [&ref] { return std::to_string(ref); },
                     [&ref](const std::string& v) { ref = parse_int<int>(v); }});
    };
    auto i64 = [&](const char* sec, const char* key, std::int64_t& ref) {
        f.push_back({sec, key, [&ref] { return std::to_string(ref); },
                     [&ref](const std::string& v) { ref = parse_int<std::int64_t>(v); }});
    };
    auto u64 = [&](const char* sec, const char* key, std::uint64_t& ref) {
        f.push_back({sec, key, [&ref] { return std::to_string(ref); },
                     [&ref](const std::string& v) { ref = parse_int<std::uint64_t>(v); }});
    };
    auto boolean = [&](const char* sec, const char* key, bool& ref) {
        f.push_back({sec, key, [&ref] { return std::string(ref ? "true" : "false"); },
                     [&ref](const std::string& v) { ref = parse_bool(v); }});
    };
    auto str = [&](const char* sec, const char* key, std::string& ref) {
        f.push_back({sec, key, [&ref] { return quote(ref); }, [&ref](const std::string& v) { ref = parse_string(v); }});
    };

    auto& t = c.train;
    dbl("train", "gamma", t.gamma);
    dbl("train", "tau", t.tau);
    dbl("train", "lr_actor", t.lr_actor);
    dbl("train", "lr_critic", t.lr_critic);
    i32("train", "batch", t.batch);
    i64("train", "warmup_steps", t.warmup_steps);
    dbl("train", "noise_sigma", t.noise_sigma);
    i32("train", "commit_window", t.commit_window);
    i32("train", "ensemble", t.ensemble);
    i64("train", "replay_capacity", t.replay_capacity);
    i64("train", "max_env_steps", t.max_env_steps);
    i64("train", "eval_every", t.eval_every);
    i64("train", "checkpoint_every", t.checkpoint_every);
    u64("train", "seed", t.seed);
    boolean("train", "use_teachers", t.use_teachers);
    boolean("train", "asymmetric", t.asymmetric);
    boolean("train", "bootstrap_timeouts", t.bootstrap_timeouts);
    dbl("train", "actor_final_init", t.actor_final_init);
    dbl("train", "critic_final_init", t.critic_final_init);
    i32("train", "hidden", t.hidden);
    dbl("train", "action_input_scale", t.action_input_scale);
    dbl("train", "state_input_scale", t.state_input_scale);
    dbl("train", "critic_output_scale", t.critic_output_scale);
    i32("train", "head_width", t.head_width);
    i32("train", "conv1", t.conv1);
    i32("train", "conv2", t.conv2);
    i32("train", "conv3", t.conv3);
    i32("train", "eval_jobs", t.eval_jobs);
    boolean("train", "record_wall_time", t.record_wall_time);
    f.push_back({"train", "ablation", [&c] { return quote(rl::to_string(c.ablation)); },
                 [&c](const std::string& v) { c.ablation = rl::parse_ablation(parse_string(v)); }});

    auto& w = c.rollout.world;
    dbl("world", "workspace_w", w.workspace.w);
    dbl("world", "workspace_h", w.workspace.h);
    dbl("world", "ee_radius", w.ee_radius);
    i32("world", "max_steps", w.max_steps);
    dbl("world", "max_action", w.max_action);
    dbl("world", "substep", w.substep);
    i32("world", "projection_iterations", w.projection_iterations);
    dbl("world", "overlap_tolerance", w.overlap_tolerance);
    dbl("world", "visible_threshold", w.visible_threshold);
    dbl("world", "min_start_distance", w.min_start_distance);
    i32("world", "start_samples", w.start_samples);
    dbl("world", "layer_height", w.layer_height);

    auto& o = c.rollout.observe;
    i32("observe", "grid", o.grid);
    i32("observe", "max_objects", o.max_objects);
    dbl("observe", "height_scale", o.height_scale);
    boolean("observe", "zero_position_channels", o.zero_position_channels);

    auto& tp = c.rollout.teacher;
    dbl("teachers", "overshoot", tp.overshoot);
    dbl("teachers", "zigzag_amplitude", tp.zigzag_amplitude);
    dbl("teachers", "zigzag_period", tp.zigzag_period);
    dbl("teachers", "spiral_pitch", tp.spiral_pitch);
    dbl("teachers", "spiral_max_radius", tp.spiral_max_radius);
    dbl("teachers", "max_segment", tp.max_segment);
    dbl("teachers", "arrive_tolerance", tp.arrive_tolerance);

    auto& gp = c.rollout.grasp;
    i32("grasp", "axes", gp.axes);
    dbl("grasp", "finger_radius", gp.finger_radius);
    dbl("grasp", "clearance", gp.clearance);

    auto& g = c.generator;
    f.push_back({"generator", "mode", [&g] { return quote(to_string(g.mode)); },
                 [&g](const std::string& v) { g.mode = parse_heap_mode(parse_string(v)); }});
    i32("generator", "count", g.count);
    u64("generator", "seed", g.seed);
    f.push_back({"generator", "object_counts",
                 [&g] {
                     std::string s = "[";
                     for (std::size_t i = 0; i < g.object_counts.size(); ++i)
                         s += (i ? ", " : "") + std::to_string(g.object_counts[i]);
                     return s + "]";
                 },
                 [&g](const std::string& v) {
                     if (v.size() < 2 || v.front() != '[' || v.back() != ']')
                         throw data_error("expected a list like [5, 10, 15], got '" + v + "'");
                     g.object_counts.clear();
                     std::stringstream ss(v.substr(1, v.size() - 2));
                     for (std::string item; std::getline(ss, item, ',');)
                         if (!trim(item).empty()) g.object_counts.push_back(parse_int<int>(trim(item)));
                 }});
    i32("generator", "dual_min_objects", g.dual_min_objects);
    i32("generator", "dual_max_objects", g.dual_max_objects);
    dbl("generator", "center_jitter", g.center_jitter);
    dbl("generator", "scatter_sigma", g.scatter_sigma);
    dbl("generator", "radius_min", g.radius_min);
    dbl("generator", "radius_max", g.radius_max);
    dbl("generator", "edge_margin", g.edge_margin);
    dbl("generator", "dual_min_separation", g.dual_min_separation);
    dbl("generator", "dual_center_margin", g.dual_center_margin);
    dbl("generator", "min_occlusion", g.min_occlusion);
    dbl("generator", "max_occlusion", g.max_occlusion);

    str("paths", "heaps", c.heaps_path);
    str("paths", "run_dir", c.run_dir);
    return f;
}

} // namespace detail

/// Sets one "section.key" to a value in file syntax (strings quoted).
inline void set_config_value(RunConfig& c, const std::string& dotted, const std::string& value)
{
    const auto dot = dotted.find('.');
    const std::string section = dot == std::string::npos ? "" : dotted.substr(0, dot);
    const std::string key = dot == std::string::npos ? dotted : dotted.substr(dot + 1);
    for (auto& f : detail::fields(c)) {
        if (f.section == section && f.key == key) {
            try {
                f.set(value);
            } catch (const Error& e) {
                throw data_error("config key '" + dotted + "': " + e.what());
            }
            return;
        }
    }
    throw data_error("unknown config key '" + dotted + "'");
}

inline void parse_config_into(RunConfig& c, const std::string& text)
{
    std::istringstream in(text);
    std::string section;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw data_error("config line " + std::to_string(line_no) + ": bad section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw data_error("config line " + std::to_string(line_no) + ": expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        try {
            set_config_value(c, section + "." + key, value);
        } catch (const Error& e) {
            throw data_error("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline RunConfig parse_config(const std::string& text)
{
    RunConfig c;
    parse_config_into(c, text);
    return c;
}

inline void load_config_into(RunConfig& c, const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    parse_config_into(c, ss.str());
}

/// Canonical text form: every key, fixed order, full precision.
inline std::string emit_config(const RunConfig& config)
{
    RunConfig c = config;
    std::ostringstream out;
    std::string section;
    for (const auto& f : detail::fields(c)) {
        if (f.section != section) {
            out << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
            section = f.section;
        }
        out << f.key << " = " << f.get() << "\n";
    }
    return out.str();
}

inline std::string sha256_hex(const std::string& text)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw logic_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

/// First 16 hex digits of the SHA-256 of the canonical text. The run
/// directory is left out so that relocating a run keeps its hash.
inline std::string config_hash(const RunConfig& c)
{
    RunConfig h = c;
    h.run_dir.clear();
    return sha256_hex(emit_config(h)).substr(0, 16);
}

} // namespace vmms
