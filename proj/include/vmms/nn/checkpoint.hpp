#pragma once

// Checkpoint files: a JSON manifest with base64-encoded little-endian float64
// blocks for parameters and Adam moments.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "../core/error.hpp"
#include "network.hpp"

namespace vmms::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

inline std::string base64_encode(const std::vector<double>& values)
{
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    const int n = static_cast<int>(values.size() * sizeof(double));
    std::string out(static_cast<std::size_t>(4 * ((n + 2) / 3)), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes, n);
    out.resize(static_cast<std::size_t>(written));
    return out;
}

inline std::vector<double> base64_decode(const std::string& text, std::size_t expected)
{
    std::vector<unsigned char> buf(3 * text.size() / 4 + 3);
    const int n = EVP_DecodeBlock(buf.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw data_error("corrupt base64 block in checkpoint");
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock counts padding characters as zero bytes.
    for (std::size_t k = text.size(); k > 0 && text[k - 1] == '='; --k) --len;
    if (len != expected * sizeof(double))
        throw data_error("checkpoint block holds " + std::to_string(len) + " bytes, expected " +
                         std::to_string(expected * sizeof(double)));
    std::vector<double> out(expected);
    std::memcpy(out.data(), buf.data(), len);
    return out;
}

struct NamedNetwork {
    std::string name;
    Network net;
};

struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::vector<NamedNetwork> networks;
    nlohmann::ordered_json observation = nlohmann::ordered_json::object(); ///< settings needed to replay the actor

    const Network& get(const std::string& name) const
    {
        for (const auto& n : networks)
            if (n.name == name) return n.net;
        throw data_error("checkpoint has no network named '" + name + "'");
    }
};

namespace detail {

inline std::vector<double> gather(const Network& net, Tensor Param::*field)
{
    std::vector<double> out;
    for (const auto* p : net.parameters()) {
        const auto& d = (p->*field).data;
        out.insert(out.end(), d.begin(), d.end());
    }
    return out;
}

inline void scatter(Network& net, Tensor Param::*field, const std::vector<double>& values)
{
    std::size_t off = 0;
    for (auto* p : net.parameters()) {
        auto& d = (p->*field).data;
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(off),
                  values.begin() + static_cast<std::ptrdiff_t>(off + d.size()), d.begin());
        off += d.size();
    }
}

} // namespace detail

inline std::string checkpoint_to_json(const Checkpoint& c)
{
    nlohmann::ordered_json j;
    j["format_version"] = c.format_version;
    j["step"] = c.step;
    j["seed"] = c.seed;
    j["config_hash"] = c.config_hash;
    j["observation"] = c.observation;
    auto& nets = j["networks"] = nlohmann::ordered_json::array();
    for (const auto& n : c.networks) {
        nlohmann::ordered_json jn;
        jn["name"] = n.name;
        jn["descriptor"] = to_json(n.net.architecture());
        jn["adam_steps"] = n.net.adam_steps;
        jn["params_b64"] = base64_encode(detail::gather(n.net, &Param::value));
        jn["adam_m_b64"] = base64_encode(detail::gather(n.net, &Param::m));
        jn["adam_v_b64"] = base64_encode(detail::gather(n.net, &Param::v));
        nets.push_back(std::move(jn));
    }
    return j.dump(1) + "\n";
}

inline Checkpoint checkpoint_from_json(const std::string& text)
{
    Checkpoint c;
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        c.format_version = j.at("format_version").get<int>();
        if (c.format_version != Checkpoint::kFormatVersion)
            throw data_error("checkpoint format_version " + std::to_string(c.format_version) + " is not supported (expected " +
                             std::to_string(Checkpoint::kFormatVersion) + ")");
        c.step = j.at("step").get<std::int64_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.config_hash = j.at("config_hash").get<std::string>();
        if (j.contains("observation")) c.observation = j.at("observation");
        for (const auto& jn : j.at("networks")) {
            NamedNetwork n{jn.at("name").get<std::string>(), Network(architecture_from_json(jn.at("descriptor")))};
            const std::size_t count = n.net.parameter_count();
            detail::scatter(n.net, &Param::value, base64_decode(jn.at("params_b64").get<std::string>(), count));
            detail::scatter(n.net, &Param::m, base64_decode(jn.at("adam_m_b64").get<std::string>(), count));
            detail::scatter(n.net, &Param::v, base64_decode(jn.at("adam_v_b64").get<std::string>(), count));
            n.net.adam_steps = jn.value("adam_steps", std::int64_t{0});
            c.networks.push_back(std::move(n));
        }
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed checkpoint: ") + e.what());
    }
    return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write checkpoint " + path);
    out << checkpoint_to_json(c);
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot read checkpoint " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

/// Copies a stored network into `target`, which must have the same architecture.
inline void restore(const Checkpoint& c, const std::string& name, Network& target)
{
    const Network& stored = c.get(name);
    if (!(stored.architecture() == target.architecture()))
        throw data_error("architecture mismatch for '" + name + "': checkpoint has " + describe(stored.architecture()) +
                         ", expected " + describe(target.architecture()));
    target = stored;
}

} // namespace vmms::nn
