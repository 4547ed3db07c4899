#pragma once

// Multi-head feed-forward network: each named input passes through its own
// layer stack, head outputs are flattened and concatenated, and a trunk maps
// the concatenation to the output.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "layers.hpp"
#include "tensor.hpp"

namespace vmms::nn {

struct HeadSpec {
    std::string name;
    Shape input_shape; ///< per sample
    std::vector<LayerSpec> layers;

    bool operator==(const HeadSpec&) const = default;
};

struct Architecture {
    std::vector<HeadSpec> heads;
    std::vector<LayerSpec> trunk;

    bool operator==(const Architecture&) const = default;

    /// Parameter count from layer arithmetic alone.
    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        auto count = [&](const std::vector<LayerSpec>& layers) {
            for (const auto& l : layers) {
                if (l.kind == LayerKind::dense) n += static_cast<std::size_t>(l.in * l.out + l.out);
                if (l.kind == LayerKind::conv)
                    n += static_cast<std::size_t>(l.out * l.in * l.kernel * l.kernel + l.out);
            }
        };
        for (const auto& h : heads) count(h.layers);
        count(trunk);
        return n;
    }
};

inline nlohmann::ordered_json layer_to_json(const LayerSpec& l)
{
    nlohmann::ordered_json j;
    j["type"] = to_string(l.kind);
    switch (l.kind) {
    case LayerKind::dense:
        j["in"] = l.in;
        j["out"] = l.out;
        j["init"] = l.init;
        break;
    case LayerKind::conv:
        j["in"] = l.in;
        j["out"] = l.out;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["init"] = l.init;
        break;
    case LayerKind::scale: j["factor"] = l.factor; break;
    default: break;
    }
    return j;
}

inline LayerSpec layer_from_json(const nlohmann::ordered_json& j)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "dense") return LayerSpec::dense(j.at("in").get<int>(), j.at("out").get<int>(), j.at("init").get<double>());
    if (type == "conv") {
        auto l = LayerSpec::conv(j.at("in").get<int>(), j.at("out").get<int>(), j.at("kernel").get<int>(),
                                 j.at("stride").get<int>());
        l.init = j.at("init").get<double>();
        return l;
    }
    if (type == "relu") return LayerSpec::relu();
    if (type == "tanh") return LayerSpec::tanh();
    if (type == "scale") return LayerSpec::scale(j.at("factor").get<double>());
    throw data_error("unknown layer type '" + type + "'");
}

inline nlohmann::ordered_json to_json(const Architecture& a)
{
    nlohmann::ordered_json j;
    auto& heads = j["heads"] = nlohmann::ordered_json::array();
    for (const auto& h : a.heads) {
        nlohmann::ordered_json jh;
        jh["name"] = h.name;
        jh["input"] = h.input_shape;
        auto& layers = jh["layers"] = nlohmann::ordered_json::array();
        for (const auto& l : h.layers) layers.push_back(layer_to_json(l));
        heads.push_back(std::move(jh));
    }
    auto& trunk = j["trunk"] = nlohmann::ordered_json::array();
    for (const auto& l : a.trunk) trunk.push_back(layer_to_json(l));
    return j;
}

inline Architecture architecture_from_json(const nlohmann::ordered_json& j)
{
    Architecture a;
    for (const auto& jh : j.at("heads")) {
        HeadSpec h;
        h.name = jh.at("name").get<std::string>();
        h.input_shape = jh.at("input").get<Shape>();
        for (const auto& jl : jh.at("layers")) h.layers.push_back(layer_from_json(jl));
        a.heads.push_back(std::move(h));
    }
    for (const auto& jl : j.at("trunk")) a.trunk.push_back(layer_from_json(jl));
    return a;
}

inline std::string describe(const Architecture& a) { return to_json(a).dump(); }

struct BackwardMode {
    bool params = true; ///< accumulate parameter gradients
    bool inputs = false; ///< return gradients with respect to every head input
};

class Network {
public:
    Network() = default;

    /// Builds the layers and validates the shape chain. Parameters are zero
    /// until init() is called.
    explicit Network(Architecture arch) : arch_(std::move(arch))
    {
        if (arch_.heads.empty()) throw logic_error("network needs at least one head");
        std::size_t concat = 0;
        for (std::size_t h = 0; h < arch_.heads.size(); ++h) {
            const auto& hs = arch_.heads[h];
            Shape shape = hs.input_shape;
            std::vector<Layer> layers;
            for (std::size_t k = 0; k < hs.layers.size(); ++k) {
                shape = nn::output_shape(hs.layers[k], shape, "head '" + hs.name + "' layer " + std::to_string(k));
                layers.push_back(make_layer(hs.layers[k]));
            }
            head_out_.push_back(shape_size(shape));
            concat += shape_size(shape);
            heads_.push_back(std::move(layers));
        }
        Shape shape{concat};
        for (std::size_t k = 0; k < arch_.trunk.size(); ++k) {
            shape = nn::output_shape(arch_.trunk[k], shape, "trunk layer " + std::to_string(k));
            trunk_.push_back(make_layer(arch_.trunk[k]));
        }
        out_shape_ = shape;
    }

    Network(Architecture arch, Rng& init_rng) : Network(std::move(arch)) { init(init_rng); }

    void init(Rng& rng)
    {
        for (auto& head : heads_)
            for (auto& l : head) std::visit([&](auto& layer) { layer.init(rng); }, l);
        for (auto& l : trunk_) std::visit([&](auto& layer) { layer.init(rng); }, l);
        adam_steps = 0;
    }

    const Architecture& architecture() const { return arch_; }
    const Shape& output_shape() const { return out_shape_; }

    Tensor forward(std::span<const Tensor> inputs)
    {
        if (inputs.size() != heads_.size())
            throw logic_error("network expects " + std::to_string(heads_.size()) + " inputs, got " +
                              std::to_string(inputs.size()));
        const std::size_t batch = inputs[0].batch();
        std::vector<Tensor> head_outputs;
        head_outputs.reserve(heads_.size());
        for (std::size_t h = 0; h < heads_.size(); ++h) {
            const auto& hs = arch_.heads[h];
            if (inputs[h].batch() != batch || inputs[h].sample_shape() != hs.input_shape)
                throw logic_error("shape mismatch at head '" + hs.name + "' layer 0: expected [" +
                                  std::to_string(batch) + "]+" + shape_str(hs.input_shape) + ", got " +
                                  shape_str(inputs[h].shape));
            Tensor x = inputs[h];
            for (auto& l : heads_[h]) x = std::visit([&](auto& layer) { return layer.forward(x); }, l);
            head_outputs.push_back(std::move(x));
        }

        std::size_t width = 0;
        for (auto w : head_out_) width += w;
        Tensor x({batch, width});
        for (std::size_t b = 0; b < batch; ++b) {
            std::size_t off = 0;
            for (std::size_t h = 0; h < heads_.size(); ++h) {
                const double* src = head_outputs[h].data.data() + b * head_out_[h];
                std::copy(src, src + head_out_[h], x.data.data() + b * width + off);
                off += head_out_[h];
            }
        }
        for (auto& l : trunk_) x = std::visit([&](auto& layer) { return layer.forward(x); }, l);
        batch_ = batch;
        forwarded_ = true;
        return x;
    }

    Tensor forward(std::initializer_list<Tensor> inputs)
    {
        return forward(std::span<const Tensor>(inputs.begin(), inputs.size()));
    }

    /// Reverse pass for the most recent forward. Parameter gradients are
    /// accumulated (call zero_grad first); input gradients are returned per head.
    std::vector<Tensor> backward(const Tensor& grad_out, BackwardMode mode = {})
    {
        if (!forwarded_) throw logic_error("backward called before forward");
        if (grad_out.batch() != batch_ || grad_out.row_size() != shape_size(out_shape_))
            throw logic_error("gradient shape " + shape_str(grad_out.shape) + " does not match network output");

        Tensor g = grad_out;
        for (std::size_t k = trunk_.size(); k-- > 0;)
            g = std::visit([&](auto& layer) { return layer.backward(g, mode.params, true); }, trunk_[k]);

        std::vector<Tensor> input_grads;
        std::size_t width = g.row_size();
        std::size_t off = 0;
        for (std::size_t h = 0; h < heads_.size(); ++h) {
            const auto& hs = arch_.heads[h];
            Tensor gh({batch_, head_out_[h]});
            for (std::size_t b = 0; b < batch_; ++b) {
                const double* src = g.data.data() + b * width + off;
                std::copy(src, src + head_out_[h], gh.data.data() + b * head_out_[h]);
            }
            off += head_out_[h];
            // Restore the head's structured output shape for its last layer.
            gh.shape = head_output_shape(h);
            for (std::size_t k = heads_[h].size(); k-- > 0;) {
                const bool need_input = k > 0 || mode.inputs;
                gh = std::visit([&](auto& layer) { return layer.backward(gh, mode.params, need_input); }, heads_[h][k]);
            }
            if (mode.inputs) {
                Shape in{batch_};
                in.insert(in.end(), hs.input_shape.begin(), hs.input_shape.end());
                gh.shape = in;
                input_grads.push_back(std::move(gh));
            }
        }
        return input_grads;
    }

    void zero_grad()
    {
        for (auto* p : parameters()) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }

    std::vector<Param*> parameters()
    {
        std::vector<Param*> out;
        for (auto& head : heads_)
            for (auto& l : head) std::visit([&](auto& layer) { layer.params(out); }, l);
        for (auto& l : trunk_) std::visit([&](auto& layer) { layer.params(out); }, l);
        return out;
    }

    std::vector<const Param*> parameters() const
    {
        std::vector<const Param*> out;
        for (const auto& head : heads_)
            for (const auto& l : head) std::visit([&](const auto& layer) { layer.params(out); }, l);
        for (const auto& l : trunk_) std::visit([&](const auto& layer) { layer.params(out); }, l);
        return out;
    }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto* p : parameters()) n += p->value.size();
        return n;
    }

    /// Adam step counter (optimizer state shared by all parameters).
    std::int64_t adam_steps = 0;

private:
    Shape head_output_shape(std::size_t h) const
    {
        Shape shape = arch_.heads[h].input_shape;
        for (std::size_t k = 0; k < arch_.heads[h].layers.size(); ++k)
            shape = nn::output_shape(arch_.heads[h].layers[k], shape, "");
        Shape out{batch_};
        out.insert(out.end(), shape.begin(), shape.end());
        return out;
    }

    Architecture arch_;
    std::vector<std::vector<Layer>> heads_;
    std::vector<Layer> trunk_;
    std::vector<std::size_t> head_out_;
    Shape out_shape_;
    std::size_t batch_ = 0;
    bool forwarded_ = false;
};

} // namespace vmms::nn
