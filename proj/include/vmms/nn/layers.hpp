#pragma once

// Differentiable layers. Each layer caches what its backward pass needs
// during forward; backward consumes upstream gradients for the whole batch.

#include <cmath>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "tensor.hpp"

namespace vmms::nn {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;
using CRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

/// Trainable tensor with its gradient and Adam moments.
struct Param {
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;

    explicit Param(Shape s = {}) : value(s), grad(s), m(s), v(s) {}
};

enum class LayerKind { dense, conv, relu, tanh, scale };

inline std::string to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::scale: return "scale";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int in = 0;  ///< dense: input features; conv: input channels
    int out = 0; ///< dense: output features; conv: output channels
    int kernel = 0;
    int stride = 1;
    double factor = 1.0; ///< scale layers
    double init = 0.0;   ///< uniform init bound; 0 selects 1/sqrt(fan_in)

    static LayerSpec dense(int in, int out, double init = 0.0) { return {LayerKind::dense, in, out, 0, 1, 1.0, init}; }
    static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride)
    {
        return {LayerKind::conv, in_ch, out_ch, kernel, stride, 1.0, 0.0};
    }
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec tanh() { return {LayerKind::tanh}; }
    static LayerSpec scale(double k) { return {LayerKind::scale, 0, 0, 0, 1, k, 0.0}; }

    bool operator==(const LayerSpec&) const = default;
};

/// Per-sample output shape; throws on an incompatible input shape.
inline Shape output_shape(const LayerSpec& spec, const Shape& in, const std::string& where)
{
    switch (spec.kind) {
    case LayerKind::dense:
        if (shape_size(in) != static_cast<std::size_t>(spec.in))
            throw logic_error("shape mismatch at " + where + ": dense expects " + std::to_string(spec.in) +
                              " inputs, got " + shape_str(in));
        return {static_cast<std::size_t>(spec.out)};
    case LayerKind::conv: {
        if (in.size() != 3 || in[0] != static_cast<std::size_t>(spec.in) || in[1] < static_cast<std::size_t>(spec.kernel) ||
            in[2] < static_cast<std::size_t>(spec.kernel))
            throw logic_error("shape mismatch at " + where + ": conv expects [" + std::to_string(spec.in) +
                              ",H,W] with H,W >= " + std::to_string(spec.kernel) + ", got " + shape_str(in));
        const auto k = static_cast<std::size_t>(spec.kernel);
        const auto s = static_cast<std::size_t>(spec.stride);
        return {static_cast<std::size_t>(spec.out), (in[1] - k) / s + 1, (in[2] - k) / s + 1};
    }
    default: return in;
    }
}

inline void check_forwarded(bool cached, const char* name)
{
    if (!cached) throw logic_error(std::string("backward called before forward on ") + name + " layer");
}

class Dense {
public:
    explicit Dense(const LayerSpec& spec)
        : spec_(spec), w_({static_cast<std::size_t>(spec.out), static_cast<std::size_t>(spec.in)}),
          b_({static_cast<std::size_t>(spec.out)})
    {
    }

    const LayerSpec& spec() const { return spec_; }

    void init(Rng& rng)
    {
        const double bound = spec_.init > 0.0 ? spec_.init : 1.0 / std::sqrt(static_cast<double>(spec_.in));
        for (auto& x : w_.value.data) x = rng.uniform(-bound, bound);
        for (auto& x : b_.value.data) x = rng.uniform(-bound, bound);
    }

    Tensor forward(const Tensor& x)
    {
        const auto batch = static_cast<Eigen::Index>(x.batch());
        input_ = x;
        cached_ = true;
        Tensor y({x.batch(), static_cast<std::size_t>(spec_.out)});
        CMapR X(x.data.data(), batch, spec_.in);
        CMapR W(w_.value.data.data(), spec_.out, spec_.in);
        MapR Y(y.data.data(), batch, spec_.out);
        Y.noalias() = X * W.transpose();
        Y.rowwise() += CRowVecMap(b_.value.data.data(), spec_.out);
        return y;
    }

    Tensor backward(const Tensor& gy, bool param_grads, bool input_grad)
    {
        check_forwarded(cached_, "dense");
        const auto batch = static_cast<Eigen::Index>(gy.batch());
        CMapR G(gy.data.data(), batch, spec_.out);
        if (param_grads) {
            CMapR X(input_.data.data(), batch, spec_.in);
            MapR(w_.grad.data.data(), spec_.out, spec_.in).noalias() += G.transpose() * X;
            RowVecMap(b_.grad.data.data(), spec_.out) += G.colwise().sum();
        }
        Tensor gx;
        if (input_grad) {
            gx = Tensor(input_.shape);
            MapR(gx.data.data(), batch, spec_.in).noalias() = G * CMapR(w_.value.data.data(), spec_.out, spec_.in);
        }
        return gx;
    }

    void params(std::vector<Param*>& out) { out.push_back(&w_); out.push_back(&b_); }
    void params(std::vector<const Param*>& out) const { out.push_back(&w_); out.push_back(&b_); }

private:
    LayerSpec spec_;
    Param w_;
    Param b_;
    Tensor input_;
    bool cached_ = false;
};

/// 2D convolution without padding, computed as im2col followed by one GEMM
/// over the whole batch.
class Conv2d {
public:
    explicit Conv2d(const LayerSpec& spec)
        : spec_(spec),
          w_({static_cast<std::size_t>(spec.out), static_cast<std::size_t>(spec.in * spec.kernel * spec.kernel)}),
          b_({static_cast<std::size_t>(spec.out)})
    {
    }

    const LayerSpec& spec() const { return spec_; }

    void init(Rng& rng)
    {
        const double fan_in = static_cast<double>(spec_.in * spec_.kernel * spec_.kernel);
        const double bound = spec_.init > 0.0 ? spec_.init : 1.0 / std::sqrt(fan_in);
        for (auto& x : w_.value.data) x = rng.uniform(-bound, bound);
        for (auto& x : b_.value.data) x = rng.uniform(-bound, bound);
    }

    Tensor forward(const Tensor& x)
    {
        in_shape_ = x.shape;
        const Index B = static_cast<Index>(x.shape[0]);
        const Index C = spec_.in, H = static_cast<Index>(x.shape[2]), W = static_cast<Index>(x.shape[3]);
        const Index k = spec_.kernel, s = spec_.stride;
        oh_ = (H - k) / s + 1;
        ow_ = (W - k) / s + 1;
        const Index P = oh_ * ow_;
        const Index K = C * k * k;

        col_.resize(K, B * P);
        for (Index b = 0; b < B; ++b)
            for (Index c = 0; c < C; ++c)
                for (Index ki = 0; ki < k; ++ki)
                    for (Index kj = 0; kj < k; ++kj) {
                        const Index row = (c * k + ki) * k + kj;
                        double* dst = col_.data() + row * B * P + b * P;
                        const double* src = x.data.data() + ((b * C + c) * H + ki) * W + kj;
                        for (Index i = 0; i < oh_; ++i)
                            for (Index j = 0; j < ow_; ++j) dst[i * ow_ + j] = src[i * s * W + j * s];
                    }
        cached_ = true;

        MatR y2(spec_.out, B * P);
        y2.noalias() = CMapR(w_.value.data.data(), spec_.out, K) * col_;
        Tensor y({x.shape[0], static_cast<std::size_t>(spec_.out), static_cast<std::size_t>(oh_),
                  static_cast<std::size_t>(ow_)});
        for (Index b = 0; b < B; ++b)
            for (Index oc = 0; oc < spec_.out; ++oc) {
                const double bias = b_.value.data[static_cast<std::size_t>(oc)];
                const double* src = y2.data() + oc * B * P + b * P;
                double* dst = y.data.data() + (b * spec_.out + oc) * P;
                for (Index p = 0; p < P; ++p) dst[p] = src[p] + bias;
            }
        return y;
    }

    Tensor backward(const Tensor& gy, bool param_grads, bool input_grad)
    {
        check_forwarded(cached_, "conv");
        const Index B = static_cast<Index>(in_shape_[0]);
        const Index C = spec_.in, H = static_cast<Index>(in_shape_[2]), W = static_cast<Index>(in_shape_[3]);
        const Index k = spec_.kernel, s = spec_.stride;
        const Index P = oh_ * ow_;
        const Index K = C * k * k;

        MatR g2(spec_.out, B * P);
        for (Index b = 0; b < B; ++b)
            for (Index oc = 0; oc < spec_.out; ++oc) {
                const double* src = gy.data.data() + (b * spec_.out + oc) * P;
                double* dst = g2.data() + oc * B * P + b * P;
                for (Index p = 0; p < P; ++p) dst[p] = src[p];
            }
        if (param_grads) {
            MapR(w_.grad.data.data(), spec_.out, K).noalias() += g2 * col_.transpose();
            Eigen::Map<Eigen::VectorXd>(b_.grad.data.data(), spec_.out) += g2.rowwise().sum();
        }
        Tensor gx;
        if (input_grad) {
            MatR dcol(K, B * P);
            dcol.noalias() = CMapR(w_.value.data.data(), spec_.out, K).transpose() * g2;
            gx = Tensor(in_shape_);
            for (Index b = 0; b < B; ++b)
                for (Index c = 0; c < C; ++c)
                    for (Index ki = 0; ki < k; ++ki)
                        for (Index kj = 0; kj < k; ++kj) {
                            const Index row = (c * k + ki) * k + kj;
                            const double* src = dcol.data() + row * B * P + b * P;
                            double* dst = gx.data.data() + ((b * C + c) * H + ki) * W + kj;
                            for (Index i = 0; i < oh_; ++i)
                                for (Index j = 0; j < ow_; ++j) dst[i * s * W + j * s] += src[i * ow_ + j];
                        }
        }
        return gx;
    }

    void params(std::vector<Param*>& out) { out.push_back(&w_); out.push_back(&b_); }
    void params(std::vector<const Param*>& out) const { out.push_back(&w_); out.push_back(&b_); }

private:
    using Index = Eigen::Index;

    LayerSpec spec_;
    Param w_;
    Param b_;
    MatR col_;
    Shape in_shape_;
    Index oh_ = 0;
    Index ow_ = 0;
    bool cached_ = false;
};

class Relu {
public:
    explicit Relu(const LayerSpec& spec) : spec_(spec) {}
    const LayerSpec& spec() const { return spec_; }
    void init(Rng&) {}

    Tensor forward(const Tensor& x)
    {
        out_ = x;
        for (auto& v : out_.data) v = v > 0.0 ? v : 0.0;
        cached_ = true;
        return out_;
    }

    Tensor backward(const Tensor& gy, bool, bool)
    {
        check_forwarded(cached_, "relu");
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (out_.data[i] <= 0.0) gx.data[i] = 0.0;
        return gx;
    }

    void params(std::vector<Param*>&) {}
    void params(std::vector<const Param*>&) const {}

private:
    LayerSpec spec_;
    Tensor out_;
    bool cached_ = false;
};

class Tanh {
public:
    explicit Tanh(const LayerSpec& spec) : spec_(spec) {}
    const LayerSpec& spec() const { return spec_; }
    void init(Rng&) {}

    Tensor forward(const Tensor& x)
    {
        out_ = x;
        for (auto& v : out_.data) v = std::tanh(v);
        cached_ = true;
        return out_;
    }

    Tensor backward(const Tensor& gy, bool, bool)
    {
        check_forwarded(cached_, "tanh");
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] *= 1.0 - out_.data[i] * out_.data[i];
        return gx;
    }

    void params(std::vector<Param*>&) {}
    void params(std::vector<const Param*>&) const {}

private:
    LayerSpec spec_;
    Tensor out_;
    bool cached_ = false;
};

class Scale {
public:
    explicit Scale(const LayerSpec& spec) : spec_(spec) {}
    const LayerSpec& spec() const { return spec_; }
    void init(Rng&) {}

    Tensor forward(const Tensor& x)
    {
        cached_ = true;
        Tensor y = x;
        for (auto& v : y.data) v *= spec_.factor;
        return y;
    }

    Tensor backward(const Tensor& gy, bool, bool)
    {
        check_forwarded(cached_, "scale");
        Tensor gx = gy;
        for (auto& v : gx.data) v *= spec_.factor;
        return gx;
    }

    void params(std::vector<Param*>&) {}
    void params(std::vector<const Param*>&) const {}

private:
    LayerSpec spec_;
    bool cached_ = false;
};

using Layer = std::variant<Dense, Conv2d, Relu, Tanh, Scale>;

inline Layer make_layer(const LayerSpec& spec)
{
    switch (spec.kind) {
    case LayerKind::dense: return Dense(spec);
    case LayerKind::conv: return Conv2d(spec);
    case LayerKind::relu: return Relu(spec);
    case LayerKind::tanh: return Tanh(spec);
    case LayerKind::scale: return Scale(spec);
    }
    throw logic_error("unknown layer kind");
}

} // namespace vmms::nn
