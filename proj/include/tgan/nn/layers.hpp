#ifndef TGAN_NN_LAYERS_HPP
#define TGAN_NN_LAYERS_HPP

#include <string>
#include <vector>

#include "tgan/kernels.hpp"
#include "tgan/rng.hpp"
#include "tgan/tensor.hpp"

namespace tgan::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    void init_shape(std::string n, std::vector<int> shape) {
        name = std::move(n);
        value = Tensor(shape);
        grad = Tensor(std::move(shape));
    }
};

using ParamRefs = std::vector<Param*>;

// Batched stride-2 / stride-1 convolution. Weight layout [co, ci*k*k].
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad, bool bias = true);

    void init(Rng& rng, float stddev = 0.02f);
    void collect(ParamRefs& out);

    Tensor forward(const Tensor& x);           // x [B,ci,H,W]
    Tensor backward(const Tensor& dy, bool need_dx = true, bool accumulate_params = true);

    int out_h(int h) const { return (h + 2 * pad_ - k_) / stride_ + 1; }
    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }

    Param weight, bias;

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    bool has_bias_ = true;
    kernels::ConvGeom geom_{};
    int batch_ = 0;
    std::vector<float> cols_;   // cached im2col per sample for backward
};

// Transposed convolution; weight layout [ci, co*k*k]. Output spatial size is
// (H-1)*stride - 2*pad + k.
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad, bool bias = true);

    void init(Rng& rng, float stddev = 0.02f);
    void collect(ParamRefs& out);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy, bool need_dx = true, bool accumulate_params = true);

    int out_h(int h) const { return (h - 1) * stride_ - 2 * pad_ + k_; }

    Param weight, bias;

private:
    int in_c_ = 0, out_c_ = 0, k_ = 0, stride_ = 2, pad_ = 1;
    bool has_bias_ = true;
    kernels::ConvGeom geom_{};   // geometry of the adjoint convolution
    int batch_ = 0;
    Tensor x_cache_;
};

class InstanceNorm2d {
public:
    InstanceNorm2d() = default;
    explicit InstanceNorm2d(std::string name, int channels, float eps = 1e-5f);

    void init(Rng& rng);
    void collect(ParamRefs& out);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy, bool accumulate_params = true);

    Param gamma, beta;

private:
    int c_ = 0;
    float eps_ = 1e-5f;
    Tensor xhat_;
    std::vector<float> inv_std_;
    std::vector<int> in_shape_;
};

enum class Act { relu, leaky_relu, tanh, sigmoid };

class Activation {
public:
    Activation() = default;
    explicit Activation(Act kind, float slope = 0.2f) : kind_(kind), slope_(slope) {}

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    Act kind_ = Act::relu;
    float slope_ = 0.2f;
    Tensor cache_; // input for (leaky_)relu, output for tanh/sigmoid
};

class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim, bool bias = true);

    void init(Rng& rng, float stddev = 0.02f);
    void collect(ParamRefs& out);

    Tensor forward(const Tensor& x);           // x [B, in]
    Tensor backward(const Tensor& dy, bool need_dx = true, bool accumulate_params = true);

    Param weight, bias;

private:
    int in_ = 0, out_ = 0;
    bool has_bias_ = true;
    Tensor x_cache_;
};

class Upsample2x {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    std::vector<int> in_shape_;
};

class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x);           // [B,C,H,W] -> [B,C]
    Tensor backward(const Tensor& dy);

private:
    std::vector<int> in_shape_;
};

// Cross-attention bottleneck fusion: channel tokens of the image features
// attend to nothing but are queried by the age-condition features. Keys and
// values come from the flattened per-channel spatial maps; the attended
// output is added back onto the image features.
class AttentionFuse {
public:
    AttentionFuse() = default;
    AttentionFuse(std::string name, int spatial_dim, int d_a, int d_k);

    void init(Rng& rng, float stddev = 0.02f);
    void collect(ParamRefs& out);

    // fx [B, C, hw], fa [B, C, d_a] -> fused [B, C, hw] (residual included)
    Tensor forward(const Tensor& fx, const Tensor& fa);
    // returns d_fx; writes d_fa
    Tensor backward(const Tensor& dout, Tensor& d_fa, bool accumulate_params = true);

    // attention rows of the most recent forward, sample b: [C, C]
    const std::vector<Tensor>& attention_rows() const { return p_; }

    Param w_q, w_k, w_v;

private:
    int hw_ = 0, d_a_ = 0, d_k_ = 0;
    Tensor fx_cache_, fa_cache_;
    std::vector<Tensor> q_, k_, v_, p_;
};

// Channel concat / split helpers for U-Net skips.
Tensor channel_concat(const Tensor& a, const Tensor& b);
void channel_split(const Tensor& dcat, int c_a, Tensor& da, Tensor& db);

} // namespace tgan::nn

#endif
