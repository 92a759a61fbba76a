#include "tgan/nn/layers.hpp"

#include <cmath>
#include <cstring>

namespace tgan::nn {

using kernels::ConvGeom;

namespace {

void fill_normal(Tensor& t, Rng& rng, float stddev) {
    for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, stddev));
}

// Per-sample weight-gradient scratch, reduced into the shared gradient in
// fixed sample order so results do not depend on the thread count.
void reduce_ordered(std::vector<float>& scratch, std::size_t per, int batch, float* dst) {
    for (int b = 0; b < batch; ++b) {
        const float* src = scratch.data() + static_cast<std::size_t>(b) * per;
        for (std::size_t i = 0; i < per; ++i) dst[i] += src[i];
    }
}

} // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad, bool bias)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), has_bias_(bias) {
    weight.init_shape(name + ".w", {out_c, in_c * k * k});
    if (bias) this->bias.init_shape(name + ".b", {out_c});
}

void Conv2d::init(Rng& rng, float stddev) {
    fill_normal(weight.value, rng, stddev);
    if (has_bias_) bias.value.zero();
}

void Conv2d::collect(ParamRefs& out) {
    out.push_back(&weight);
    if (has_bias_) out.push_back(&bias);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != in_c_)
        throw ShapeError("Conv2d " + weight.name + ": input " + x.shape_str());
    batch_ = x.dim(0);
    geom_ = ConvGeom::make(in_c_, x.dim(2), x.dim(3), out_c_, k_, stride_, pad_);
    const std::size_t kdim = static_cast<std::size_t>(geom_.ci) * k_ * k_;
    const std::size_t out = static_cast<std::size_t>(geom_.ho) * geom_.wo;
    cols_.resize(static_cast<std::size_t>(batch_) * kdim * out);
    Tensor y({batch_, out_c_, geom_.ho, geom_.wo});
    const std::size_t xs = x.numel() / batch_;
    const std::size_t ys = y.numel() / batch_;
    const bool par = kernels::parallel_enabled() && batch_ > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < batch_; ++b) {
        float* cols = cols_.data() + static_cast<std::size_t>(b) * kdim * out;
        kernels::conv2d_forward(geom_, x.ptr() + b * xs, weight.value.ptr(),
                                has_bias_ ? bias.value.ptr() : nullptr, cols, y.ptr() + b * ys);
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool need_dx, bool accumulate_params) {
    const std::size_t kdim = static_cast<std::size_t>(geom_.ci) * k_ * k_;
    const std::size_t out = static_cast<std::size_t>(geom_.ho) * geom_.wo;
    const std::size_t wsize = weight.value.numel();
    std::vector<float> dw_scratch(accumulate_params ? static_cast<std::size_t>(batch_) * wsize : 0, 0.0f);
    std::vector<float> db_scratch;
    if (has_bias_ && accumulate_params)
        db_scratch.assign(static_cast<std::size_t>(batch_) * out_c_, 0.0f);
    std::vector<float> dcols(static_cast<std::size_t>(batch_) * (need_dx ? kdim * out : 0));

    Tensor dx;
    if (need_dx) dx = Tensor({batch_, in_c_, geom_.hi, geom_.wi});
    const std::size_t dys = dy.numel() / batch_;
    const std::size_t dxs = need_dx ? dx.numel() / batch_ : 0;
    const bool par = kernels::parallel_enabled() && batch_ > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < batch_; ++b) {
        const float* cols = cols_.data() + static_cast<std::size_t>(b) * kdim * out;
        kernels::conv2d_backward(geom_, cols, weight.value.ptr(), dy.ptr() + b * dys,
                                 accumulate_params ? dw_scratch.data() + static_cast<std::size_t>(b) * wsize : nullptr,
                                 (has_bias_ && accumulate_params)
                                     ? db_scratch.data() + static_cast<std::size_t>(b) * out_c_
                                     : nullptr,
                                 need_dx ? dcols.data() + static_cast<std::size_t>(b) * kdim * out : nullptr,
                                 need_dx ? dx.ptr() + b * dxs : nullptr);
    }
    if (accumulate_params) {
        reduce_ordered(dw_scratch, wsize, batch_, weight.grad.ptr());
        if (has_bias_) reduce_ordered(db_scratch, out_c_, batch_, bias.grad.ptr());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad, bool bias)
    : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), has_bias_(bias) {
    weight.init_shape(name + ".w", {in_c, out_c * k * k});
    if (bias) this->bias.init_shape(name + ".b", {out_c});
}

void ConvTranspose2d::init(Rng& rng, float stddev) {
    fill_normal(weight.value, rng, stddev);
    if (has_bias_) bias.value.zero();
}

void ConvTranspose2d::collect(ParamRefs& out) {
    out.push_back(&weight);
    if (has_bias_) out.push_back(&bias);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != in_c_)
        throw ShapeError("ConvTranspose2d " + weight.name + ": input " + x.shape_str());
    batch_ = x.dim(0);
    const int h = x.dim(2), w = x.dim(3);
    const int ho = out_h(h), wo = (w - 1) * stride_ - 2 * pad_ + k_;
    // adjoint conv maps [co, ho, wo] -> [ci, h, w]
    geom_ = ConvGeom::make(out_c_, ho, wo, in_c_, k_, stride_, pad_);
    x_cache_ = x;
    Tensor y({batch_, out_c_, ho, wo});
    const std::size_t kdim = static_cast<std::size_t>(out_c_) * k_ * k_;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    std::vector<float> cols(static_cast<std::size_t>(batch_) * kdim * hw);
    const std::size_t xs = x.numel() / batch_;
    const std::size_t ys = y.numel() / batch_;
    const bool par = kernels::parallel_enabled() && batch_ > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < batch_; ++b) {
        float* c = cols.data() + static_cast<std::size_t>(b) * kdim * hw;
        kernels::gemm_tn(static_cast<int>(kdim), static_cast<int>(hw), in_c_,
                         weight.value.ptr(), x.ptr() + b * xs, c, false);
        kernels::col2im(geom_, c, y.ptr() + b * ys);
        if (has_bias_) {
            float* yb = y.ptr() + b * ys;
            const std::size_t spatial = static_cast<std::size_t>(ho) * wo;
            for (int co = 0; co < out_c_; ++co) {
                const float bv = bias.value.ptr()[co];
                float* yc = yb + static_cast<std::size_t>(co) * spatial;
                for (std::size_t j = 0; j < spatial; ++j) yc[j] += bv;
            }
        }
    }
    return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy, bool need_dx, bool accumulate_params) {
    const int h = x_cache_.dim(2), w = x_cache_.dim(3);
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t kdim = static_cast<std::size_t>(out_c_) * k_ * k_;
    const std::size_t wsize = weight.value.numel();
    std::vector<float> dcols(static_cast<std::size_t>(batch_) * kdim * hw);
    std::vector<float> dw_scratch(accumulate_params ? static_cast<std::size_t>(batch_) * wsize : 0, 0.0f);
    std::vector<float> db_scratch;
    if (has_bias_ && accumulate_params)
        db_scratch.assign(static_cast<std::size_t>(batch_) * out_c_, 0.0f);

    Tensor dx;
    if (need_dx) dx = Tensor({batch_, in_c_, h, w});
    const std::size_t dys = dy.numel() / batch_;
    const std::size_t spatial = dys / out_c_;
    const bool par = kernels::parallel_enabled() && batch_ > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int b = 0; b < batch_; ++b) {
        float* dc = dcols.data() + static_cast<std::size_t>(b) * kdim * hw;
        kernels::im2col(geom_, dy.ptr() + b * dys, dc);
        if (accumulate_params)
            kernels::gemm_nt(in_c_, static_cast<int>(kdim), static_cast<int>(hw),
                             x_cache_.ptr() + b * in_c_ * hw, dc,
                             dw_scratch.data() + static_cast<std::size_t>(b) * wsize, true);
        if (has_bias_ && accumulate_params) {
            float* db = db_scratch.data() + static_cast<std::size_t>(b) * out_c_;
            const float* dyb = dy.ptr() + b * dys;
            for (int co = 0; co < out_c_; ++co) {
                float acc = 0.0f;
                const float* dyc = dyb + static_cast<std::size_t>(co) * spatial;
                for (std::size_t j = 0; j < spatial; ++j) acc += dyc[j];
                db[co] = acc;
            }
        }
        if (need_dx) {
            kernels::gemm_nn(in_c_, static_cast<int>(hw), static_cast<int>(kdim),
                             weight.value.ptr(), dc, dx.ptr() + b * in_c_ * hw, false);
        }
    }
    if (accumulate_params) {
        reduce_ordered(dw_scratch, wsize, batch_, weight.grad.ptr());
        if (has_bias_) reduce_ordered(db_scratch, out_c_, batch_, bias.grad.ptr());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(std::string name, int channels, float eps) : c_(channels), eps_(eps) {
    gamma.init_shape(name + ".gamma", {channels});
    beta.init_shape(name + ".beta", {channels});
}

void InstanceNorm2d::init(Rng&) {
    std::fill(gamma.value.data.begin(), gamma.value.data.end(), 1.0f);
    beta.value.zero();
}

void InstanceNorm2d::collect(ParamRefs& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

Tensor InstanceNorm2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != c_)
        throw ShapeError("InstanceNorm2d " + gamma.name + ": input " + x.shape_str());
    in_shape_ = x.shape;
    const int b = x.dim(0);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    xhat_ = Tensor(x.shape);
    inv_std_.assign(static_cast<std::size_t>(b) * c_, 0.0f);
    Tensor y(x.shape);
    const int rows = b * c_;
    const bool par = kernels::parallel_enabled() && rows >= 2;
#pragma omp parallel for schedule(static) if (par)
    for (int r = 0; r < rows; ++r) {
        const float* xr = x.ptr() + static_cast<std::size_t>(r) * hw;
        float* xh = xhat_.ptr() + static_cast<std::size_t>(r) * hw;
        float* yr = y.ptr() + static_cast<std::size_t>(r) * hw;
        float mean = 0.0f;
        for (std::size_t j = 0; j < hw; ++j) mean += xr[j];
        mean /= static_cast<float>(hw);
        float var = 0.0f;
        for (std::size_t j = 0; j < hw; ++j) {
            const float d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<float>(hw);
        const float inv = 1.0f / std::sqrt(var + eps_);
        inv_std_[static_cast<std::size_t>(r)] = inv;
        const float g = gamma.value.ptr()[r % c_];
        const float bt = beta.value.ptr()[r % c_];
        for (std::size_t j = 0; j < hw; ++j) {
            xh[j] = (xr[j] - mean) * inv;
            yr[j] = g * xh[j] + bt;
        }
    }
    return y;
}

Tensor InstanceNorm2d::backward(const Tensor& dy, bool accumulate_params) {
    const int b = in_shape_[0];
    const std::size_t hw = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
    Tensor dx(in_shape_);
    // gamma/beta grads: parallel over channels, serial over batch
    const bool parc = accumulate_params && kernels::parallel_enabled() && c_ >= 2;
    if (accumulate_params) {
#pragma omp parallel for schedule(static) if (parc)
        for (int c = 0; c < c_; ++c) {
            float dg = 0.0f, db = 0.0f;
            for (int bi = 0; bi < b; ++bi) {
                const std::size_t r = static_cast<std::size_t>(bi) * c_ + c;
                const float* dyr = dy.ptr() + r * hw;
                const float* xh = xhat_.ptr() + r * hw;
                for (std::size_t j = 0; j < hw; ++j) {
                    dg += dyr[j] * xh[j];
                    db += dyr[j];
                }
            }
            gamma.grad.ptr()[c] += dg;
            beta.grad.ptr()[c] += db;
        }
    }
    const int rows = b * c_;
    const bool par = kernels::parallel_enabled() && rows >= 2;
#pragma omp parallel for schedule(static) if (par)
    for (int r = 0; r < rows; ++r) {
        const float* dyr = dy.ptr() + static_cast<std::size_t>(r) * hw;
        const float* xh = xhat_.ptr() + static_cast<std::size_t>(r) * hw;
        float* dxr = dx.ptr() + static_cast<std::size_t>(r) * hw;
        const float g = gamma.value.ptr()[r % c_];
        const float inv = inv_std_[static_cast<std::size_t>(r)];
        float mean_dy = 0.0f, mean_dy_xh = 0.0f;
        for (std::size_t j = 0; j < hw; ++j) {
            mean_dy += dyr[j];
            mean_dy_xh += dyr[j] * xh[j];
        }
        mean_dy /= static_cast<float>(hw);
        mean_dy_xh /= static_cast<float>(hw);
        for (std::size_t j = 0; j < hw; ++j)
            dxr[j] = g * inv * (dyr[j] - mean_dy - xh[j] * mean_dy_xh);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Activation

Tensor Activation::forward(const Tensor& x) {
    Tensor y(x.shape);
    const std::size_t n = x.numel();
    const float* xp = x.ptr();
    float* yp = y.ptr();
    const float s = (kind_ == Act::relu) ? 0.0f : slope_;
    const bool par = kernels::parallel_enabled() && n >= 16384;
    switch (kind_) {
    case Act::relu:
    case Act::leaky_relu:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            yp[i] = xp[i] > 0.0f ? xp[i] : s * xp[i];
        cache_ = x;
        break;
    case Act::tanh:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            yp[i] = std::tanh(xp[i]);
        cache_ = y;
        break;
    case Act::sigmoid:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            yp[i] = 1.0f / (1.0f + std::exp(-xp[i]));
        cache_ = y;
        break;
    }
    return y;
}

Tensor Activation::backward(const Tensor& dy) {
    Tensor dx(dy.shape);
    const std::size_t n = dy.numel();
    const float* dyp = dy.ptr();
    const float* cp = cache_.ptr();
    float* dxp = dx.ptr();
    const float s = (kind_ == Act::relu) ? 0.0f : slope_;
    const bool par = kernels::parallel_enabled() && n >= 16384;
    switch (kind_) {
    case Act::relu:
    case Act::leaky_relu:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            dxp[i] = cp[i] > 0.0f ? dyp[i] : s * dyp[i];
        break;
    case Act::tanh:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            dxp[i] = dyp[i] * (1.0f - cp[i] * cp[i]);
        break;
    case Act::sigmoid:
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i)
            dxp[i] = dyp[i] * cp[i] * (1.0f - cp[i]);
        break;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(std::string name, int in_dim, int out_dim, bool bias) : in_(in_dim), out_(out_dim), has_bias_(bias) {
    weight.init_shape(name + ".w", {out_dim, in_dim});
    if (bias) this->bias.init_shape(name + ".b", {out_dim});
}

void Linear::init(Rng& rng, float stddev) {
    fill_normal(weight.value, rng, stddev);
    if (has_bias_) bias.value.zero();
}

void Linear::collect(ParamRefs& out) {
    out.push_back(&weight);
    if (has_bias_) out.push_back(&bias);
}

Tensor Linear::forward(const Tensor& x) {
    if (x.ndim() != 2 || x.dim(1) != in_)
        throw ShapeError("Linear " + weight.name + ": input " + x.shape_str());
    x_cache_ = x;
    const int b = x.dim(0);
    Tensor y({b, out_});
    kernels::gemm_nt(b, out_, in_, x.ptr(), weight.value.ptr(), y.ptr(), false);
    if (has_bias_) {
        for (int i = 0; i < b; ++i) {
            float* yr = y.ptr() + static_cast<std::size_t>(i) * out_;
            const float* bp = bias.value.ptr();
            for (int j = 0; j < out_; ++j) yr[j] += bp[j];
        }
    }
    return y;
}

Tensor Linear::backward(const Tensor& dy, bool need_dx, bool accumulate_params) {
    const int b = x_cache_.dim(0);
    if (accumulate_params)
        kernels::gemm_tn(out_, in_, b, dy.ptr(), x_cache_.ptr(), weight.grad.ptr(), true);
    if (has_bias_ && accumulate_params) {
        float* bg = bias.grad.ptr();
        for (int j = 0; j < out_; ++j) {
            float acc = 0.0f;
            for (int i = 0; i < b; ++i) acc += dy.ptr()[static_cast<std::size_t>(i) * out_ + j];
            bg[j] += acc;
        }
    }
    if (!need_dx) return Tensor();
    Tensor dx({b, in_});
    kernels::gemm_nn(b, in_, out_, dy.ptr(), weight.value.ptr(), dx.ptr(), false);
    return dx;
}

// ---------------------------------------------------------------------------
// Upsample2x / GlobalAvgPool

Tensor Upsample2x::forward(const Tensor& x) {
    in_shape_ = x.shape;
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({b, c, 2 * h, 2 * w});
    const std::size_t xs = x.numel() / b, ys = y.numel() / b;
    for (int bi = 0; bi < b; ++bi)
        kernels::upsample2x_forward(c, h, w, x.ptr() + bi * xs, y.ptr() + bi * ys);
    return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
    const int b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    Tensor dx(in_shape_);
    const std::size_t xs = dx.numel() / b, ys = dy.numel() / b;
    for (int bi = 0; bi < b; ++bi)
        kernels::upsample2x_backward(c, h, w, dy.ptr() + bi * ys, dx.ptr() + bi * xs);
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    in_shape_ = x.shape;
    const int b = x.dim(0), c = x.dim(1);
    const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor y({b, c});
    for (int r = 0; r < b * c; ++r) {
        const float* xr = x.ptr() + static_cast<std::size_t>(r) * hw;
        float acc = 0.0f;
        for (std::size_t j = 0; j < hw; ++j) acc += xr[j];
        y.ptr()[r] = acc / static_cast<float>(hw);
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    const int b = in_shape_[0], c = in_shape_[1];
    const std::size_t hw = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
    Tensor dx(in_shape_);
    const float inv = 1.0f / static_cast<float>(hw);
    for (int r = 0; r < b * c; ++r) {
        const float g = dy.ptr()[r] * inv;
        float* dxr = dx.ptr() + static_cast<std::size_t>(r) * hw;
        for (std::size_t j = 0; j < hw; ++j) dxr[j] = g;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// AttentionFuse

AttentionFuse::AttentionFuse(std::string name, int spatial_dim, int d_a, int d_k)
    : hw_(spatial_dim), d_a_(d_a), d_k_(d_k) {
    w_q.init_shape(name + ".wq", {d_a, d_k});
    w_k.init_shape(name + ".wk", {spatial_dim, d_k});
    w_v.init_shape(name + ".wv", {spatial_dim, spatial_dim});
}

void AttentionFuse::init(Rng& rng, float stddev) {
    fill_normal(w_q.value, rng, stddev);
    fill_normal(w_k.value, rng, stddev);
    fill_normal(w_v.value, rng, stddev);
}

void AttentionFuse::collect(ParamRefs& out) {
    out.push_back(&w_q);
    out.push_back(&w_k);
    out.push_back(&w_v);
}

Tensor AttentionFuse::forward(const Tensor& fx, const Tensor& fa) {
    if (fx.ndim() != 3 || fx.dim(2) != hw_)
        throw ShapeError("AttentionFuse: W_k expects token width " + std::to_string(hw_) +
                         ", got feature " + fx.shape_str());
    if (fa.ndim() != 3 || fa.dim(2) != d_a_ || fa.dim(0) != fx.dim(0) || fa.dim(1) != fx.dim(1))
        throw ShapeError("AttentionFuse: condition " + fa.shape_str() + " vs features " + fx.shape_str());
    const int b = fx.dim(0), c = fx.dim(1);
    fx_cache_ = fx;
    fa_cache_ = fa;
    q_.assign(b, Tensor());
    k_.assign(b, Tensor());
    v_.assign(b, Tensor());
    p_.assign(b, Tensor());
    Tensor out(fx.shape);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_k_));
    const bool par = kernels::parallel_enabled() && b > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int bi = 0; bi < b; ++bi) {
        const float* fxb = fx.ptr() + static_cast<std::size_t>(bi) * c * hw_;
        const float* fab = fa.ptr() + static_cast<std::size_t>(bi) * c * d_a_;
        Tensor q({c, d_k_}), k({c, d_k_}), v({c, hw_}), s({c, c}), p({c, c});
        kernels::gemm_nn(c, d_k_, d_a_, fab, w_q.value.ptr(), q.ptr(), false);
        kernels::gemm_nn(c, d_k_, hw_, fxb, w_k.value.ptr(), k.ptr(), false);
        kernels::gemm_nn(c, hw_, hw_, fxb, w_v.value.ptr(), v.ptr(), false);
        kernels::gemm_nt(c, c, d_k_, q.ptr(), k.ptr(), s.ptr(), false);
        for (auto& e : s.data) e *= scale;
        kernels::softmax_rows(c, c, s.ptr(), p.ptr());
        float* ob = out.ptr() + static_cast<std::size_t>(bi) * c * hw_;
        kernels::gemm_nn(c, hw_, c, p.ptr(), v.ptr(), ob, false);
        for (int j = 0; j < c * hw_; ++j) ob[j] += fxb[j]; // residual
        q_[bi] = std::move(q);
        k_[bi] = std::move(k);
        v_[bi] = std::move(v);
        p_[bi] = std::move(p);
    }
    return out;
}

Tensor AttentionFuse::backward(const Tensor& dout, Tensor& d_fa, bool accumulate_params) {
    const int b = fx_cache_.dim(0), c = fx_cache_.dim(1);
    Tensor dfx(fx_cache_.shape);
    d_fa = Tensor(fa_cache_.shape);
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_k_));
    std::vector<float> dwq(static_cast<std::size_t>(b) * w_q.value.numel(), 0.0f);
    std::vector<float> dwk(static_cast<std::size_t>(b) * w_k.value.numel(), 0.0f);
    std::vector<float> dwv(static_cast<std::size_t>(b) * w_v.value.numel(), 0.0f);
    const bool par = kernels::parallel_enabled() && b > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int bi = 0; bi < b; ++bi) {
        const float* dob = dout.ptr() + static_cast<std::size_t>(bi) * c * hw_;
        const float* fxb = fx_cache_.ptr() + static_cast<std::size_t>(bi) * c * hw_;
        const float* fab = fa_cache_.ptr() + static_cast<std::size_t>(bi) * c * d_a_;
        const Tensor& q = q_[bi];
        const Tensor& k = k_[bi];
        const Tensor& v = v_[bi];
        const Tensor& p = p_[bi];
        Tensor dp({c, c}), ds({c, c}), dq({c, d_k_}), dk({c, d_k_}), dv({c, hw_});
        // dO = dout (residual handled at the end)
        kernels::gemm_nt(c, c, hw_, dob, v.ptr(), dp.ptr(), false);
        kernels::gemm_tn(c, hw_, c, p.ptr(), dob, dv.ptr(), false);
        // softmax backward per row, then fold in the 1/sqrt(dk) scale
        for (int i = 0; i < c; ++i) {
            const float* pr = p.ptr() + static_cast<std::size_t>(i) * c;
            const float* dpr = dp.ptr() + static_cast<std::size_t>(i) * c;
            float dot = 0.0f;
            for (int j = 0; j < c; ++j) dot += pr[j] * dpr[j];
            float* dsr = ds.ptr() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) dsr[j] = pr[j] * (dpr[j] - dot) * scale;
        }
        kernels::gemm_nn(c, d_k_, c, ds.ptr(), k.ptr(), dq.ptr(), false);
        kernels::gemm_tn(c, d_k_, c, ds.ptr(), q.ptr(), dk.ptr(), false);
        // weight grads (per-sample scratch)
        if (accumulate_params) {
            kernels::gemm_tn(d_a_, d_k_, c, fab, dq.ptr(), dwq.data() + static_cast<std::size_t>(bi) * w_q.value.numel(), true);
            kernels::gemm_tn(hw_, d_k_, c, fxb, dk.ptr(), dwk.data() + static_cast<std::size_t>(bi) * w_k.value.numel(), true);
            kernels::gemm_tn(hw_, hw_, c, fxb, dv.ptr(), dwv.data() + static_cast<std::size_t>(bi) * w_v.value.numel(), true);
        }
        // input grads
        float* dfab = d_fa.ptr() + static_cast<std::size_t>(bi) * c * d_a_;
        kernels::gemm_nt(c, d_a_, d_k_, dq.ptr(), w_q.value.ptr(), dfab, false);
        float* dfxb = dfx.ptr() + static_cast<std::size_t>(bi) * c * hw_;
        kernels::gemm_nt(c, hw_, d_k_, dk.ptr(), w_k.value.ptr(), dfxb, false);
        kernels::gemm_nt(c, hw_, hw_, dv.ptr(), w_v.value.ptr(), dfxb, true);
        for (int j = 0; j < c * hw_; ++j) dfxb[j] += dob[j]; // residual path
    }
    if (accumulate_params) {
        reduce_ordered(dwq, w_q.value.numel(), b, w_q.grad.ptr());
        reduce_ordered(dwk, w_k.value.numel(), b, w_k.grad.ptr());
        reduce_ordered(dwv, w_v.value.numel(), b, w_v.grad.ptr());
    }
    return dfx;
}

// ---------------------------------------------------------------------------

Tensor channel_concat(const Tensor& a, const Tensor& b) {
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("channel_concat: " + a.shape_str() + " vs " + b.shape_str());
    const int bs = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    Tensor y({bs, ca + cb, a.dim(2), a.dim(3)});
    for (int bi = 0; bi < bs; ++bi) {
        std::memcpy(y.ptr() + (static_cast<std::size_t>(bi) * (ca + cb)) * hw,
                    a.ptr() + static_cast<std::size_t>(bi) * ca * hw, sizeof(float) * ca * hw);
        std::memcpy(y.ptr() + (static_cast<std::size_t>(bi) * (ca + cb) + ca) * hw,
                    b.ptr() + static_cast<std::size_t>(bi) * cb * hw, sizeof(float) * cb * hw);
    }
    return y;
}

void channel_split(const Tensor& dcat, int c_a, Tensor& da, Tensor& db) {
    const int bs = dcat.dim(0), c = dcat.dim(1);
    const int cb = c - c_a;
    const std::size_t hw = static_cast<std::size_t>(dcat.dim(2)) * dcat.dim(3);
    da = Tensor({bs, c_a, dcat.dim(2), dcat.dim(3)});
    db = Tensor({bs, cb, dcat.dim(2), dcat.dim(3)});
    for (int bi = 0; bi < bs; ++bi) {
        std::memcpy(da.ptr() + static_cast<std::size_t>(bi) * c_a * hw,
                    dcat.ptr() + (static_cast<std::size_t>(bi) * c) * hw, sizeof(float) * c_a * hw);
        std::memcpy(db.ptr() + static_cast<std::size_t>(bi) * cb * hw,
                    dcat.ptr() + (static_cast<std::size_t>(bi) * c + c_a) * hw, sizeof(float) * cb * hw);
    }
}

} // namespace tgan::nn
