#include "tgan/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

#include "tgan/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace tgan::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// Tensor buffers sit right at glibc's mmap threshold; without this every
// layer allocation becomes an mmap/munmap pair plus page faults. Keep big
// blocks on the heap so they get reused.
struct MallocTuning {
    MallocTuning() {
#ifdef __GLIBC__
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
    }
};
const MallocTuning g_malloc_tuning{};
} // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

int thread_count() {
#ifdef _OPENMP
    return parallel_enabled() ? omp_get_max_threads() : 1;
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// GEMM. Each C element is a serial dot product over k; parallelism is over
// rows (or row groups), never over the reduction dimension.

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    const bool par = parallel_enabled() && m * n >= 4096;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        const float* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            const float* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    // A dot-product form cannot vectorize without FP reassociation; transpose
    // B once and run the axpy form instead. Per-element accumulation order
    // over k is unchanged, so results stay bit-identical.
    thread_local std::vector<float> bt;
    bt.resize(static_cast<std::size_t>(k) * n);
    float* btp = bt.data(); // hoisted: thread_local resolves per worker inside omp regions
    const bool part = parallel_enabled() && n * k >= 16384;
#pragma omp parallel for schedule(static) if (part)
    for (int j = 0; j < n; ++j) {
        const float* brow = b + static_cast<std::size_t>(j) * k;
        for (int p = 0; p < k; ++p) btp[static_cast<std::size_t>(p) * n + j] = brow[p];
    }
    const bool par = parallel_enabled() && m * n >= 4096;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        const float* arow = a + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const float av = arow[p];
            if (av == 0.0f) continue;
            const float* brow = btp + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    const bool par = parallel_enabled() && m * n >= 4096;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; ++i) {
        float* crow = c + static_cast<std::size_t>(i) * n;
        if (!accumulate) std::memset(crow, 0, sizeof(float) * static_cast<std::size_t>(n));
        for (int p = 0; p < k; ++p) {
            const float av = a[static_cast<std::size_t>(p) * m + i];
            if (av == 0.0f) continue;
            const float* brow = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution plumbing.

ConvGeom ConvGeom::make(int ci, int hi, int wi, int co, int k, int s, int p) {
    ConvGeom g{};
    g.ci = ci; g.hi = hi; g.wi = wi;
    g.co = co; g.kh = k; g.kw = k;
    g.sh = s; g.sw = s;
    g.ph = p; g.pw = p;
    g.ho = (hi + 2 * p - k) / s + 1;
    g.wo = (wi + 2 * p - k) / s + 1;
    if (g.ho <= 0 || g.wo <= 0)
        throw ShapeError("convolution output collapses to zero size");
    return g;
}

void im2col(const ConvGeom& g, const float* x, float* cols) {
    const int khw = g.kh * g.kw;
    const int out = g.ho * g.wo;
    const bool par = parallel_enabled() && g.ci * khw >= 8;
#pragma omp parallel for schedule(static) if (par)
    for (int r = 0; r < g.ci * khw; ++r) {
        const int ci = r / khw;
        const int kh = (r % khw) / g.kw;
        const int kw = r % g.kw;
        const float* xc = x + static_cast<std::size_t>(ci) * g.hi * g.wi;
        float* crow = cols + static_cast<std::size_t>(r) * out;
        for (int ho = 0; ho < g.ho; ++ho) {
            const int hi = ho * g.sh - g.ph + kh;
            float* cptr = crow + static_cast<std::size_t>(ho) * g.wo;
            if (hi < 0 || hi >= g.hi) {
                std::memset(cptr, 0, sizeof(float) * static_cast<std::size_t>(g.wo));
                continue;
            }
            const float* xrow = xc + static_cast<std::size_t>(hi) * g.wi;
            for (int wo = 0; wo < g.wo; ++wo) {
                const int wi = wo * g.sw - g.pw + kw;
                cptr[wo] = (wi >= 0 && wi < g.wi) ? xrow[wi] : 0.0f;
            }
        }
    }
}

namespace {
// per-axis valid (kernel offset, output index) pairs for every input index
std::vector<std::vector<std::pair<int, int>>> col2im_axis_table(int in_size, int ksz, int stride,
                                                                int pad, int out_size) {
    std::vector<std::vector<std::pair<int, int>>> table(static_cast<std::size_t>(in_size));
    for (int i = 0; i < in_size; ++i)
        for (int k = 0; k < ksz; ++k) {
            const int num = i + pad - k;
            if (num < 0 || num % stride != 0) continue;
            const int o = num / stride;
            if (o < out_size) table[static_cast<std::size_t>(i)].emplace_back(k, o);
        }
    return table;
}
} // namespace

void col2im(const ConvGeom& g, const float* cols, float* x) {
    const int khw = g.kh * g.kw;
    const int out = g.ho * g.wo;
    const auto table_h = col2im_axis_table(g.hi, g.kh, g.sh, g.ph, g.ho);
    const auto table_w = col2im_axis_table(g.wi, g.kw, g.sw, g.pw, g.wo);
    const bool par = parallel_enabled() && g.ci >= 2;
#pragma omp parallel for schedule(static) if (par)
    for (int ci = 0; ci < g.ci; ++ci) {
        float* xc = x + static_cast<std::size_t>(ci) * g.hi * g.wi;
        const float* cc = cols + static_cast<std::size_t>(ci) * khw * out;
        for (int hi = 0; hi < g.hi; ++hi) {
            for (int wi = 0; wi < g.wi; ++wi) {
                float acc = 0.0f;
                for (const auto& [kh, ho] : table_h[static_cast<std::size_t>(hi)])
                    for (const auto& [kw, wo] : table_w[static_cast<std::size_t>(wi)])
                        acc += cc[static_cast<std::size_t>(kh * g.kw + kw) * out + ho * g.wo + wo];
                xc[static_cast<std::size_t>(hi) * g.wi + wi] = acc;
            }
        }
    }
}

void conv2d_forward(const ConvGeom& g, const float* x, const float* w, const float* bias,
                    float* cols_scratch, float* y) {
    im2col(g, x, cols_scratch);
    const int out = g.ho * g.wo;
    gemm_nn(g.co, out, g.ci * g.kh * g.kw, w, cols_scratch, y, false);
    if (bias) {
        const bool par = parallel_enabled() && g.co >= 4;
#pragma omp parallel for schedule(static) if (par)
        for (int co = 0; co < g.co; ++co) {
            float* yrow = y + static_cast<std::size_t>(co) * out;
            const float b = bias[co];
            for (int j = 0; j < out; ++j) yrow[j] += b;
        }
    }
}

void conv2d_backward(const ConvGeom& g, const float* cols, const float* w, const float* dy,
                     float* dw, float* dbias, float* dcols_scratch, float* dx) {
    const int out = g.ho * g.wo;
    const int kdim = g.ci * g.kh * g.kw;
    if (dw) gemm_nt(g.co, kdim, out, dy, cols, dw, true);
    if (dbias) {
        for (int co = 0; co < g.co; ++co) {
            const float* dyrow = dy + static_cast<std::size_t>(co) * out;
            float acc = 0.0f;
            for (int j = 0; j < out; ++j) acc += dyrow[j];
            dbias[co] += acc;
        }
    }
    if (dx) {
        gemm_tn(kdim, out, g.co, w, dy, dcols_scratch, false);
        col2im(g, dcols_scratch, dx);
    }
}

// ---------------------------------------------------------------------------
// Bilinear 2x upsample, align_corners=false. For scale 2 the interpolation
// weights are the fixed pattern {0.75, 0.25}; the backward pass is written in
// gather form over input pixels so no scatter races exist.

namespace {
inline void up2_weights(int o, int in_size, int* i0, int* i1, float* w0, float* w1) {
    // source coordinate = o/2 - 0.25
    const float src = 0.5f * static_cast<float>(o) - 0.25f;
    int lo = static_cast<int>(std::floor(src));
    const float frac = src - static_cast<float>(lo);
    int hi = lo + 1;
    lo = std::clamp(lo, 0, in_size - 1);
    hi = std::clamp(hi, 0, in_size - 1);
    *i0 = lo;
    *i1 = hi;
    *w0 = 1.0f - frac;
    *w1 = frac;
}
} // namespace

void upsample2x_forward(int c, int h, int w, const float* x, float* y) {
    const int ho = 2 * h, wo = 2 * w;
    const bool par = parallel_enabled() && c >= 2;
#pragma omp parallel for schedule(static) if (par)
    for (int ci = 0; ci < c; ++ci) {
        const float* xc = x + static_cast<std::size_t>(ci) * h * w;
        float* yc = y + static_cast<std::size_t>(ci) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
            int y0, y1;
            float wy0, wy1;
            up2_weights(oy, h, &y0, &y1, &wy0, &wy1);
            for (int ox = 0; ox < wo; ++ox) {
                int x0, x1;
                float wx0, wx1;
                up2_weights(ox, w, &x0, &x1, &wx0, &wx1);
                yc[static_cast<std::size_t>(oy) * wo + ox] =
                    wy0 * (wx0 * xc[y0 * w + x0] + wx1 * xc[y0 * w + x1]) +
                    wy1 * (wx0 * xc[y1 * w + x0] + wx1 * xc[y1 * w + x1]);
            }
        }
    }
}

void upsample2x_backward(int c, int h, int w, const float* dy, float* dx) {
    const int ho = 2 * h, wo = 2 * w;
    const bool par = parallel_enabled() && c >= 2;
#pragma omp parallel for schedule(static) if (par)
    for (int ci = 0; ci < c; ++ci) {
        const float* dyc = dy + static_cast<std::size_t>(ci) * ho * wo;
        float* dxc = dx + static_cast<std::size_t>(ci) * h * w;
        for (int iy = 0; iy < h; ++iy) {
            for (int ix = 0; ix < w; ++ix) {
                float acc = 0.0f;
                // outputs whose stencil can touch (iy, ix)
                const int oy_lo = std::max(0, 2 * iy - 1);
                const int oy_hi = std::min(ho - 1, 2 * iy + 2);
                const int ox_lo = std::max(0, 2 * ix - 1);
                const int ox_hi = std::min(wo - 1, 2 * ix + 2);
                for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                    int y0, y1;
                    float wy0, wy1;
                    up2_weights(oy, h, &y0, &y1, &wy0, &wy1);
                    float wy = 0.0f;
                    if (y0 == iy) wy += wy0;
                    if (y1 == iy) wy += wy1;
                    if (wy == 0.0f) continue;
                    for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                        int x0, x1;
                        float wx0, wx1;
                        up2_weights(ox, w, &x0, &x1, &wx0, &wx1);
                        float wx = 0.0f;
                        if (x0 == ix) wx += wx0;
                        if (x1 == ix) wx += wx1;
                        if (wx == 0.0f) continue;
                        acc += wy * wx * dyc[static_cast<std::size_t>(oy) * wo + ox];
                    }
                }
                dxc[static_cast<std::size_t>(iy) * w + ix] = acc;
            }
        }
    }
}

void softmax_rows(int rows, int cols, const float* x, float* y) {
    const bool par = parallel_enabled() && rows >= 8;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < rows; ++i) {
        const float* xr = x + static_cast<std::size_t>(i) * cols;
        float* yr = y + static_cast<std::size_t>(i) * cols;
        float mx = xr[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
        float sum = 0.0f;
        for (int j = 0; j < cols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < cols; ++j) yr[j] *= inv;
    }
}

} // namespace tgan::kernels
