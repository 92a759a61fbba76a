#ifndef TGAN_KERNELS_HPP
#define TGAN_KERNELS_HPP

#include <cstddef>

// Compute kernels behind the network layers. Every kernel accumulates each
// output element with a fixed, serial reduction order; OpenMP only ever
// distributes independent output elements across threads. Results are
// therefore bit-identical for any thread count, and identical to the serial
// path. set_parallel(false) forces the serial path (used by the parity tests
// and the benchmark).
namespace tgan::kernels {

void set_parallel(bool enabled);
bool parallel_enabled();
int thread_count();

// C[M,N] = A[M,K] * B[K,N]   (+C if accumulate)
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate = false);
// C[M,N] = A[M,K] * B[N,K]^T
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate = false);
// C[M,N] = A[K,M]^T * B[K,N]
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate = false);

struct ConvGeom {
    int ci, hi, wi;     // input channels / spatial
    int co, kh, kw;     // output channels, kernel
    int sh, sw;         // stride
    int ph, pw;         // zero padding
    int ho, wo;         // derived output spatial

    static ConvGeom make(int ci, int hi, int wi, int co, int k, int s, int p);
};

// Scratch column buffer layout: [ci*kh*kw, ho*wo].
void im2col(const ConvGeom& g, const float* x, float* cols);
// Adjoint of im2col; gather form (each input element computed by one thread).
void col2im(const ConvGeom& g, const float* cols, float* x);

// Single-image convolution (used per batch element by the layers).
// y[co, ho*wo] = w[co, ci*kh*kw] * im2col(x); bias optional.
void conv2d_forward(const ConvGeom& g, const float* x, const float* w, const float* bias,
                    float* cols_scratch, float* y);
// dw += dy * cols^T ; dx = col2im(w^T * dy). Either output may be null.
void conv2d_backward(const ConvGeom& g, const float* cols, const float* w, const float* dy,
                     float* dw, float* dbias, float* dcols_scratch, float* dx);

// Factor-2 bilinear upsample (align_corners = false semantics).
void upsample2x_forward(int c, int h, int w, const float* x, float* y);
void upsample2x_backward(int c, int h, int w, const float* dy, float* dx);

// Row-wise softmax over an [rows, cols] matrix.
void softmax_rows(int rows, int cols, const float* x, float* y);

} // namespace tgan::kernels

#endif
