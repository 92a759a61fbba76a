// Benchmark of the compute kernels: the OpenMP path against the serial path
// and a naive triple-loop baseline, at training-representative sizes.

#include <chrono>
#include <functional>
#include <cstdio>
#include <vector>

#include "tgan/kernels.hpp"
#include "tgan/rng.hpp"

namespace K = tgan::kernels;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
    fn(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void naive_gemm(int m, int n, int k, const float* a, const float* b, float* c) {
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
}

std::vector<float> random_vec(tgan::Rng& rng, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return v;
}

} // namespace

int main() {
    tgan::Rng rng(12345);
    std::printf("threads available: %d\n\n", K::thread_count());
    std::printf("%-34s %10s %10s %10s %8s\n", "kernel", "naive ms", "serial ms", "omp ms", "speedup");

    struct GemmCase {
        const char* name;
        int m, n, k;
        int reps;
    };
    const GemmCase gemm_cases[] = {
        {"gemm 64x4096x256 (enc conv)", 64, 4096, 256, 20},
        {"gemm 256x1024x32 (dec convT)", 256, 1024, 32, 50},
        {"gemm 512x512x64 (attention)", 512, 512, 64, 50},
        {"gemm 128x16384x144 (out conv)", 128, 16384, 144, 5},
    };
    for (const auto& c : gemm_cases) {
        auto a = random_vec(rng, static_cast<std::size_t>(c.m) * c.k);
        auto b = random_vec(rng, static_cast<std::size_t>(c.k) * c.n);
        std::vector<float> out(static_cast<std::size_t>(c.m) * c.n);
        const double t_naive = time_ms(std::max(1, c.reps / 5),
                                       [&] { naive_gemm(c.m, c.n, c.k, a.data(), b.data(), out.data()); });
        K::set_parallel(false);
        const double t_serial =
            time_ms(c.reps, [&] { K::gemm_nn(c.m, c.n, c.k, a.data(), b.data(), out.data(), false); });
        K::set_parallel(true);
        const double t_omp =
            time_ms(c.reps, [&] { K::gemm_nn(c.m, c.n, c.k, a.data(), b.data(), out.data(), false); });
        std::printf("%-34s %10.3f %10.3f %10.3f %7.2fx\n", c.name, t_naive, t_serial, t_omp,
                    t_serial / t_omp);
    }

    // conv forward at the default training shape
    {
        const auto geom = K::ConvGeom::make(64, 32, 32, 128, 4, 2, 1);
        auto x = random_vec(rng, static_cast<std::size_t>(geom.ci) * geom.hi * geom.wi);
        auto w = random_vec(rng, static_cast<std::size_t>(geom.co) * geom.ci * 16);
        auto bias = random_vec(rng, static_cast<std::size_t>(geom.co));
        std::vector<float> cols(static_cast<std::size_t>(geom.ci) * 16 * geom.ho * geom.wo);
        std::vector<float> y(static_cast<std::size_t>(geom.co) * geom.ho * geom.wo);
        K::set_parallel(false);
        const double t_serial = time_ms(
            30, [&] { K::conv2d_forward(geom, x.data(), w.data(), bias.data(), cols.data(), y.data()); });
        K::set_parallel(true);
        const double t_omp = time_ms(
            30, [&] { K::conv2d_forward(geom, x.data(), w.data(), bias.data(), cols.data(), y.data()); });
        std::printf("%-34s %10s %10.3f %10.3f %7.2fx\n", "conv2d 64->128 k4s2 @32", "-", t_serial,
                    t_omp, t_serial / t_omp);
    }
    // bilinear upsample
    {
        const int c = 128, h = 16, w = 16;
        auto x = random_vec(rng, static_cast<std::size_t>(c) * h * w);
        std::vector<float> y(static_cast<std::size_t>(c) * 4 * h * w);
        K::set_parallel(false);
        const double t_serial = time_ms(200, [&] { K::upsample2x_forward(c, h, w, x.data(), y.data()); });
        K::set_parallel(true);
        const double t_omp = time_ms(200, [&] { K::upsample2x_forward(c, h, w, x.data(), y.data()); });
        std::printf("%-34s %10s %10.3f %10.3f %7.2fx\n", "upsample2x 128ch 16->32", "-", t_serial,
                    t_omp, t_serial / t_omp);
    }
    return 0;
}
