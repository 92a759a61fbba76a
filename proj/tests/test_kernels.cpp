#include "doctest.h"

#include <vector>

#include "ref_ops.hpp"
#include "tgan/common.hpp"
#include "tgan/kernels.hpp"
#include "tgan/rng.hpp"

using namespace tgan;
namespace K = tgan::kernels;

namespace {

std::vector<float> random_floats(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

std::vector<double> widen(const std::vector<float>& v) {
    return std::vector<double>(v.begin(), v.end());
}

void check_close(const std::vector<float>& got, const std::vector<double>& want, double tol) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(static_cast<double>(got[i]) - want[i]) <= tol * (1.0 + std::abs(want[i])));
}

struct ParallelGuard {
    explicit ParallelGuard(bool on) { K::set_parallel(on); }
    ~ParallelGuard() { K::set_parallel(true); }
};

} // namespace

TEST_CASE("gemm variants match the naive double oracle") {
    Rng rng(42);
    const int m = 17, n = 23, k = 11;
    auto a = random_floats(rng, static_cast<std::size_t>(m) * k);
    auto b = random_floats(rng, static_cast<std::size_t>(k) * n);

    std::vector<float> c(static_cast<std::size_t>(m) * n);
    K::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
    check_close(c, refops::gemm_nn(m, n, k, widen(a), widen(b)), 1e-5);

    // nt: B given as [n,k]
    auto bt = random_floats(rng, static_cast<std::size_t>(n) * k);
    std::vector<double> bt_as_nn(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
        for (int p = 0; p < k; ++p) bt_as_nn[p * n + j] = bt[j * k + p];
    K::gemm_nt(m, n, k, a.data(), bt.data(), c.data(), false);
    check_close(c, refops::gemm_nn(m, n, k, widen(a), bt_as_nn), 1e-5);

    // tn: A given as [k,m]
    auto at = random_floats(rng, static_cast<std::size_t>(k) * m);
    std::vector<double> at_as_nn(static_cast<std::size_t>(m) * k);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) at_as_nn[i * k + p] = at[p * m + i];
    K::gemm_tn(m, n, k, at.data(), b.data(), c.data(), false);
    check_close(c, refops::gemm_nn(m, n, k, at_as_nn, widen(b)), 1e-5);
}

TEST_CASE("gemm accumulate flag adds onto C") {
    Rng rng(1);
    const int m = 5, n = 7, k = 3;
    auto a = random_floats(rng, static_cast<std::size_t>(m) * k);
    auto b = random_floats(rng, static_cast<std::size_t>(k) * n);
    std::vector<float> c0(static_cast<std::size_t>(m) * n, 0.5f);
    auto c1 = c0;
    K::gemm_nn(m, n, k, a.data(), b.data(), c0.data(), true);
    std::vector<float> fresh(static_cast<std::size_t>(m) * n);
    K::gemm_nn(m, n, k, a.data(), b.data(), fresh.data(), false);
    for (std::size_t i = 0; i < c0.size(); ++i)
        CHECK(c0[i] == doctest::Approx(c1[i] + fresh[i]).epsilon(1e-6));
}

TEST_CASE("parallel and serial kernel paths are bit-identical") {
    Rng rng(77);
    const int m = 64, n = 200, k = 37;
    auto a = random_floats(rng, static_cast<std::size_t>(m) * k);
    auto b = random_floats(rng, static_cast<std::size_t>(k) * n);
    std::vector<float> c_par(static_cast<std::size_t>(m) * n), c_ser(c_par.size());
    K::gemm_nn(m, n, k, a.data(), b.data(), c_par.data(), false);
    {
        ParallelGuard g(false);
        K::gemm_nn(m, n, k, a.data(), b.data(), c_ser.data(), false);
    }
    CHECK(c_par == c_ser);

    // conv forward path
    auto geom = K::ConvGeom::make(3, 16, 16, 8, 4, 2, 1);
    auto x = random_floats(rng, 3u * 16 * 16);
    auto w = random_floats(rng, 8u * 3 * 4 * 4);
    auto bias = random_floats(rng, 8);
    std::vector<float> cols(static_cast<std::size_t>(geom.ci) * 16 * geom.ho * geom.wo);
    std::vector<float> y_par(8u * geom.ho * geom.wo), y_ser(y_par.size());
    K::conv2d_forward(geom, x.data(), w.data(), bias.data(), cols.data(), y_par.data());
    {
        ParallelGuard g(false);
        K::conv2d_forward(geom, x.data(), w.data(), bias.data(), cols.data(), y_ser.data());
    }
    CHECK(y_par == y_ser);
}

TEST_CASE("conv2d_forward matches direct convolution oracle") {
    Rng rng(5);
    for (auto [stride, pad] : {std::pair{2, 1}, std::pair{1, 0}, std::pair{1, 1}}) {
        const int ci = 3, hi = 10, wi = 10, co = 4, k = 4;
        auto geom = K::ConvGeom::make(ci, hi, wi, co, k, stride, pad);
        auto x = random_floats(rng, static_cast<std::size_t>(ci) * hi * wi);
        auto w = random_floats(rng, static_cast<std::size_t>(co) * ci * k * k);
        auto bias = random_floats(rng, co);
        std::vector<float> cols(static_cast<std::size_t>(ci) * k * k * geom.ho * geom.wo);
        std::vector<float> y(static_cast<std::size_t>(co) * geom.ho * geom.wo);
        K::conv2d_forward(geom, x.data(), w.data(), bias.data(), cols.data(), y.data());
        int ho, wo;
        auto ref = refops::conv2d(widen(x), ci, hi, wi, widen(w), widen(bias), co, k, stride, pad, &ho, &wo);
        REQUIRE(ho == geom.ho);
        REQUIRE(wo == geom.wo);
        check_close(y, ref, 1e-5);
    }
}

TEST_CASE("im2col / col2im are adjoint") {
    // <im2col(x), c> == <x, col2im(c)> characterizes the adjoint pair
    Rng rng(9);
    auto geom = K::ConvGeom::make(2, 9, 9, 1, 4, 2, 1);
    const std::size_t xs = 2u * 9 * 9;
    const std::size_t cs = static_cast<std::size_t>(geom.ci) * 16 * geom.ho * geom.wo;
    auto x = random_floats(rng, xs);
    auto c = random_floats(rng, cs);
    std::vector<float> xc(cs), cx(xs);
    K::im2col(geom, x.data(), xc.data());
    K::col2im(geom, c.data(), cx.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < cs; ++i) lhs += static_cast<double>(xc[i]) * c[i];
    for (std::size_t i = 0; i < xs; ++i) rhs += static_cast<double>(x[i]) * cx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-5));
}

TEST_CASE("upsample2x matches bilinear oracle and its backward is the adjoint") {
    Rng rng(13);
    const int c = 3, h = 5, w = 7;
    auto x = random_floats(rng, static_cast<std::size_t>(c) * h * w);
    std::vector<float> y(static_cast<std::size_t>(c) * 4 * h * w);
    K::upsample2x_forward(c, h, w, x.data(), y.data());
    auto ref = refops::upsample2x(widen(x), c, h, w);
    check_close(y, ref, 1e-5);

    auto dy = random_floats(rng, y.size());
    std::vector<float> dx(x.size());
    K::upsample2x_backward(c, h, w, dy.data(), dx.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += static_cast<double>(y[i]) * dy[i];
    // adjointness: <Ax, dy> == <x, A^T dy>
    for (std::size_t i = 0; i < x.size(); ++i) rhs += static_cast<double>(x[i]) * dx[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one and are stable") {
    Rng rng(21);
    const int rows = 12, cols = 30;
    auto x = random_floats(rng, static_cast<std::size_t>(rows) * cols, -50.0, 50.0);
    std::vector<float> y(x.size());
    K::softmax_rows(rows, cols, x.data(), y.data());
    for (int i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            CHECK(y[i * cols + j] >= 0.0f);
            sum += y[i * cols + j];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("ConvGeom rejects degenerate outputs") {
    CHECK_THROWS_AS(K::ConvGeom::make(1, 1, 1, 1, 4, 1, 0), ShapeError);
}
