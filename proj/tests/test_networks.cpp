#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "ref_ops.hpp"
#include "tgan/nn/adam.hpp"
#include "tgan/nn/checkpoint.hpp"
#include "tgan/nn/networks.hpp"

using namespace tgan;
using namespace tgan::nn;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

bool all_finite(const Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

NetworkConfig tiny_config(int image_size = 32, int base = 4) {
    NetworkConfig cfg;
    cfg.image_size = image_size;
    cfg.base_channels = base;
    cfg.age_code_length = 50;
    cfg.d_a = 8;
    cfg.d_k = 8;
    cfg.cond_hidden = 16;
    cfg.n_indicators = 10;
    return cfg;
}

} // namespace

TEST_CASE("conv layer gradients match finite differences of the double reference") {
    Rng rng(31);
    Conv2d conv("t.conv", 2, 3, 4, 2, 1);
    conv.init(rng);
    Tensor x = random_tensor(rng, {1, 2, 8, 8});
    Tensor y = conv.forward(x);

    // scalar objective: weighted sum of outputs
    Tensor w_obj = random_tensor(rng, y.shape);
    auto objective = [&](const std::vector<double>& xv) {
        int ho, wo;
        std::vector<double> weights(conv.weight.value.data.begin(), conv.weight.value.data.end());
        std::vector<double> bias(conv.bias.value.data.begin(), conv.bias.value.data.end());
        auto out = refops::conv2d(xv, 2, 8, 8, weights, bias, 3, 4, 2, 1, &ho, &wo);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * w_obj.data[i];
        return acc;
    };

    conv.weight.grad.zero();
    conv.bias.grad.zero();
    Tensor dx = conv.backward(w_obj);

    std::vector<double> xd(x.data.begin(), x.data.end());
    const double h = 1e-3;
    for (std::size_t i = 0; i < xd.size(); i += 7) {
        auto xp = xd;
        xp[i] += h;
        auto xm = xd;
        xm[i] -= h;
        const double fd = (objective(xp) - objective(xm)) / (2 * h);
        CHECK(std::abs(fd - dx.data[i]) < 1e-3 * (1.0 + std::abs(fd)));
    }
}

TEST_CASE("transposed conv matches the scatter oracle and output size") {
    Rng rng(33);
    ConvTranspose2d up("t.up", 3, 2, 4, 2, 1);
    up.init(rng);
    Tensor x = random_tensor(rng, {1, 3, 5, 5});
    Tensor y = up.forward(x);
    REQUIRE(y.shape == std::vector<int>{1, 2, 10, 10});

    int ho, wo;
    std::vector<double> weights(up.weight.value.data.begin(), up.weight.value.data.end());
    std::vector<double> bias(up.bias.value.data.begin(), up.bias.value.data.end());
    std::vector<double> xd(x.data.begin(), x.data.end());
    auto ref = refops::convT2d(xd, 3, 5, 5, weights, bias, 2, 4, 2, 1, &ho, &wo);
    REQUIRE(ho == 10);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(ref[i] - y.data[i]) < 1e-4 * (1.0 + std::abs(ref[i])));
}

TEST_CASE("instance norm output is standardized and backward sums to zero") {
    Rng rng(35);
    InstanceNorm2d norm("t.norm", 3);
    norm.init(rng);
    Tensor x = random_tensor(rng, {2, 3, 6, 6}, -3.0, 5.0);
    Tensor y = norm.forward(x);
    for (int r = 0; r < 6; ++r) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < 36; ++j) mean += y.data[r * 36 + j];
        mean /= 36.0;
        for (int j = 0; j < 36; ++j) var += (y.data[r * 36 + j] - mean) * (y.data[r * 36 + j] - mean);
        var /= 36.0;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
    // gradient through normalization is mean-free per instance-channel
    Tensor dy = random_tensor(rng, y.shape);
    Tensor dx = norm.backward(dy);
    for (int r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int j = 0; j < 36; ++j) s += dx.data[r * 36 + j];
        CHECK(std::abs(s) < 1e-3);
    }
}

TEST_CASE("generator shape contract and tanh range") {
    auto cfg = tiny_config(32, 4);
    Generator gen(cfg);
    Rng rng(1);
    gen.init(rng);
    Tensor x = random_tensor(rng, {2, 1, 32, 32});
    Tensor diff = random_tensor(rng, {2, 50}, -1.0, 1.0);
    Tensor y = gen.forward(x, diff);
    CHECK(y.shape == x.shape);
    for (float v : y.data) {
        CHECK(v > -1.0f);
        CHECK(v < 1.0f);
    }
    CHECK(all_finite(y));

    // deterministic inference
    Tensor y2 = gen.forward(x, diff);
    CHECK(y.data == y2.data);

    // shape errors
    Tensor bad = random_tensor(rng, {2, 1, 16, 16});
    CHECK_THROWS_AS(gen.forward(bad, diff), ShapeError);
    Tensor bad_diff = random_tensor(rng, {2, 49});
    CHECK_THROWS_AS(gen.forward(x, bad_diff), ShapeError);
}

TEST_CASE("generator skip connections are load-bearing") {
    auto cfg = tiny_config(32, 4);
    Generator gen(cfg);
    Rng rng(2);
    gen.init(rng);
    Tensor x = random_tensor(rng, {1, 1, 32, 32});
    Tensor diff = random_tensor(rng, {1, 50});
    Tensor with = gen.forward(x, diff, true);
    Tensor without = gen.forward(x, diff, false);
    double delta = 0.0;
    for (std::size_t i = 0; i < with.numel(); ++i)
        delta += std::abs(static_cast<double>(with.data[i]) - without.data[i]);
    CHECK(delta > 1e-3);
}

TEST_CASE("generator parameter count formula in the age-code length") {
    auto cfg_a = tiny_config(32, 4);
    auto cfg_b = cfg_a;
    cfg_b.age_code_length = 80;
    Generator ga(cfg_a), gb(cfg_b);
    // L enters only through the first condition layer: delta = (L2-L1)*hidden
    const std::size_t expect_delta =
        static_cast<std::size_t>(cfg_b.age_code_length - cfg_a.age_code_length) *
        static_cast<std::size_t>(cfg_a.cond_hidden);
    CHECK(gb.param_count() - ga.param_count() == expect_delta);

    // exact count: composed from layer arithmetic
    auto conv_params = [](int ci, int co, int k) {
        return static_cast<std::size_t>(co) * ci * k * k + static_cast<std::size_t>(co);
    };
    auto in_params = [](int c) { return static_cast<std::size_t>(2 * c); };
    const int b = cfg_a.base_channels;
    const int C = cfg_a.bottleneck_channels();
    const int hw = cfg_a.bottleneck_tokens();
    std::size_t expect = 0;
    expect += conv_params(1, b, 4) + conv_params(b, 2 * b, 4) + conv_params(2 * b, 4 * b, 4) +
              conv_params(4 * b, 8 * b, 4);
    expect += in_params(2 * b) + in_params(4 * b) + in_params(8 * b);
    expect += static_cast<std::size_t>(cfg_a.cond_hidden) * cfg_a.age_code_length + cfg_a.cond_hidden;
    expect += static_cast<std::size_t>(C) * cfg_a.d_a * cfg_a.cond_hidden +
              static_cast<std::size_t>(C) * cfg_a.d_a;
    expect += static_cast<std::size_t>(cfg_a.d_a) * cfg_a.d_k + static_cast<std::size_t>(hw) * cfg_a.d_k +
              static_cast<std::size_t>(hw) * hw;
    expect += conv_params(8 * b, 4 * b, 4) + conv_params(8 * b, 2 * b, 4) + conv_params(4 * b, b, 4) +
              conv_params(2 * b, b, 4);
    expect += in_params(4 * b) + in_params(2 * b) + in_params(b) + in_params(b);
    expect += conv_params(b, 1, 3);
    CHECK(ga.param_count() == expect);
}

TEST_CASE("patch discriminator map sizes follow the conv arithmetic") {
    CHECK(PatchDiscriminator::map_side(256) == 28);
    CHECK(PatchDiscriminator::map_side(64) == 4);
    CHECK(PatchDiscriminator::map_side(128) == 12);
    CHECK(PatchDiscriminator::map_side(32) == 2);

    auto cfg = tiny_config(64, 4);
    PatchDiscriminator d(cfg);
    Rng rng(3);
    d.init(rng);
    Tensor x = random_tensor(rng, {2, 1, 64, 64});
    Tensor cand = random_tensor(rng, {2, 1, 64, 64});
    Tensor map = d.forward(x, cand);
    CHECK(map.shape == std::vector<int>{2, 1, 4, 4});
    for (float v : map.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    Tensor wrong = random_tensor(rng, {2, 1, 32, 32});
    CHECK_THROWS_AS(d.forward(x, wrong), ShapeError);
}

TEST_CASE("patch discriminator emits 28x28 at 256 input") {
    auto cfg = tiny_config(256, 2);
    PatchDiscriminator d(cfg);
    Rng rng(4);
    d.init(rng);
    Tensor x = random_tensor(rng, {1, 1, 256, 256});
    Tensor map = d.forward(x, x);
    CHECK(map.shape == std::vector<int>{1, 1, 28, 28});
    CHECK(all_finite(map));
}

TEST_CASE("indicator discriminator output contract") {
    auto cfg = tiny_config(64, 4);
    IndicatorDiscriminator d(cfg);
    Rng rng(5);
    d.init(rng);
    Tensor y64 = random_tensor(rng, {3, 1, 64, 64});
    Tensor pred = d.forward(y64);
    CHECK(pred.shape == std::vector<int>{3, 10});
    CHECK(all_finite(pred));

    // same weights accept other admissible sizes thanks to global pooling
    Tensor y128 = random_tensor(rng, {1, 1, 128, 128});
    CHECK(d.forward(y128).shape == std::vector<int>{1, 10});
    Tensor y32 = random_tensor(rng, {1, 1, 32, 32});
    CHECK(d.forward(y32).shape == std::vector<int>{1, 10});

    Tensor bad = random_tensor(rng, {1, 1, 40, 40});
    CHECK_THROWS_AS(d.forward(bad), ShapeError);
}

TEST_CASE("forcing constant scale heads yields that constant per indicator") {
    auto cfg = tiny_config(32, 2);
    IndicatorDiscriminator d(cfg);
    Rng rng(6);
    d.init(rng);
    // zero every head weight, set fc biases to k
    const float k = 2.5f;
    for (auto* p : d.params()) {
        if (p->name.find("head") == std::string::npos) continue;
        if (p->name.find(".fc.b") != std::string::npos)
            std::fill(p->value.data.begin(), p->value.data.end(), k);
        else
            p->value.zero();
    }
    Tensor y = random_tensor(rng, {2, 1, 32, 32});
    Tensor pred = d.forward(y);
    for (float v : pred.data) CHECK(v == doctest::Approx(k).epsilon(1e-6));
}

TEST_CASE("attention rows sum to one and satisfy the fuse identities") {
    Rng rng(7);
    const int C = 6, hw = 9, d_a = 5, d_k = 4;
    AttentionFuse fuse("t.fuse", hw, d_a, d_k);
    fuse.init(rng);
    Tensor fx = random_tensor(rng, {1, C, hw});
    Tensor fa = random_tensor(rng, {1, C, d_a});
    Tensor out = fuse.forward(fx, fa);
    REQUIRE(out.shape == fx.shape);

    const Tensor& p = fuse.attention_rows()[0];
    for (int i = 0; i < C; ++i) {
        double sum = 0.0;
        for (int j = 0; j < C; ++j) sum += p.data[i * C + j];
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }

    SUBCASE("uniform softmax: W_q = 0 makes each output row the column-mean of V") {
        fuse.w_q.value.zero();
        Tensor out2 = fuse.forward(fx, fa);
        // V = fx * Wv; column-mean over tokens
        std::vector<double> v(C * hw, 0.0);
        for (int i = 0; i < C; ++i)
            for (int j = 0; j < hw; ++j) {
                double acc = 0.0;
                for (int t = 0; t < hw; ++t) acc += fx.data[i * hw + t] * fuse.w_v.value.data[t * hw + j];
                v[i * hw + j] = acc;
            }
        for (int j = 0; j < hw; ++j) {
            double mean = 0.0;
            for (int i = 0; i < C; ++i) mean += v[i * hw + j];
            mean /= C;
            for (int i = 0; i < C; ++i) {
                const double attended = out2.data[i * hw + j] - fx.data[i * hw + j];
                CHECK(std::abs(attended - mean) < 1e-5);
            }
        }
    }

    SUBCASE("single token: attention output equals V exactly") {
        Tensor fx1 = random_tensor(rng, {1, 1, hw});
        Tensor fa1 = random_tensor(rng, {1, 1, d_a});
        Tensor out1 = fuse.forward(fx1, fa1);
        for (int j = 0; j < hw; ++j) {
            double v = 0.0;
            for (int t = 0; t < hw; ++t) v += fx1.data[t] * fuse.w_v.value.data[t * hw + j];
            CHECK(out1.data[j] - fx1.data[j] == doctest::Approx(v).epsilon(1e-5));
        }
    }

    SUBCASE("permuting K/V tokens leaves the attended sum invariant") {
        // brute-force oracle: permute fx rows, queries fixed
        std::vector<int> perm{3, 0, 5, 1, 4, 2};
        Tensor fx_p({1, C, hw});
        for (int i = 0; i < C; ++i)
            for (int j = 0; j < hw; ++j) fx_p.data[i * hw + j] = fx.data[perm[i] * hw + j];
        // direct attention computation with K/V from permuted tokens
        auto attend = [&](const Tensor& feats) {
            std::vector<double> q(C * d_k), kk(C * d_k), vv(C * hw), res(C * hw, 0.0);
            for (int i = 0; i < C; ++i)
                for (int j = 0; j < d_k; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < d_a; ++t) acc += fa.data[i * d_a + t] * fuse.w_q.value.data[t * d_k + j];
                    q[i * d_k + j] = acc;
                    acc = 0.0;
                    for (int t = 0; t < hw; ++t) acc += feats.data[i * hw + t] * fuse.w_k.value.data[t * d_k + j];
                    kk[i * d_k + j] = acc;
                }
            for (int i = 0; i < C; ++i)
                for (int j = 0; j < hw; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < hw; ++t) acc += feats.data[i * hw + t] * fuse.w_v.value.data[t * hw + j];
                    vv[i * hw + j] = acc;
                }
            for (int i = 0; i < C; ++i) {
                std::vector<double> row(C);
                double mx = -1e300;
                for (int j = 0; j < C; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < d_k; ++t) acc += q[i * d_k + t] * kk[j * d_k + t];
                    row[j] = acc / std::sqrt(static_cast<double>(d_k));
                    mx = std::max(mx, row[j]);
                }
                double z = 0.0;
                for (int j = 0; j < C; ++j) z += std::exp(row[j] - mx);
                for (int j = 0; j < C; ++j) {
                    const double w = std::exp(row[j] - mx) / z;
                    for (int t = 0; t < hw; ++t) res[i * hw + t] += w * vv[j * hw + t];
                }
            }
            return res;
        };
        auto base = attend(fx);
        auto permuted = attend(fx_p);
        for (int i = 0; i < C * hw; ++i) CHECK(std::abs(base[i] - permuted[i]) < 1e-9);
    }

    SUBCASE("token width mismatch raises a shape error") {
        Tensor narrow = random_tensor(rng, {1, C, hw - 1});
        CHECK_THROWS_AS(fuse.forward(narrow, fa), ShapeError);
    }
}

TEST_CASE("all three models stay finite on random inputs at init") {
    auto cfg = tiny_config(32, 4);
    Rng rng(8);
    Generator g(cfg);
    PatchDiscriminator da(cfg);
    IndicatorDiscriminator di(cfg);
    g.init(rng);
    da.init(rng);
    di.init(rng);
    Tensor x = random_tensor(rng, {2, 1, 32, 32});
    Tensor diff = random_tensor(rng, {2, 50});
    Tensor y = g.forward(x, diff);
    CHECK(all_finite(y));
    CHECK(all_finite(da.forward(x, y)));
    CHECK(all_finite(di.forward(y)));
}

TEST_CASE("checkpoint round-trip restores bit-identical forward passes") {
    namespace fs = std::filesystem;
    auto cfg = tiny_config(32, 4);
    Rng rng(9);
    Generator g(cfg);
    g.init(rng);
    Tensor x = random_tensor(rng, {1, 1, 32, 32});
    Tensor diff = random_tensor(rng, {1, 50});
    Tensor before = g.forward(x, diff);

    const auto path = (fs::temp_directory_path() / "tgan_ckpt_test.bin").string();
    save_checkpoint(path, cfg, {{"note", "test"}}, g.named_tensors());

    Generator g2(cfg);
    Rng rng2(1234);
    g2.init(rng2);
    auto ckpt = load_checkpoint(path);
    restore_into(ckpt, cfg, g2.named_tensors());
    Tensor after = g2.forward(x, diff);
    CHECK(before.data == after.data);

    // config mismatch refused
    auto other = cfg;
    other.base_channels = 8;
    Generator g3(other);
    CHECK_THROWS_AS(restore_into(ckpt, other, g3.named_tensors()), ConfigError);
    fs::remove(path);
}

TEST_CASE("discriminator backward drives the candidate image") {
    auto cfg = tiny_config(32, 4);
    PatchDiscriminator d(cfg);
    Rng rng(10);
    d.init(rng);
    Tensor x = random_tensor(rng, {1, 1, 32, 32});
    Tensor cand = random_tensor(rng, {1, 1, 32, 32});
    Tensor map = d.forward(x, cand);
    Tensor dmap(map.shape, 1.0f);
    Tensor dcand = d.backward(dmap);
    CHECK(dcand.shape == cand.shape);
    double mag = 0.0;
    for (float v : dcand.data) mag += std::abs(v);
    CHECK(mag > 0.0);
    CHECK(all_finite(dcand));
}

TEST_CASE("generator backward accumulates finite gradients") {
    auto cfg = tiny_config(32, 4);
    Generator g(cfg);
    Rng rng(11);
    g.init(rng);
    for (auto* p : g.params()) p->grad.zero();
    Tensor x = random_tensor(rng, {2, 1, 32, 32});
    Tensor diff = random_tensor(rng, {2, 50});
    Tensor y = g.forward(x, diff);
    Tensor dy(y.shape, 1.0f);
    g.backward(dy);
    double total = 0.0;
    for (auto* p : g.params()) {
        for (float v : p->grad.data) {
            CHECK(std::isfinite(v));
            total += std::abs(v);
        }
    }
    CHECK(total > 0.0);
}
