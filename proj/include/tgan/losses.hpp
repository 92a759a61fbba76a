#ifndef TGAN_LOSSES_HPP
#define TGAN_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "tgan/age_encoding.hpp"
#include "tgan/common.hpp"

// Training objectives. All functions are pure and templated so the gradient
// suite can run them in double while the training loop uses float. Masked
// slots are skipped before their values are touched, so sentinels (including
// NaN) contribute exactly zero.
namespace tgan::losses {

inline constexpr double kProbEps = 1e-7;

struct LossWeights {
    double alpha = 1.0;   // adversarial
    double beta = 100.0;  // age-scaled pixel
    double gamma = 1.2;   // dynamic indicator
};

enum class AspTarget { paper_literal, target };

namespace detail {
template <class T>
void require_same(std::span<const T> a, std::span<const T> b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
}
template <class T>
T clamp_prob(T p) {
    const T lo = static_cast<T>(kProbEps);
    const T hi = static_cast<T>(1.0 - kProbEps);
    return p < lo ? lo : (p > hi ? hi : p);
}
} // namespace detail

// Patch-term components. The real term is mean -log p, the fake term is
// mean -log(1-p); the discriminator loss is their sum, which lets training
// back-propagate each pass right after its forward.
template <class T>
T adv_real_term(std::span<const T> d_real) {
    T acc = 0;
    for (std::size_t i = 0; i < d_real.size(); ++i)
        acc += -std::log(detail::clamp_prob(d_real[i]));
    return acc / static_cast<T>(d_real.size());
}

template <class T>
void adv_real_term_backward(std::span<const T> d_real, std::span<T> g, T scale) {
    const T f = scale / static_cast<T>(d_real.size());
    for (std::size_t i = 0; i < d_real.size(); ++i)
        g[i] = -f / detail::clamp_prob(d_real[i]);
}

template <class T>
T adv_fake_term(std::span<const T> d_fake) {
    T acc = 0;
    for (std::size_t i = 0; i < d_fake.size(); ++i)
        acc += -std::log(T(1) - detail::clamp_prob(d_fake[i]));
    return acc / static_cast<T>(d_fake.size());
}

template <class T>
void adv_fake_term_backward(std::span<const T> d_fake, std::span<T> g, T scale) {
    const T f = scale / static_cast<T>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i)
        g[i] = f / (T(1) - detail::clamp_prob(d_fake[i]));
}

// Discriminator adversarial loss, mean over patches of
// -log(d_real) - log(1 - d_fake).
template <class T>
T adv_loss_d(std::span<const T> d_real, std::span<const T> d_fake) {
    detail::require_same(d_real, d_fake, "adv_loss_d patch maps");
    return adv_real_term(d_real) + adv_fake_term(d_fake);
}

template <class T>
void adv_loss_d_backward(std::span<const T> d_real, std::span<const T> d_fake,
                         std::span<T> g_real, std::span<T> g_fake) {
    detail::require_same(d_real, d_fake, "adv_loss_d patch maps");
    const T inv_n = T(1) / static_cast<T>(d_real.size());
    for (std::size_t i = 0; i < d_real.size(); ++i) {
        g_real[i] = -inv_n / detail::clamp_prob(d_real[i]);
        g_fake[i] = inv_n / (T(1) - detail::clamp_prob(d_fake[i]));
    }
}

// Generator adversarial loss, mean over patches of -log(d_fake).
template <class T>
T adv_loss_g(std::span<const T> d_fake) {
    T acc = 0;
    for (std::size_t i = 0; i < d_fake.size(); ++i)
        acc += -std::log(detail::clamp_prob(d_fake[i]));
    return acc / static_cast<T>(d_fake.size());
}

template <class T>
void adv_loss_g_backward(std::span<const T> d_fake, std::span<T> g_fake) {
    const T inv_n = T(1) / static_cast<T>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i)
        g_fake[i] = -inv_n / detail::clamp_prob(d_fake[i]);
}

// Age-scaled pixel loss: mean-per-pixel L1 times the cosine age factor.
// The caller picks the comparison image (y_j by default, x_i in the
// paper-literal reading).
template <class T>
T asp_loss(std::span<const T> y_hat, std::span<const T> target,
           const AgeCode& a_i, const AgeCode& a_j, CosineMode mode) {
    detail::require_same(y_hat, target, "asp_loss images");
    T acc = 0;
    for (std::size_t i = 0; i < y_hat.size(); ++i)
        acc += std::abs(y_hat[i] - target[i]);
    const T scale = static_cast<T>(cosine_scale(a_i, a_j, mode));
    return acc / static_cast<T>(y_hat.size()) * scale;
}

template <class T>
void asp_loss_backward(std::span<const T> y_hat, std::span<const T> target,
                       const AgeCode& a_i, const AgeCode& a_j, CosineMode mode,
                       std::span<T> g_y_hat) {
    detail::require_same(y_hat, target, "asp_loss images");
    const T scale = static_cast<T>(cosine_scale(a_i, a_j, mode)) / static_cast<T>(y_hat.size());
    for (std::size_t i = 0; i < y_hat.size(); ++i) {
        const T d = y_hat[i] - target[i];
        g_y_hat[i] = d > 0 ? scale : (d < 0 ? -scale : T(0));
    }
}

// Dynamic indicator loss for the discriminator: masked L1 sum against the
// recorded indicators (Σ over observed slots, no normalization).
template <class T>
T dm_loss_d(std::span<const T> predicted, std::span<const T> c, std::span<const std::uint8_t> mask) {
    detail::require_same(predicted, c, "dm_loss_d vectors");
    if (mask.size() != predicted.size())
        throw ShapeError("dm_loss_d mask length " + std::to_string(mask.size()));
    T acc = 0;
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        if (!mask[p]) continue;
        acc += std::abs(predicted[p] - c[p]);
    }
    return acc;
}

template <class T>
void dm_loss_d_backward(std::span<const T> predicted, std::span<const T> c,
                        std::span<const std::uint8_t> mask, std::span<T> g_predicted) {
    detail::require_same(predicted, c, "dm_loss_d vectors");
    for (std::size_t p = 0; p < predicted.size(); ++p) {
        if (!mask[p]) {
            g_predicted[p] = 0;
            continue;
        }
        const T d = predicted[p] - c[p];
        g_predicted[p] = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
    }
}

// Dynamic indicator loss for the generator: masked L1 sum between the
// indicator discriminator's outputs on the generated and the real image. The
// real-image prediction is a constant here (no gradient flows through it).
template <class T>
T dm_loss_g(std::span<const T> pred_fake, std::span<const T> pred_real,
            std::span<const std::uint8_t> mask) {
    detail::require_same(pred_fake, pred_real, "dm_loss_g vectors");
    if (mask.size() != pred_fake.size())
        throw ShapeError("dm_loss_g mask length " + std::to_string(mask.size()));
    T acc = 0;
    for (std::size_t p = 0; p < pred_fake.size(); ++p) {
        if (!mask[p]) continue;
        acc += std::abs(pred_fake[p] - pred_real[p]);
    }
    return acc;
}

template <class T>
void dm_loss_g_backward(std::span<const T> pred_fake, std::span<const T> pred_real,
                        std::span<const std::uint8_t> mask, std::span<T> g_pred_fake) {
    detail::require_same(pred_fake, pred_real, "dm_loss_g vectors");
    for (std::size_t p = 0; p < pred_fake.size(); ++p) {
        if (!mask[p]) {
            g_pred_fake[p] = 0;
            continue;
        }
        const T d = pred_fake[p] - pred_real[p];
        g_pred_fake[p] = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
    }
}

// Weighted total generator objective.
template <class T>
T total_generator_loss(T adv, T asp, T dm, const LossWeights& w) {
    if (std::isnan(static_cast<double>(adv))) throw TrainingError("NaN in adversarial loss component");
    if (std::isnan(static_cast<double>(asp))) throw TrainingError("NaN in age-scaled pixel loss component");
    if (std::isnan(static_cast<double>(dm))) throw TrainingError("NaN in dynamic indicator loss component");
    return static_cast<T>(w.alpha) * adv + static_cast<T>(w.beta) * asp + static_cast<T>(w.gamma) * dm;
}

} // namespace tgan::losses

#endif
