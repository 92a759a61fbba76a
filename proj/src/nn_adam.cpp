#include "tgan/nn/adam.hpp"

#include <cmath>

#include "tgan/kernels.hpp"

namespace tgan::nn {

Adam::Adam(ParamRefs params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i]->value.numel(), 0.0f);
        v_[i].assign(params_[i]->value.numel(), 0.0f);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->grad.zero();
}

void Adam::step(double lr) {
    ++t_;
    const float b1 = static_cast<float>(beta1_);
    const float b2 = static_cast<float>(beta2_);
    const float corr1 = static_cast<float>(1.0 - std::pow(beta1_, t_));
    const float corr2 = static_cast<float>(1.0 - std::pow(beta2_, t_));
    const float alpha = static_cast<float>(lr) * std::sqrt(corr2) / corr1;
    const float eps = static_cast<float>(eps_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        float* w = params_[i]->value.ptr();
        const float* g = params_[i]->grad.ptr();
        float* m = m_[i].data();
        float* v = v_[i].data();
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(params_[i]->value.numel());
        const bool par = kernels::parallel_enabled() && n >= 16384;
#pragma omp parallel for schedule(static) if (par)
        for (std::ptrdiff_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0f - b1) * g[j];
            v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
            w[j] -= alpha * m[j] / (std::sqrt(v[j]) + eps);
        }
    }
}

} // namespace tgan::nn
