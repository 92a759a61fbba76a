#include "tgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tgan/common.hpp"

namespace tgan::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kRange = 1.0;

const std::vector<double>& gaussian_kernel() {
    static const std::vector<double> kernel = [] {
        std::vector<double> k(kWindow);
        const int half = kWindow / 2;
        double sum = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const double d = i - half;
            k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += k[static_cast<std::size_t>(i)];
        }
        for (auto& v : k) v /= sum;
        return k;
    }();
    return kernel;
}

// separable valid-mode Gaussian filtering
std::vector<double> filter_valid(std::span<const double> img, int h, int w, int* ho, int* wo) {
    const auto& k = gaussian_kernel();
    *ho = h - kWindow + 1;
    *wo = w - kWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * *wo);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < *wo; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kWindow; ++t) acc += k[static_cast<std::size_t>(t)] * img[static_cast<std::size_t>(y) * w + x + t];
            rows[static_cast<std::size_t>(y) * *wo + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(*ho) * *wo);
    for (int y = 0; y < *ho; ++y)
        for (int x = 0; x < *wo; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kWindow; ++t) acc += k[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>(y + t) * *wo + x];
            out[static_cast<std::size_t>(y) * *wo + x] = acc;
        }
    return out;
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size())
        throw ShapeError(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
}

} // namespace

std::vector<double> to_unit_range(const ImageU8& img) {
    std::vector<double> v(img.pixels.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.pixels[i] / 255.0;
    return v;
}

double ssim(std::span<const double> a, std::span<const double> b, int h, int w) {
    require_same_size(a, b, "ssim images");
    if (static_cast<std::size_t>(h) * w != a.size())
        throw ShapeError("ssim: dims " + std::to_string(h) + "x" + std::to_string(w) +
                         " do not match buffer " + std::to_string(a.size()));
    if (h < kWindow || w < kWindow)
        throw ShapeError("ssim needs images of at least " + std::to_string(kWindow) + " pixels per side");

    std::vector<double> a2(a.size()), b2(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    int ho, wo;
    auto mu_a = filter_valid(a, h, w, &ho, &wo);
    auto mu_b = filter_valid(b, h, w, &ho, &wo);
    auto m_a2 = filter_valid(a2, h, w, &ho, &wo);
    auto m_b2 = filter_valid(b2, h, w, &ho, &wo);
    auto m_ab = filter_valid(ab, h, w, &ho, &wo);

    const double c1 = (kK1 * kRange) * (kK1 * kRange);
    const double c2 = (kK2 * kRange) * (kK2 * kRange);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = m_a2[i] - mu_a[i] * mu_a[i];
        const double vb = m_b2[i] - mu_b[i] * mu_b[i];
        const double cov = m_ab[i] - mu_a[i] * mu_b[i];
        acc += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(mu_a.size());
}

PsnrResult psnr(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "psnr images");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return {99.0, true};
    return {10.0 * std::log10(kRange * kRange / mse), false};
}

ImageErrors image_error_metrics(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "image error metrics");
    ImageErrors e;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        e.mae += std::abs(d);
        e.mse += d * d;
    }
    e.mae /= static_cast<double>(a.size());
    e.mse /= static_cast<double>(a.size());
    return e;
}

IndicatorMetrics indicator_metrics(const std::vector<std::vector<double>>& pred,
                                   const std::vector<std::vector<double>>& truth,
                                   const std::vector<std::vector<std::uint8_t>>& mask) {
    if (pred.size() != truth.size() || pred.size() != mask.size())
        throw ShapeError("indicator_metrics: row counts differ");
    IndicatorMetrics m;
    double truth_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].size() != truth[i].size() || pred[i].size() != mask[i].size())
            throw ShapeError("indicator_metrics: row " + std::to_string(i) + " lengths differ");
        for (std::size_t p = 0; p < pred[i].size(); ++p) {
            if (!mask[i][p]) continue;
            ++m.n_observed;
            const double d = pred[i][p] - truth[i][p];
            m.mae += std::abs(d);
            m.mse += d * d;
            truth_sum += truth[i][p];
            if (std::abs(truth[i][p]) < 1e-6)
                ++m.mape_skipped;
            else
                m.mape += std::abs(d / truth[i][p]);
        }
    }
    if (m.n_observed == 0) throw DataError("indicator_metrics: no observed cells");
    const double n = static_cast<double>(m.n_observed);
    m.mae /= n;
    m.mse /= n;
    m.rmse = std::sqrt(m.mse);
    const std::size_t mape_n = m.n_observed - m.mape_skipped;
    m.mape = mape_n ? m.mape / static_cast<double>(mape_n) : 0.0;

    const double mean = truth_sum / n;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        for (std::size_t p = 0; p < pred[i].size(); ++p) {
            if (!mask[i][p]) continue;
            const double d = pred[i][p] - truth[i][p];
            ss_res += d * d;
            ss_tot += (truth[i][p] - mean) * (truth[i][p] - mean);
        }
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return m;
}

DfdResult dfd(const std::vector<std::vector<double>>& f_gen,
              const std::vector<std::vector<double>>& f_real, DfdNorm norm) {
    if (f_gen.size() != f_real.size())
        throw ShapeError("dfd: list lengths differ: " + std::to_string(f_gen.size()) + " vs " +
                         std::to_string(f_real.size()));
    DfdResult r;
    r.n = f_gen.size();
    for (std::size_t i = 0; i < f_gen.size(); ++i) {
        if (f_gen[i].size() != f_real[i].size())
            throw ShapeError("dfd: feature widths differ at index " + std::to_string(i));
        double acc = 0.0;
        for (std::size_t d = 0; d < f_gen[i].size(); ++d) {
            const double diff = f_gen[i][d] - f_real[i][d];
            acc += (norm == DfdNorm::euclidean) ? diff * diff : std::abs(diff);
        }
        r.sum += (norm == DfdNorm::euclidean) ? std::sqrt(acc) : acc;
    }
    r.mean = r.n ? r.sum / static_cast<double>(r.n) : 0.0;
    return r;
}

} // namespace tgan::metrics
