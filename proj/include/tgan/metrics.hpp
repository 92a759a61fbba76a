#ifndef TGAN_METRICS_HPP
#define TGAN_METRICS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "tgan/png_io.hpp"

// Image quality and indicator regression metrics. All image metrics operate
// on the [0,1] pixel domain (disk bytes / 255).
namespace tgan::metrics {

std::vector<double> to_unit_range(const ImageU8& img);

// Single-scale SSIM: 11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03,
// dynamic range 1.0, mean over valid window positions.
double ssim(std::span<const double> a, std::span<const double> b, int h, int w);

struct PsnrResult {
    double db = 0.0;
    bool capped = false; // MSE was zero; db reports the 99.0 sentinel
};
PsnrResult psnr(std::span<const double> a, std::span<const double> b);

struct ImageErrors {
    double mae = 0.0;
    double mse = 0.0;
};
ImageErrors image_error_metrics(std::span<const double> a, std::span<const double> b);

struct IndicatorMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double mape = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    std::size_t n_observed = 0;
    std::size_t mape_skipped = 0; // cells with |truth| < 1e-6
};

// Pooled over observed cells only; R^2 uses SS_tot about the observed-cell
// mean; MAPE skips near-zero truths and counts them.
IndicatorMetrics indicator_metrics(const std::vector<std::vector<double>>& pred,
                                   const std::vector<std::vector<double>>& truth,
                                   const std::vector<std::vector<std::uint8_t>>& mask);

enum class DfdNorm { euclidean, elementwise };

struct DfdResult {
    double sum = 0.0;
    double mean = 0.0; // headline number
    std::size_t n = 0;
};

// Disease feature distance between index-aligned feature vectors of generated
// and real images.
DfdResult dfd(const std::vector<std::vector<double>>& f_gen,
              const std::vector<std::vector<double>>& f_real,
              DfdNorm norm = DfdNorm::euclidean);

} // namespace tgan::metrics

#endif
