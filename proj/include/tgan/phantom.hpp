#ifndef TGAN_PHANTOM_HPP
#define TGAN_PHANTOM_HPP

#include <cstdint>
#include <vector>

#include "tgan/png_io.hpp"

namespace tgan {

// Latent disease state of one synthetic subject. Severity at a visit is
// clamp(base + rate * max(0, age - onset), 0, 1).
struct LatentState {
    double severity = 0.0;          // base severity at onset
    double onset_age = 60.0;
    double progression_rate = 0.03; // per year
    std::uint64_t morphology_seed = 0;

    double severity_at(double age_years) const;
};

// Analytic geometry the renderer realizes; indicators are derived from the
// same quantities so image content and indicator truth stay coupled.
struct PhantomFeatures {
    double ventricle_fraction = 0.0; // ventricle area / brain area
    double cortical_thickness = 0.0; // in normalized canvas units
    double severity = 0.0;
};

PhantomFeatures phantom_features(const LatentState& latent, double age_years);

// Deterministic brain-slice phantom: bright skull ring, tissue with a faint
// per-subject texture, a cortical band that thins with severity, and two dark
// ventricles whose area grows affinely with severity.
ImageU8 render_phantom(const LatentState& latent, double age_years, int image_size);

// Raw (pre z-scoring) indicator vector. Indicators 0-5 are affine in the
// phantom features plus Gaussian noise, the remainder is pure noise so the
// ANOVA ranking has a known answer. Deterministic given noise_seed.
std::vector<double> derive_indicators(const LatentState& latent, double age_years,
                                      std::uint64_t noise_seed, int n_indicators = 10,
                                      double noise_sigma = 0.05);

inline constexpr int kDiseaseCoupledIndicators = 6;

} // namespace tgan

#endif
