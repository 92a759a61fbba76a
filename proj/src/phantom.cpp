#include "tgan/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "tgan/common.hpp"
#include "tgan/rng.hpp"

namespace tgan {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Geometry derived once per subject from the morphology seed; the canvas is
// the unit square.
struct Morphology {
    double cx, cy;            // head center
    double theta;             // head rotation
    double skull_a, skull_b;  // outer skull semi-axes
    double skull_th;          // skull ring thickness
    double gap;               // csf gap between skull and brain
    double brain_a, brain_b;
    double cortex_t0;         // cortical thickness at severity 0
    double vent_f0;           // ventricle pair area fraction at severity 0
    double vent_growth;       // affine area growth per unit severity
    double vent_dx, vent_dy;  // ventricle offsets from brain center
    double vent_tilt;         // ventricle tilt
    double vent_aspect;
    double tex_fx, tex_fy, tex_phase, tex_amp;
};

Morphology make_morphology(std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x9e3779b97f4a7c15ULL));
    Morphology m{};
    m.cx = 0.5 + rng.uniform(-0.015, 0.015);
    m.cy = 0.5 + rng.uniform(-0.015, 0.015);
    m.theta = rng.uniform(-0.12, 0.12);
    m.skull_a = 0.44 * (1.0 + rng.uniform(-0.05, 0.05));
    m.skull_b = 0.37 * (1.0 + rng.uniform(-0.05, 0.05));
    m.skull_th = 0.034;
    m.gap = 0.018;
    m.brain_a = m.skull_a - m.skull_th - m.gap;
    m.brain_b = m.skull_b - m.skull_th - m.gap;
    m.cortex_t0 = 0.055 * (1.0 + rng.uniform(-0.12, 0.12));
    m.vent_f0 = 0.050 * (1.0 + rng.uniform(-0.15, 0.15));
    m.vent_growth = 6.0;
    m.vent_dx = 0.33 * (1.0 + rng.uniform(-0.10, 0.10));
    m.vent_dy = rng.uniform(-0.08, 0.08);
    m.vent_tilt = 0.50 + rng.uniform(-0.10, 0.10);
    m.vent_aspect = 2.3 + rng.uniform(-0.3, 0.3);
    m.tex_fx = rng.uniform(2.0, 5.0);
    m.tex_fy = rng.uniform(2.0, 5.0);
    m.tex_phase = rng.uniform(0.0, 2.0 * kPi);
    m.tex_amp = 0.09;
    return m;
}

inline double ellipse_implicit(double x, double y, double cx, double cy, double a, double b,
                               double rot) {
    const double dx = x - cx;
    const double dy = y - cy;
    const double c = std::cos(rot), s = std::sin(rot);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return (u * u) / (a * a) + (v * v) / (b * b);
}

struct VentricleGeom {
    double cx1, cy1, cx2, cy2;
    double a, b;
    double tilt;
};

VentricleGeom ventricles_at(const Morphology& m, double severity) {
    VentricleGeom v{};
    const double frac = m.vent_f0 * (1.0 + m.vent_growth * severity);
    const double brain_area = kPi * m.brain_a * m.brain_b;
    const double one_area = 0.5 * frac * brain_area;
    v.b = std::sqrt(one_area / (kPi * m.vent_aspect));
    v.a = v.b * m.vent_aspect;
    // offsets in the head frame, then rotated with the head
    const double ox = m.vent_dx * m.brain_a * 0.62;
    const double oy = m.vent_dy * m.brain_b;
    const double c = std::cos(m.theta), s = std::sin(m.theta);
    v.cx1 = m.cx + c * (-ox) - s * oy;
    v.cy1 = m.cy + s * (-ox) + c * oy;
    v.cx2 = m.cx + c * ox - s * oy;
    v.cy2 = m.cy + s * ox + c * oy;
    v.tilt = m.vent_tilt;
    return v;
}

} // namespace

double LatentState::severity_at(double age_years) const {
    const double s = severity + progression_rate * std::max(0.0, age_years - onset_age);
    return std::clamp(s, 0.0, 1.0);
}

PhantomFeatures phantom_features(const LatentState& latent, double age_years) {
    const Morphology m = make_morphology(latent.morphology_seed);
    PhantomFeatures f{};
    f.severity = latent.severity_at(age_years);
    f.ventricle_fraction = m.vent_f0 * (1.0 + m.vent_growth * f.severity);
    f.cortical_thickness = m.cortex_t0 * (1.0 - 0.55 * f.severity);
    return f;
}

ImageU8 render_phantom(const LatentState& latent, double age_years, int image_size) {
    if (!(age_years >= 55.0 && age_years <= 97.3))
        throw std::domain_error("phantom age " + std::to_string(age_years) + " outside [55.0, 97.3]");
    const Morphology m = make_morphology(latent.morphology_seed);
    const double severity = latent.severity_at(age_years);
    const double cortex_t = m.cortex_t0 * (1.0 - 0.80 * severity);
    const double shrink = 1.0 - 0.10 * severity; // global atrophy widens the csf gap
    const double tissue_gain = 1.0 - 0.40 * severity;
    const VentricleGeom vg = ventricles_at(m, severity);

    ImageU8 img;
    img.height = image_size;
    img.width = image_size;
    img.pixels.resize(static_cast<std::size_t>(image_size) * image_size);

    const double inv = 1.0 / image_size;
    // 2x2 supersampling keeps edges smooth and ventricle area monotone
    static constexpr double kSub[2] = {0.25, 0.75};
    for (int py = 0; py < image_size; ++py) {
        for (int px = 0; px < image_size; ++px) {
            double acc = 0.0;
            for (double sy : kSub) {
                for (double sx : kSub) {
                    const double x = (px + sx) * inv;
                    const double y = (py + sy) * inv;
                    double val = 0.02; // background
                    const double e_out = ellipse_implicit(x, y, m.cx, m.cy, m.skull_a, m.skull_b, m.theta);
                    if (e_out <= 1.0) {
                        const double e_in = ellipse_implicit(x, y, m.cx, m.cy, m.skull_a - m.skull_th,
                                                             m.skull_b - m.skull_th, m.theta);
                        const double brain_a = m.brain_a * shrink;
                        const double brain_b = m.brain_b * shrink;
                        const double e_brain = ellipse_implicit(x, y, m.cx, m.cy, brain_a, brain_b, m.theta);
                        if (e_in > 1.0) {
                            val = 0.92; // skull ring
                        } else if (e_brain > 1.0) {
                            val = 0.15; // csf gap
                        } else {
                            const double tex =
                                1.0 + m.tex_amp * std::sin(2.0 * kPi * (m.tex_fx * x + m.tex_fy * y) +
                                                           m.tex_phase);
                            const double e_cin =
                                ellipse_implicit(x, y, m.cx, m.cy, std::max(1e-3, brain_a - cortex_t),
                                                 std::max(1e-3, brain_b - cortex_t), m.theta);
                            if (e_cin > 1.0) {
                                val = 0.78 * tex; // cortical band
                            } else {
                                const double ev1 = ellipse_implicit(x, y, vg.cx1, vg.cy1, vg.a, vg.b,
                                                                    m.theta + vg.tilt);
                                const double ev2 = ellipse_implicit(x, y, vg.cx2, vg.cy2, vg.a, vg.b,
                                                                    m.theta - vg.tilt);
                                val = (ev1 <= 1.0 || ev2 <= 1.0) ? 0.10 : 0.52 * tissue_gain * tex;
                            }
                        }
                    }
                    acc += val;
                }
            }
            const double v = std::clamp(acc / 4.0, 0.0, 1.0);
            img.pixels[static_cast<std::size_t>(py) * image_size + px] =
                static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    }
    return img;
}

std::vector<double> derive_indicators(const LatentState& latent, double age_years,
                                      std::uint64_t noise_seed, int n_indicators,
                                      double noise_sigma) {
    if (n_indicators < kDiseaseCoupledIndicators)
        throw ConfigError("need at least " + std::to_string(kDiseaseCoupledIndicators) +
                          " indicators, got " + std::to_string(n_indicators));
    const PhantomFeatures f = phantom_features(latent, age_years);
    // standardize the raw geometry onto comparable scales
    const double s = (f.severity - 0.4) / 0.3;
    const double vf = (f.ventricle_fraction - 0.08) / 0.04;
    const double ct = (f.cortical_thickness - 0.043) / 0.012;

    Rng rng(splitmix64(noise_seed ^ 0x7b4f2a1dc96e8d35ULL));
    std::vector<double> ind(static_cast<std::size_t>(n_indicators));
    ind[0] = 0.9 * s + noise_sigma * rng.normal();
    ind[1] = 0.9 * vf + noise_sigma * rng.normal();
    ind[2] = -1.0 * s + noise_sigma * rng.normal(); // MMSE-like: falls with severity
    ind[3] = -0.8 * ct + noise_sigma * rng.normal();
    ind[4] = 0.5 * s + 0.5 * vf + noise_sigma * rng.normal();
    ind[5] = -0.4 * s - 0.6 * ct + noise_sigma * rng.normal();
    for (int p = kDiseaseCoupledIndicators; p < n_indicators; ++p)
        ind[static_cast<std::size_t>(p)] = rng.normal(); // disease-irrelevant
    return ind;
}

} // namespace tgan
