#ifndef TGAN_PLOTTING_HPP
#define TGAN_PLOTTING_HPP

#include <string>
#include <vector>

#include "tgan/evaluate.hpp"
#include "tgan/png_io.hpp"

// Static figure rendering: grayscale PNG charts, no interactive surface.
namespace tgan::plot {

struct Canvas {
    ImageU8 img;

    Canvas(int w, int h, std::uint8_t bg = 255);
    void fill_rect(int x, int y, int w, int h, std::uint8_t v);
    void rect(int x, int y, int w, int h, std::uint8_t v);
    void line(int x0, int y0, int x1, int y1, std::uint8_t v);
    void text(int x, int y, const std::string& s, std::uint8_t v, int scale = 1);
    void save(const std::string& path) const;
};

struct NamedReport {
    std::string label;
    eval::EvalReport report;
};

// One stacked panel per metric; grouped bars by stratum and report. Returns
// legend notes (e.g. omitted empty strata).
std::vector<std::string> metric_bar_chart(const std::vector<NamedReport>& reports,
                                          const std::string& out_png);

// Loss curves plus validation SSIM from a training log.csv.
void loss_curve_chart(const std::string& log_csv, const std::string& out_png);

// Montage of sample triplet rows dumped by the evaluator.
bool image_grid(const std::string& samples_dir, const std::string& out_png, int max_rows = 6);

} // namespace tgan::plot

#endif
