#include "tgan/plotting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tgan/common.hpp"

namespace fs = std::filesystem;

namespace tgan::plot {

namespace {

// 5x7 glyphs, one byte per row (low 5 bits used)
struct Glyph {
    char ch;
    std::uint8_t rows[7];
};

const Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}}, {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}}, {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}}, {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'%', {0x19, 0x19, 0x02, 0x04, 0x08, 0x13, 0x13}}, {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.ch == up) return &g;
    return nullptr;
}

} // namespace

Canvas::Canvas(int w, int h, std::uint8_t bg) {
    img.width = w;
    img.height = h;
    img.pixels.assign(static_cast<std::size_t>(w) * h, bg);
}

void Canvas::fill_rect(int x, int y, int w, int h, std::uint8_t v) {
    for (int yy = std::max(0, y); yy < std::min(img.height, y + h); ++yy)
        for (int xx = std::max(0, x); xx < std::min(img.width, x + w); ++xx)
            img.pixels[static_cast<std::size_t>(yy) * img.width + xx] = v;
}

void Canvas::rect(int x, int y, int w, int h, std::uint8_t v) {
    fill_rect(x, y, w, 1, v);
    fill_rect(x, y + h - 1, w, 1, v);
    fill_rect(x, y, 1, h, v);
    fill_rect(x + w - 1, y, 1, h, v);
}

void Canvas::line(int x0, int y0, int x1, int y1, std::uint8_t v) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        if (x0 >= 0 && x0 < img.width && y0 >= 0 && y0 < img.height)
            img.pixels[static_cast<std::size_t>(y0) * img.width + x0] = v;
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::text(int x, int y, const std::string& s, std::uint8_t v, int scale) {
    int cx = x;
    for (char c : s) {
        if (const Glyph* g = find_glyph(c)) {
            for (int row = 0; row < 7; ++row)
                for (int col = 0; col < 5; ++col)
                    if (g->rows[row] & (1 << (4 - col)))
                        fill_rect(cx + col * scale, y + row * scale, scale, scale, v);
        }
        cx += 6 * scale;
    }
}

void Canvas::save(const std::string& path) const { write_png_gray8(path, img); }

// ---------------------------------------------------------------------------

std::vector<std::string> metric_bar_chart(const std::vector<NamedReport>& reports,
                                          const std::string& out_png) {
    if (reports.empty()) throw ConfigError("metric_bar_chart needs at least one report");
    std::vector<std::string> notes;

    struct MetricRow {
        const char* name;
        double eval::StratumMetrics::*field;
    };
    const MetricRow metric_rows[] = {{"MAE", &eval::StratumMetrics::mae},
                                     {"MSE", &eval::StratumMetrics::mse},
                                     {"SSIM", &eval::StratumMetrics::ssim},
                                     {"PSNR", &eval::StratumMetrics::psnr}};
    const char* strata_names[] = {"SHORT", "LONG", "ALL"};

    const int panel_h = 120, panel_w = 480, margin = 36;
    Canvas canvas(panel_w + 2 * margin, 4 * panel_h + margin + 40);

    auto stratum_of = [](const eval::EvalReport& r, int idx) -> const std::optional<eval::StratumMetrics>& {
        return idx == 0 ? r.short_term : (idx == 1 ? r.long_term : r.all);
    };

    int py = 16;
    for (const auto& metric : metric_rows) {
        canvas.text(6, py, metric.name, 0);
        const int base_y = py + panel_h - 26;
        canvas.line(margin, base_y, margin + panel_w, base_y, 0);

        double max_v = 1e-12;
        for (const auto& nr : reports)
            for (int s = 0; s < 3; ++s)
                if (stratum_of(nr.report, s))
                    max_v = std::max(max_v, std::abs((*stratum_of(nr.report, s)).*metric.field));

        const int group_w = panel_w / 3;
        const int bar_w = std::max(6, group_w / (2 * static_cast<int>(reports.size())));
        for (int s = 0; s < 3; ++s) {
            const int gx = margin + s * group_w;
            canvas.text(gx + group_w / 2 - 14, base_y + 6, strata_names[s], 0);
            for (std::size_t r = 0; r < reports.size(); ++r) {
                const auto& stratum = stratum_of(reports[r].report, s);
                if (!stratum) {
                    if (std::string(metric.name) == "MAE") // note each absent stratum once
                        notes.push_back("stratum '" + std::string(strata_names[s]) + "' absent in report '" +
                                        reports[r].label + "'");
                    continue;
                }
                const double v = (*stratum).*metric.field;
                const int h = static_cast<int>(std::round((panel_h - 46) * std::abs(v) / max_v));
                const int x = gx + 8 + static_cast<int>(r) * (bar_w + 4);
                const std::uint8_t shade = static_cast<std::uint8_t>(40 + 150 * r / std::max<std::size_t>(1, reports.size()));
                canvas.fill_rect(x, base_y - h, bar_w, h, shade);
                char val[32];
                std::snprintf(val, sizeof(val), "%.3g", v);
                canvas.text(x - 2, base_y - h - 9, val, 0);
            }
        }
        py += panel_h;
    }
    // legend: report labels with their shades
    int lx = margin;
    const int ly = 4 * panel_h + 10;
    for (std::size_t r = 0; r < reports.size(); ++r) {
        const std::uint8_t shade = static_cast<std::uint8_t>(40 + 150 * r / std::max<std::size_t>(1, reports.size()));
        canvas.fill_rect(lx, ly, 10, 10, shade);
        canvas.text(lx + 14, ly + 2, reports[r].label, 0);
        lx += 14 + 6 * (static_cast<int>(reports[r].label.size()) + 2);
    }
    canvas.save(out_png);
    return notes;
}

void loss_curve_chart(const std::string& log_csv, const std::string& out_png) {
    std::ifstream in(log_csv);
    if (!in) throw DataError("cannot open training log: " + log_csv);
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty training log: " + log_csv);

    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            row.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str())
                throw DataError("malformed log row " + std::to_string(lineno) + " in " + log_csv);
        }
        if (row.size() != cols.size())
            throw DataError("malformed log row " + std::to_string(lineno) + " in " + log_csv);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("training log has no rows: " + log_csv);

    const int w = 560, h_top = 240, h_bot = 140, margin = 40;
    Canvas canvas(w + 2 * margin, h_top + h_bot + 3 * margin);

    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return static_cast<int>(i);
        return -1;
    };
    struct Series {
        const char* name;
        std::uint8_t shade;
    };
    const Series series[] = {{"loss_d_adv", 170}, {"loss_g_adv", 130}, {"loss_g_asp", 90},
                             {"loss_g_dm", 50},   {"loss_g_total", 0}};

    double max_v = 1e-12;
    for (const auto& s : series) {
        const int ci = col_index(s.name);
        if (ci < 0) continue;
        for (const auto& r : rows) max_v = std::max(max_v, r[static_cast<std::size_t>(ci)]);
    }
    const int base_y = margin + h_top;
    canvas.line(margin, base_y, margin + w, base_y, 0);
    canvas.line(margin, margin, margin, base_y, 0);
    canvas.text(margin, 6, "LOSS PER EPOCH", 0);
    const int n = static_cast<int>(rows.size());
    auto sx = [&](int i) { return margin + (n <= 1 ? 0 : i * w / (n - 1)); };
    int legend_x = margin + 4;
    for (const auto& s : series) {
        const int ci = col_index(s.name);
        if (ci < 0) continue;
        for (int i = 1; i < n; ++i) {
            const double v0 = rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(ci)];
            const double v1 = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(ci)];
            canvas.line(sx(i - 1), base_y - static_cast<int>(h_top * v0 / max_v),
                        sx(i), base_y - static_cast<int>(h_top * v1 / max_v), s.shade);
        }
        canvas.fill_rect(legend_x, base_y + 8, 10, 4, s.shade);
        canvas.text(legend_x + 13, base_y + 5, s.name, 0);
        legend_x += 13 + 6 * (static_cast<int>(std::string(s.name).size()) + 2);
    }

    // validation SSIM panel
    const int vi = col_index("val_ssim");
    if (vi >= 0) {
        const int top = base_y + 2 * margin;
        const int vbase = top + h_bot;
        canvas.text(margin, top - 12, "VAL SSIM", 0);
        canvas.line(margin, vbase, margin + w, vbase, 0);
        for (int i = 1; i < n; ++i) {
            const double v0 = std::clamp(rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(vi)], 0.0, 1.0);
            const double v1 = std::clamp(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(vi)], 0.0, 1.0);
            canvas.line(sx(i - 1), vbase - static_cast<int>(h_bot * v0),
                        sx(i), vbase - static_cast<int>(h_bot * v1), 0);
        }
    }
    canvas.save(out_png);
}

bool image_grid(const std::string& samples_dir, const std::string& out_png, int max_rows) {
    if (!fs::is_directory(samples_dir)) return false;
    // group files by their pairNNN prefix; columns in a fixed role order
    const char* roles[] = {"_input.png", "_gen.png", "_target.png", "_diff_input.png", "_diff_target.png"};
    std::map<std::string, std::map<int, std::string>> rows;
    for (const auto& entry : fs::directory_iterator(samples_dir)) {
        const std::string name = entry.path().filename().string();
        for (int r = 0; r < 5; ++r) {
            const std::string suffix = roles[r];
            if (name.size() > suffix.size() && name.ends_with(suffix))
                rows[name.substr(0, name.size() - suffix.size())][r] = entry.path().string();
        }
    }
    if (rows.empty()) return false;

    std::vector<std::vector<ImageU8>> grid;
    for (const auto& [key, files] : rows) {
        if (static_cast<int>(grid.size()) >= max_rows) break;
        if (files.size() != 5) continue;
        std::vector<ImageU8> row;
        for (int r = 0; r < 5; ++r) row.push_back(read_png_gray8(files.at(r)));
        grid.push_back(std::move(row));
    }
    if (grid.empty()) return false;

    const int cell = grid[0][0].width;
    const int pad = 4, header = 14;
    Canvas canvas(5 * (cell + pad) + pad, static_cast<int>(grid.size()) * (cell + pad) + pad + header);
    const char* titles[] = {"INPUT", "GEN", "TARGET", "GEN-IN", "GEN-TGT"};
    for (int c = 0; c < 5; ++c) canvas.text(pad + c * (cell + pad) + 2, 2, titles[c], 0);
    for (std::size_t r = 0; r < grid.size(); ++r) {
        for (int c = 0; c < 5; ++c) {
            const auto& img = grid[r][c];
            const int ox = pad + c * (cell + pad);
            const int oy = header + pad + static_cast<int>(r) * (cell + pad);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    canvas.img.pixels[static_cast<std::size_t>(oy + y) * canvas.img.width + ox + x] =
                        img.pixels[static_cast<std::size_t>(y) * img.width + x];
        }
    }
    canvas.save(out_png);
    return true;
}

} // namespace tgan::plot
