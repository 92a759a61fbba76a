#include "tgan/ablation.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tgan/anova.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgan::train {

namespace {

std::vector<int> parse_indicator_cell(const std::string& cell, const Corpus& corpus,
                                      const FoldAssignment& folds, std::uint64_t seed) {
    if (cell == "all") return {};
    const auto colon = cell.find(':');
    if (colon == std::string::npos)
        throw ConfigError("indicator cell '" + cell + "' must be top:K, random:K or all");
    const std::string kind = cell.substr(0, colon);
    int k = 0;
    try {
        k = std::stoi(cell.substr(colon + 1));
    } catch (...) {
        throw ConfigError("indicator cell '" + cell + "' has a malformed K");
    }
    if (kind == "random") return select_random_k(corpus.params.n_indicators, k, seed);
    if (kind != "top") throw ConfigError("indicator cell '" + cell + "' must be top:K, random:K or all");

    // rank on the non-test portion only so selection never sees held-out data
    Corpus train_view;
    train_view.params = corpus.params;
    for (std::size_t s = 0; s < corpus.subjects.size(); ++s)
        if (folds.partition[s] != -1) train_view.subjects.push_back(corpus.subjects[s]);
    train_view.params.n_subjects = static_cast<int>(train_view.subjects.size());
    return select_top_k(rank_indicators_anova(train_view), k);
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

} // namespace

std::string ablation_table_text(const std::vector<AblationRow>& rows) {
    std::string out = "cell            MAE(all)  SSIM(all)  PSNR(all)  SSIM(short)  SSIM(long)  ind.MAE   ind.R2\n";
    char line[256];
    for (const auto& r : rows) {
        auto g = [&](const std::optional<eval::StratumMetrics>& s, double eval::StratumMetrics::*field) {
            return s ? (*s).*field : std::nan("");
        };
        const double ind_mae = r.report.indicators ? r.report.indicators->mae : std::nan("");
        const double ind_r2 = r.report.indicators ? r.report.indicators->r2 : std::nan("");
        std::snprintf(line, sizeof(line), "%-15s %.5f   %.4f     %6.2f     %.4f       %.4f      %.5f   %.5f\n",
                      r.label.c_str(), g(r.report.all, &eval::StratumMetrics::mae),
                      g(r.report.all, &eval::StratumMetrics::ssim),
                      g(r.report.all, &eval::StratumMetrics::psnr),
                      g(r.report.short_term, &eval::StratumMetrics::ssim),
                      g(r.report.long_term, &eval::StratumMetrics::ssim), ind_mae, ind_r2);
        out += line;
    }
    return out;
}

std::vector<AblationRow> run_ablation(const Corpus& corpus, const FoldAssignment& folds, int fold_id,
                                      const TrainConfig& base, const std::string& grid,
                                      const std::vector<std::string>& cells,
                                      const std::string& out_dir) {
    std::vector<std::string> resolved = cells;
    if (resolved.empty()) {
        if (grid == "loss")
            resolved = {"adv", "adv+asp", "adv+dm", "all"};
        else if (grid == "indicators")
            resolved = {"top:1", "top:5", "top:10", "random:5", "all"};
    }
    if (resolved.empty()) throw ConfigError("ablation grid '" + grid + "' has no cells");
    if (grid != "loss" && grid != "indicators")
        throw ConfigError("unknown ablation grid '" + grid + "' (use loss or indicators)");

    fs::create_directories(out_dir);
    std::vector<AblationRow> rows;
    for (const auto& cell : resolved) {
        TrainConfig cfg = base; // shared seed and fold across cells
        if (grid == "loss")
            cfg.loss_set = LossSet::parse(cell);
        else
            cfg.indicator_selection = parse_indicator_cell(cell, corpus, folds, base.seed);

        const std::string run_dir = (fs::path(out_dir) / sanitize(cell)).string();
        auto result = train(cfg, corpus, folds, fold_id, run_dir);

        auto ckpt = nn::load_checkpoint(result.ckpt_best);
        eval::EvalOptions opts;
        opts.split = eval::SplitSel::test;
        opts.fold_id = fold_id;
        opts.with_dfd = false;
        opts.batch_size = cfg.batch_size;
        opts.indicator_selection = cfg.indicator_selection;
        rows.push_back({cell, eval::evaluate(&ckpt, corpus, folds, opts)});
    }

    json j = json::array();
    for (const auto& r : rows) j.push_back({{"cell", r.label}, {"report", r.report.to_json()}});
    {
        std::ofstream out(fs::path(out_dir) / "ablation.json");
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "ablation.txt");
        out << ablation_table_text(rows);
    }
    return rows;
}

} // namespace tgan::train
