#ifndef TGAN_EVALUATE_HPP
#define TGAN_EVALUATE_HPP

#include <optional>
#include <string>

#include "json.hpp"

#include "tgan/corpus.hpp"
#include "tgan/metrics.hpp"
#include "tgan/nn/checkpoint.hpp"

namespace tgan::eval {

struct StratumMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double ssim = 0.0;
    double psnr = 0.0;
    std::size_t n = 0;
};

struct DfdReport {
    double sum = 0.0;
    double mean = 0.0;
    std::size_t n = 0;
    double classifier_accuracy = 0.0;
};

struct EvalReport {
    std::string split = "test";
    int fold = 0;
    std::optional<StratumMetrics> short_term, long_term, all;
    std::optional<DfdReport> dfd_ad_cn, dfd_ad_mci;
    std::optional<metrics::IndicatorMetrics> indicators;

    nlohmann::json to_json() const;
    std::string to_text() const; // plain-text table by term stratum
};

enum class SplitSel { test, validation, train };

struct EvalOptions {
    SplitSel split = SplitSel::test;
    int fold_id = 0;
    bool identity_baseline = false; // y_hat := x_i, no model involved
    bool with_dfd = true;
    metrics::DfdNorm dfd_norm = metrics::DfdNorm::euclidean;
    bool dfd_logits = false;
    std::uint64_t dfd_seed = 1;
    int batch_size = 16;
    std::vector<int> indicator_selection; // restrict indicator metrics; empty = all
    int dump_images = 0;                  // triplet rows written for plotting
    std::string dump_dir;
};

// Generates y_hat for every pair of the chosen split, computes all metrics
// stratified short/long/all, indicator-branch regression metrics and the
// disease feature distance. ckpt may be null only with identity_baseline.
EvalReport evaluate(const nn::Checkpoint* ckpt, const Corpus& corpus, const FoldAssignment& folds,
                    const EvalOptions& opts);

} // namespace tgan::eval

#endif
