#include "tgan/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pair_batch.hpp"
#include "tgan/nn/classifier.hpp"
#include "tgan/nn/networks.hpp"
#include "tgan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgan::eval {

namespace {

json stratum_json(const std::optional<StratumMetrics>& s) {
    if (!s) return nullptr; // absent stratum, not zero
    return json{{"mae", s->mae}, {"mse", s->mse}, {"ssim", s->ssim}, {"psnr", s->psnr}, {"n", s->n}};
}

json dfd_json(const std::optional<DfdReport>& d) {
    if (!d) return nullptr;
    return json{{"sum", d->sum},
                {"mean", d->mean},
                {"n", d->n},
                {"classifier_accuracy", d->classifier_accuracy}};
}

const char* split_name(SplitSel s) {
    switch (s) {
    case SplitSel::test: return "test";
    case SplitSel::validation: return "validation";
    case SplitSel::train: return "train";
    }
    return "test";
}

struct Accumulator {
    double mae = 0, mse = 0, ssim = 0, psnr = 0;
    std::size_t n = 0;

    void add(double a, double m, double s, double p) {
        mae += a;
        mse += m;
        ssim += s;
        psnr += p;
        ++n;
    }
    std::optional<StratumMetrics> finish() const {
        if (!n) return std::nullopt;
        const double inv = 1.0 / static_cast<double>(n);
        return StratumMetrics{mae * inv, mse * inv, ssim * inv, psnr * inv, n};
    }
};

} // namespace

json EvalReport::to_json() const {
    json j;
    j["split"] = split;
    j["fold"] = fold;
    j["strata"] = {{"short", stratum_json(short_term)},
                   {"long", stratum_json(long_term)},
                   {"all", stratum_json(all)}};
    j["dfd"] = {{"ad_cn", dfd_json(dfd_ad_cn)}, {"ad_mci", dfd_json(dfd_ad_mci)}};
    if (indicators) {
        j["indicators"] = {{"mae", indicators->mae},   {"mse", indicators->mse},
                           {"mape", indicators->mape}, {"rmse", indicators->rmse},
                           {"r2", indicators->r2},     {"n_observed", indicators->n_observed}};
    } else {
        j["indicators"] = nullptr;
    }
    return j;
}

std::string EvalReport::to_text() const {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "split=%s fold=%d\n", split.c_str(), fold);
    out += line;
    out += "term        n      MAE       MSE       SSIM      PSNR\n";
    auto row = [&](const char* name, const std::optional<StratumMetrics>& s) {
        if (!s) {
            std::snprintf(line, sizeof(line), "%-10s  absent\n", name);
        } else {
            std::snprintf(line, sizeof(line), "%-10s %5zu  %.5f  %.5f  %.4f  %6.2f\n", name, s->n,
                          s->mae, s->mse, s->ssim, s->psnr);
        }
        out += line;
    };
    row("short", short_term);
    row("long", long_term);
    row("all", all);
    if (dfd_ad_cn) {
        std::snprintf(line, sizeof(line), "DFD(AD/CN)  mean=%.4f sum=%.2f n=%zu clf_acc=%.3f\n",
                      dfd_ad_cn->mean, dfd_ad_cn->sum, dfd_ad_cn->n, dfd_ad_cn->classifier_accuracy);
        out += line;
    }
    if (dfd_ad_mci) {
        std::snprintf(line, sizeof(line), "DFD(AD/MCI) mean=%.4f sum=%.2f n=%zu clf_acc=%.3f\n",
                      dfd_ad_mci->mean, dfd_ad_mci->sum, dfd_ad_mci->n, dfd_ad_mci->classifier_accuracy);
        out += line;
    }
    if (indicators) {
        std::snprintf(line, sizeof(line),
                      "indicators  MAE=%.5f MSE=%.5f MAPE=%.4f RMSE=%.5f R2=%.5f n=%zu\n",
                      indicators->mae, indicators->mse, indicators->mape, indicators->rmse,
                      indicators->r2, indicators->n_observed);
        out += line;
    }
    return out;
}

EvalReport evaluate(const nn::Checkpoint* ckpt, const Corpus& corpus, const FoldAssignment& folds,
                    const EvalOptions& opts) {
    if (!ckpt && !opts.identity_baseline)
        throw ConfigError("evaluate needs a checkpoint unless the identity baseline is requested");
    if (static_cast<int>(folds.partition.size()) != static_cast<int>(corpus.subjects.size()))
        throw ConfigError("fold assignment does not match the corpus");

    std::optional<nn::Generator> gen;
    std::optional<nn::IndicatorDiscriminator> d_ind;
    if (ckpt) {
        if (ckpt->config.image_size != corpus.params.image_size)
            throw ConfigError("checkpoint image_size does not match the corpus");
        gen.emplace(ckpt->config);
        nn::restore_into(*ckpt, ckpt->config, gen->named_tensors());
        d_ind.emplace(ckpt->config);
        nn::restore_into(*ckpt, ckpt->config, d_ind->named_tensors());
    }

    // pair selection by split
    auto in_split = [&](int subject) {
        const int part = folds.partition[static_cast<std::size_t>(subject)];
        switch (opts.split) {
        case SplitSel::test: return part == -1;
        case SplitSel::validation: return part == opts.fold_id;
        case SplitSel::train: return part != -1 && part != opts.fold_id;
        }
        return false;
    };
    std::vector<TrainingPair> pairs;
    for (const auto& p : build_pairs(corpus))
        if (in_split(p.subject)) pairs.push_back(p);

    EvalReport report;
    report.split = split_name(opts.split);
    report.fold = opts.fold_id;
    if (pairs.empty()) return report;

    const int size = corpus.params.image_size;
    const int L = ckpt ? ckpt->config.age_code_length : 1000;
    Accumulator acc_short, acc_long, acc_all;

    std::vector<std::vector<double>> ind_pred, ind_truth;
    std::vector<std::vector<std::uint8_t>> ind_mask;

    std::vector<ImageU8> generated(pairs.size());
    int dumped = 0;
    if (opts.dump_images > 0) fs::create_directories(opts.dump_dir);

    const std::size_t batch = static_cast<std::size_t>(std::max(1, opts.batch_size));
    for (std::size_t lo = 0; lo < pairs.size(); lo += batch) {
        const std::size_t hi = std::min(pairs.size(), lo + batch);
        auto pb = detail::make_pair_batch(corpus, pairs, lo, hi, L, 100.0);
        Tensor y_hat;
        if (gen) y_hat = gen->forward(pb.x, pb.diff);

        Tensor pred;
        if (d_ind) pred = d_ind->forward(pb.y); // indicator branch accuracy on real targets

        for (std::size_t i = lo; i < hi; ++i) {
            const auto& pair = pairs[i];
            const auto& subj = corpus.subjects[static_cast<std::size_t>(pair.subject)];
            const auto& vi = subj.visits[static_cast<std::size_t>(pair.visit_i)];
            const auto& vj = subj.visits[static_cast<std::size_t>(pair.visit_j)];

            ImageU8 gen_img = gen ? train::tensor_to_image(y_hat, static_cast<int>(i - lo)) : vi.image;
            const auto a = metrics::to_unit_range(gen_img);
            const auto b = metrics::to_unit_range(vj.image);
            const auto err = metrics::image_error_metrics(a, b);
            const double s = metrics::ssim(a, b, size, size);
            const double p = metrics::psnr(a, b).db;
            acc_all.add(err.mae, err.mse, s, p);
            (pair.term == Term::short_term ? acc_short : acc_long).add(err.mae, err.mse, s, p);

            if (d_ind) {
                const int P = corpus.params.n_indicators;
                std::vector<double> prow(static_cast<std::size_t>(P));
                for (int q = 0; q < P; ++q)
                    prow[static_cast<std::size_t>(q)] = pred.data[(i - lo) * static_cast<std::size_t>(P) + static_cast<std::size_t>(q)];
                std::vector<std::uint8_t> mask = vj.mask;
                if (!opts.indicator_selection.empty()) {
                    std::vector<std::uint8_t> selmask(mask.size(), 0);
                    for (int idx : opts.indicator_selection)
                        selmask[static_cast<std::size_t>(idx)] = mask[static_cast<std::size_t>(idx)];
                    mask = selmask;
                }
                std::vector<double> truth = vj.indicators;
                for (std::size_t q = 0; q < truth.size(); ++q)
                    if (!mask[q]) truth[q] = 0.0; // excluded cells never read
                ind_pred.push_back(std::move(prow));
                ind_truth.push_back(std::move(truth));
                ind_mask.push_back(std::move(mask));
            }

            generated[i] = std::move(gen_img);

            if (dumped < opts.dump_images) {
                auto diff_img = [&](const ImageU8& u, const ImageU8& v) {
                    ImageU8 d;
                    d.height = u.height;
                    d.width = u.width;
                    d.pixels.resize(u.pixels.size());
                    for (std::size_t j = 0; j < u.pixels.size(); ++j)
                        d.pixels[j] = static_cast<std::uint8_t>(
                            std::abs(static_cast<int>(u.pixels[j]) - static_cast<int>(v.pixels[j])));
                    return d;
                };
                char name[128];
                std::snprintf(name, sizeof(name), "pair%03d_%s_%.1f_to_%.1f", dumped,
                              subj.subject_id.c_str(), pair.age_i, pair.age_j);
                const fs::path base = fs::path(opts.dump_dir) / name;
                write_png_gray8(base.string() + "_gen.png", generated[i]);
                write_png_gray8(base.string() + "_input.png", vi.image);
                write_png_gray8(base.string() + "_target.png", vj.image);
                write_png_gray8(base.string() + "_diff_input.png", diff_img(generated[i], vi.image));
                write_png_gray8(base.string() + "_diff_target.png", diff_img(generated[i], vj.image));
                ++dumped;
            }
        }
    }

    report.short_term = acc_short.finish();
    report.long_term = acc_long.finish();
    report.all = acc_all.finish();
    if (!ind_pred.empty()) report.indicators = metrics::indicator_metrics(ind_pred, ind_truth, ind_mask);

    if (opts.with_dfd) {
        // classifiers train on non-test subjects; distances on this split's pairs
        std::vector<int> train_subjects;
        for (std::size_t s = 0; s < corpus.subjects.size(); ++s)
            if (folds.partition[s] != -1) train_subjects.push_back(static_cast<int>(s));

        for (auto pair_kind : {nn::ClassPair::ad_cn, nn::ClassPair::ad_mci}) {
            const Diagnosis other = (pair_kind == nn::ClassPair::ad_cn) ? Diagnosis::CN : Diagnosis::MCI;
            nn::TrainedClassifier clf;
            try {
                clf = nn::train_feature_classifier(corpus, train_subjects, pair_kind, opts.dfd_seed);
            } catch (const ConfigError&) {
                continue; // class absent: stratum stays absent
            }
            std::vector<const ImageU8*> gen_imgs, real_imgs;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                const auto& subj = corpus.subjects[static_cast<std::size_t>(pairs[i].subject)];
                const auto& vj = subj.visits[static_cast<std::size_t>(pairs[i].visit_j)];
                if (vj.diagnosis != Diagnosis::AD && vj.diagnosis != other) continue;
                gen_imgs.push_back(&generated[i]);
                real_imgs.push_back(&vj.image);
            }
            if (gen_imgs.empty()) continue;
            auto f_gen = nn::extract_features(clf.model, gen_imgs, opts.dfd_logits);
            auto f_real = nn::extract_features(clf.model, real_imgs, opts.dfd_logits);
            const auto d = metrics::dfd(f_gen, f_real, opts.dfd_norm);
            DfdReport dr{d.sum, d.mean, d.n, clf.holdout_accuracy};
            if (pair_kind == nn::ClassPair::ad_cn)
                report.dfd_ad_cn = dr;
            else
                report.dfd_ad_mci = dr;
        }
    }
    return report;
}

} // namespace tgan::eval
