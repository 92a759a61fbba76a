#include "tgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pair_batch.hpp"
#include "tgan/metrics.hpp"
#include "tgan/nn/adam.hpp"

namespace fs = std::filesystem;

namespace tgan::train {

LossSet LossSet::parse(const std::string& s) {
    if (s == "adv") return {true, false, false};
    if (s == "adv+asp" || s == "asp+adv") return {true, true, false};
    if (s == "adv+dm" || s == "dm+adv") return {true, false, true};
    if (s == "all" || s == "adv+asp+dm") return {true, true, true};
    throw ConfigError("unknown loss set '" + s + "' (use adv|adv+asp|adv+dm|all)");
}

std::string LossSet::str() const {
    if (asp && dm) return "all";
    if (asp) return "adv+asp";
    if (dm) return "adv+dm";
    return "adv";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr_min <= lr_init)) throw ConfigError("lr_min must not exceed lr_init");
    if (anneal_cycle_epochs < 1) throw ConfigError("anneal cycle must be >= 1 epoch");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!loss_set.adv) throw ConfigError("the adversarial loss is always part of the objective");
    if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0)
        throw ConfigError("loss weights must be non-negative");
    net.validate();
    for (int idx : indicator_selection)
        if (idx < 0 || idx >= net.n_indicators)
            throw ConfigError("indicator selection index " + std::to_string(idx) + " out of range");
}

std::string TrainConfig::resolved_text() const {
    std::ostringstream out;
    char buf[64];
    auto put = [&](const char* key, const std::string& v) { out << key << "=" << v << "\n"; };
    auto putd = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        put(key, buf);
    };
    put("loss", loss_set.str());
    out << "epochs=" << epochs << "\n";
    putd("lr_init", lr_init);
    putd("lr_min", lr_min);
    out << "anneal_cycle_epochs=" << anneal_cycle_epochs << "\n";
    out << "batch_size=" << batch_size << "\n";
    putd("alpha", weights.alpha);
    putd("beta", weights.beta);
    putd("gamma", weights.gamma);
    out << "seed=" << seed << "\n";
    put("asp_mode", asp_mode == CosineMode::literal ? "cos" : "one-minus-cos");
    put("target_mode", target_mode == losses::AspTarget::paper_literal ? "paper-literal" : "target");
    putd("adam_beta1", adam_beta1);
    putd("adam_beta2", adam_beta2);
    out << "k_folds=" << k_folds << "\n";
    putd("holdout_fraction", holdout_fraction);
    putd("max_age", max_age);
    {
        std::string sel;
        for (std::size_t i = 0; i < indicator_selection.size(); ++i) {
            if (i) sel += ";";
            sel += std::to_string(indicator_selection[i]);
        }
        put("indicator_selection", sel.empty() ? "all" : sel);
    }
    out << "image_size=" << net.image_size << "\n";
    out << "base_channels=" << net.base_channels << "\n";
    out << "age_code_length=" << net.age_code_length << "\n";
    out << "d_a=" << net.d_a << "\n";
    out << "d_k=" << net.d_k << "\n";
    out << "cond_hidden=" << net.cond_hidden << "\n";
    out << "n_indicators=" << net.n_indicators << "\n";
    return out.str();
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    const int cycle = cfg.anneal_cycle_epochs;
    const int e = epoch % cycle;
    const double t = static_cast<double>(e) / static_cast<double>(cycle);
    return cfg.lr_min + 0.5 * (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

ImageU8 tensor_to_image(const Tensor& y, int sample) {
    const int h = y.dim(2), w = y.dim(3);
    ImageU8 img;
    img.height = h;
    img.width = w;
    img.pixels.resize(static_cast<std::size_t>(h) * w);
    const float* src = y.ptr() + static_cast<std::size_t>(sample) * h * w;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const float v = std::clamp((src[i] + 1.0f) * 0.5f, 0.0f, 1.0f);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
}

namespace {

using detail::PairBatch;

std::vector<std::uint8_t> effective_mask(const std::vector<std::uint8_t>& visit_mask,
                                         const std::vector<int>& selection) {
    if (selection.empty()) return visit_mask;
    std::vector<std::uint8_t> m(visit_mask.size(), 0);
    for (int idx : selection) m[static_cast<std::size_t>(idx)] = visit_mask[static_cast<std::size_t>(idx)];
    return m;
}

// NaN sentinels cannot enter float tensors that feed losses; observed slots
// only are copied.
std::vector<float> masked_to_float(const std::vector<double>& v, const std::vector<std::uint8_t>& mask) {
    std::vector<float> out(v.size(), 0.0f);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (mask[i]) out[i] = static_cast<float>(v[i]);
    return out;
}

double validation_ssim(nn::Generator& gen, const Corpus& corpus,
                       const std::vector<TrainingPair>& val_pairs, const TrainConfig& cfg) {
    if (val_pairs.empty()) return 0.0;
    const int size = corpus.params.image_size;
    double acc = 0.0;
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t lo = 0; lo < val_pairs.size(); lo += batch) {
        const std::size_t hi = std::min(val_pairs.size(), lo + batch);
        auto pb = detail::make_pair_batch(corpus, val_pairs, lo, hi, cfg.net.age_code_length, cfg.max_age);
        Tensor y_hat = gen.forward(pb.x, pb.diff);
        for (std::size_t i = lo; i < hi; ++i) {
            const ImageU8 gen_img = tensor_to_image(y_hat, static_cast<int>(i - lo));
            const auto& pair = val_pairs[i];
            const auto& target = corpus.subjects[static_cast<std::size_t>(pair.subject)]
                                     .visits[static_cast<std::size_t>(pair.visit_j)].image;
            acc += metrics::ssim(metrics::to_unit_range(gen_img), metrics::to_unit_range(target), size, size);
        }
    }
    return acc / static_cast<double>(val_pairs.size());
}

} // namespace

TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const FoldAssignment& folds,
                  int fold_id, const std::string& run_dir) {
    cfg.validate();
    if (static_cast<int>(folds.partition.size()) != static_cast<int>(corpus.subjects.size()))
        throw ConfigError("fold assignment covers " + std::to_string(folds.partition.size()) +
                          " subjects but the corpus has " + std::to_string(corpus.subjects.size()));
    if (fold_id < 0 || fold_id >= folds.k)
        throw ConfigError("fold id " + std::to_string(fold_id) + " outside [0," +
                          std::to_string(folds.k) + ")");
    if (cfg.net.image_size != corpus.params.image_size)
        throw ConfigError("network image_size " + std::to_string(cfg.net.image_size) +
                          " does not match corpus image_size " +
                          std::to_string(corpus.params.image_size));
    if (cfg.net.n_indicators != corpus.params.n_indicators)
        throw ConfigError("network n_indicators " + std::to_string(cfg.net.n_indicators) +
                          " does not match corpus n_indicators " +
                          std::to_string(corpus.params.n_indicators));

    fs::create_directories(run_dir);
    {
        std::ofstream cfg_out(fs::path(run_dir) / "config.resolved");
        cfg_out << cfg.resolved_text();
    }

    const auto all_pairs = build_pairs(corpus);
    std::vector<TrainingPair> train_pairs, val_pairs;
    for (const auto& p : all_pairs) {
        const int part = folds.partition[static_cast<std::size_t>(p.subject)];
        if (part == -1) continue; // held-out test subjects
        if (part == fold_id)
            val_pairs.push_back(p);
        else
            train_pairs.push_back(p);
    }
    if (train_pairs.empty()) throw ConfigError("no training pairs left after the fold split");

    // models and optimizers
    nn::Generator gen(cfg.net);
    nn::PatchDiscriminator d_adv(cfg.net);
    nn::IndicatorDiscriminator d_ind(cfg.net);
    Rng root(cfg.seed);
    {
        Rng r = root.derive("init-generator");
        gen.init(r);
        r = root.derive("init-d-adv");
        d_adv.init(r);
        r = root.derive("init-d-ind");
        d_ind.init(r);
    }
    nn::Adam opt_g(gen.params(), cfg.adam_beta1, cfg.adam_beta2);
    nn::Adam opt_d_adv(d_adv.params(), cfg.adam_beta1, cfg.adam_beta2);
    nn::Adam opt_d_ind(d_ind.params(), cfg.adam_beta1, cfg.adam_beta2);

    const int P = cfg.net.n_indicators;
    const int L = cfg.net.age_code_length;
    const std::size_t npx = static_cast<std::size_t>(cfg.net.image_size) * cfg.net.image_size;

    auto named = gen.named_tensors();
    {
        auto d1 = d_adv.named_tensors();
        auto d2 = d_ind.named_tensors();
        named.insert(named.end(), d1.begin(), d1.end());
        named.insert(named.end(), d2.begin(), d2.end());
    }
    auto save_ckpt = [&](const std::string& path, int epoch, double val) {
        nlohmann::json meta{{"seed", cfg.seed},       {"fold", fold_id},
                            {"epoch", epoch},         {"val_ssim", val},
                            {"loss", cfg.loss_set.str()}, {"max_age", cfg.max_age}};
        nn::save_checkpoint(path, cfg.net, meta, named);
    };

    TrainResult result;
    result.ckpt_best = (fs::path(run_dir) / "ckpt_best").string();
    result.ckpt_last = (fs::path(run_dir) / "ckpt_last").string();

    std::ofstream log_csv(fs::path(run_dir) / "log.csv");
    log_csv << "epoch,lr,loss_d_adv,loss_d_dm,loss_g_adv,loss_g_asp,loss_g_dm,loss_g_total,val_ssim\n";

    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);
        Rng shuffle_rng = root.derive("epoch-shuffle").derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);

        EpochLog ep;
        ep.epoch = epoch;
        ep.lr = lr;
        std::size_t n_batches = 0;

        std::vector<TrainingPair> shuffled(train_pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train_pairs[order[i]];

        for (std::size_t lo = 0; lo < shuffled.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi = std::min(shuffled.size(), lo + static_cast<std::size_t>(cfg.batch_size));
            const int b = static_cast<int>(hi - lo);
            auto pb = detail::make_pair_batch(corpus, shuffled, lo, hi, L, cfg.max_age);

            // generated candidate (kept for both discriminator and generator steps)
            Tensor y_hat = gen.forward(pb.x, pb.diff);

            const float inv_b = 1.0f / static_cast<float>(b);
            double batch_d_adv = 0.0;

            // --- adversarial discriminator head
            opt_d_adv.zero_grad();
            {
                Tensor map_real = d_adv.forward(pb.x, pb.y);
                const std::size_t map_n = map_real.numel() / static_cast<std::size_t>(b);
                Tensor g(map_real.shape);
                for (int i = 0; i < b; ++i) {
                    std::span<const float> patch(map_real.ptr() + i * map_n, map_n);
                    batch_d_adv += losses::adv_real_term<float>(patch);
                    losses::adv_real_term_backward<float>(patch, {g.ptr() + i * map_n, map_n}, inv_b);
                }
                d_adv.backward(g, false);
            }
            {
                Tensor map_fake = d_adv.forward(pb.x, y_hat); // y_hat detached: no G backward here
                const std::size_t map_n = map_fake.numel() / static_cast<std::size_t>(b);
                Tensor g(map_fake.shape);
                for (int i = 0; i < b; ++i) {
                    std::span<const float> patch(map_fake.ptr() + i * map_n, map_n);
                    batch_d_adv += losses::adv_fake_term<float>(patch);
                    losses::adv_fake_term_backward<float>(patch, {g.ptr() + i * map_n, map_n}, inv_b);
                }
                d_adv.backward(g, false);
            }
            opt_d_adv.step(lr);
            ep.loss_d_adv += batch_d_adv / b;

            // --- indicator head, trained on real images only (missing cells masked)
            double batch_d_dm = 0.0;
            Tensor pred_real_const; // doubles as Eq.-10's constant in the generator step
            {
                opt_d_ind.zero_grad();
                Tensor pred = d_ind.forward(pb.y);
                pred_real_const = pred;
                Tensor g({b, P});
                for (int i = 0; i < b; ++i) {
                    const auto mask = effective_mask(pb.mask[static_cast<std::size_t>(i)], cfg.indicator_selection);
                    const auto c = masked_to_float(pb.target_indicators[static_cast<std::size_t>(i)], mask);
                    std::vector<float> prow(pred.ptr() + static_cast<std::size_t>(i) * P,
                                            pred.ptr() + static_cast<std::size_t>(i + 1) * P);
                    batch_d_dm += losses::dm_loss_d<float>(prow, c, mask);
                    std::vector<float> grow(static_cast<std::size_t>(P));
                    losses::dm_loss_d_backward<float>(prow, c, mask, grow);
                    for (int p = 0; p < P; ++p)
                        g.ptr()[static_cast<std::size_t>(i) * P + p] = grow[static_cast<std::size_t>(p)] * inv_b;
                }
                d_ind.backward(g, false);
                opt_d_ind.step(lr);
                ep.loss_d_dm += batch_d_dm / b;
            }

            // --- generator step on the loss set
            opt_g.zero_grad();
            Tensor dy_total({b, 1, cfg.net.image_size, cfg.net.image_size});
            double batch_g_adv = 0.0, batch_g_asp = 0.0, batch_g_dm = 0.0;

            {
                Tensor map_fake = d_adv.forward(pb.x, y_hat);
                const std::size_t map_n = map_fake.numel() / static_cast<std::size_t>(b);
                Tensor g(map_fake.shape);
                for (int i = 0; i < b; ++i) {
                    std::span<const float> patch(map_fake.ptr() + i * map_n, map_n);
                    batch_g_adv += losses::adv_loss_g<float>(patch);
                    losses::adv_real_term_backward<float>(patch, {g.ptr() + i * map_n, map_n},
                                                          inv_b * static_cast<float>(cfg.weights.alpha));
                }
                Tensor d_cand = d_adv.backward(g, true, false);
                for (std::size_t i = 0; i < dy_total.numel(); ++i) dy_total.ptr()[i] += d_cand.ptr()[i];
            }

            if (cfg.loss_set.asp) {
                const Tensor& reference = (cfg.target_mode == losses::AspTarget::target) ? pb.y : pb.x;
                for (int i = 0; i < b; ++i) {
                    const double scale = (cfg.asp_mode == CosineMode::literal)
                                             ? pb.cos_literal[static_cast<std::size_t>(i)]
                                             : pb.cos_complement[static_cast<std::size_t>(i)];
                    const float* yh = y_hat.ptr() + static_cast<std::size_t>(i) * npx;
                    const float* ref = reference.ptr() + static_cast<std::size_t>(i) * npx;
                    float* dst = dy_total.ptr() + static_cast<std::size_t>(i) * npx;
                    double l1 = 0.0;
                    const float gmag = static_cast<float>(scale / static_cast<double>(npx) *
                                                          cfg.weights.beta) * inv_b;
                    for (std::size_t j = 0; j < npx; ++j) {
                        const float d = yh[j] - ref[j];
                        l1 += std::abs(static_cast<double>(d));
                        dst[j] += d > 0 ? gmag : (d < 0 ? -gmag : 0.0f);
                    }
                    batch_g_asp += l1 / static_cast<double>(npx) * scale;
                }
            }

            if (cfg.loss_set.dm) {
                // constant wrt the generator; reuses the discriminator-step pass
                std::vector<std::vector<float>> real_rows(static_cast<std::size_t>(b));
                for (int i = 0; i < b; ++i)
                    real_rows[static_cast<std::size_t>(i)] =
                        std::vector<float>(pred_real_const.ptr() + static_cast<std::size_t>(i) * P,
                                           pred_real_const.ptr() + static_cast<std::size_t>(i + 1) * P);
                Tensor pred_fake = d_ind.forward(y_hat);
                Tensor g({b, P});
                for (int i = 0; i < b; ++i) {
                    const auto mask = effective_mask(pb.mask[static_cast<std::size_t>(i)], cfg.indicator_selection);
                    std::vector<float> frow(pred_fake.ptr() + static_cast<std::size_t>(i) * P,
                                            pred_fake.ptr() + static_cast<std::size_t>(i + 1) * P);
                    batch_g_dm += losses::dm_loss_g<float>(frow, real_rows[static_cast<std::size_t>(i)], mask);
                    std::vector<float> grow(static_cast<std::size_t>(P));
                    losses::dm_loss_g_backward<float>(frow, real_rows[static_cast<std::size_t>(i)], mask, grow);
                    for (int p = 0; p < P; ++p)
                        g.ptr()[static_cast<std::size_t>(i) * P + p] =
                            grow[static_cast<std::size_t>(p)] * inv_b * static_cast<float>(cfg.weights.gamma);
                }
                Tensor d_img = d_ind.backward(g, true, false);
                for (std::size_t i = 0; i < dy_total.numel(); ++i) dy_total.ptr()[i] += d_img.ptr()[i];
            }

            const double g_adv_mean = batch_g_adv / b;
            const double g_asp_mean = batch_g_asp / b;
            const double g_dm_mean = batch_g_dm / b;
            const double g_total = losses::total_generator_loss<double>(
                g_adv_mean, cfg.loss_set.asp ? g_asp_mean : 0.0, cfg.loss_set.dm ? g_dm_mean : 0.0,
                cfg.weights);
            if (!std::isfinite(g_total) || !std::isfinite(batch_d_adv) || !std::isfinite(batch_d_dm))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(n_batches));

            gen.backward(dy_total);
            opt_g.step(lr);

            ep.loss_g_adv += g_adv_mean;
            ep.loss_g_asp += g_asp_mean;
            ep.loss_g_dm += g_dm_mean;
            ep.loss_g_total += g_total;
            ++n_batches;
        }

        const double inv_nb = n_batches ? 1.0 / static_cast<double>(n_batches) : 0.0;
        ep.loss_d_adv *= inv_nb;
        ep.loss_d_dm *= inv_nb;
        ep.loss_g_adv *= inv_nb;
        ep.loss_g_asp *= inv_nb;
        ep.loss_g_dm *= inv_nb;
        ep.loss_g_total *= inv_nb;
        ep.val_ssim = validation_ssim(gen, corpus, val_pairs, cfg);

        char line[256];
        std::snprintf(line, sizeof(line), "%d,%.10g,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f,%.8f\n", ep.epoch,
                      ep.lr, ep.loss_d_adv, ep.loss_d_dm, ep.loss_g_adv, ep.loss_g_asp, ep.loss_g_dm,
                      ep.loss_g_total, ep.val_ssim);
        log_csv << line;
        log_csv.flush();
        result.log.push_back(ep);

        save_ckpt(result.ckpt_last, epoch, ep.val_ssim);
        if (result.best_epoch < 0 || ep.val_ssim > result.best_val_ssim) {
            result.best_epoch = epoch;
            result.best_val_ssim = ep.val_ssim;
            save_ckpt(result.ckpt_best, epoch, ep.val_ssim);
        }
    }
    return result;
}

std::vector<ImageU8> predict_sequence(const nn::Checkpoint& ckpt, const ImageU8& input,
                                      double age_i, const std::vector<double>& target_ages,
                                      double max_age) {
    nn::Generator gen(ckpt.config);
    nn::restore_into(ckpt, ckpt.config, gen.named_tensors());

    const int size = ckpt.config.image_size;
    if (input.height != size || input.width != size)
        throw ShapeError("input image is " + std::to_string(input.width) + "x" +
                         std::to_string(input.height) + ", checkpoint expects " + std::to_string(size));
    Tensor x({1, 1, size, size});
    detail::image_to_sample(input, x.ptr());
    const AgeCode code_i = encode_age(age_i, ckpt.config.age_code_length, max_age);

    std::vector<ImageU8> out;
    for (double target : target_ages) {
        if (!(target > age_i))
            throw std::domain_error("target age " + std::to_string(target) +
                                    " must exceed the input age " + std::to_string(age_i));
        const AgeCode code_j = encode_age(target, ckpt.config.age_code_length, max_age);
        const AgeDiffCode diff = age_difference_code(code_i, code_j);
        Tensor d({1, ckpt.config.age_code_length});
        for (int k = 0; k < ckpt.config.age_code_length; ++k)
            d.ptr()[k] = static_cast<float>(diff.values[static_cast<std::size_t>(k)]);
        Tensor y = gen.forward(x, d);
        out.push_back(tensor_to_image(y, 0));
    }
    return out;
}

} // namespace tgan::train
