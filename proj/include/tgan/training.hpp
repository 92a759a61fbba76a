#ifndef TGAN_TRAINING_HPP
#define TGAN_TRAINING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tgan/corpus.hpp"
#include "tgan/losses.hpp"
#include "tgan/nn/checkpoint.hpp"
#include "tgan/nn/networks.hpp"

namespace tgan::train {

struct LossSet {
    bool adv = true; // always on: the ablation baseline
    bool asp = true;
    bool dm = true;

    static LossSet parse(const std::string& s);
    std::string str() const;
};

struct TrainConfig {
    int epochs = 50;
    double lr_init = 1e-5;
    double lr_min = 1e-8;
    int anneal_cycle_epochs = 30;
    int batch_size = 16;
    losses::LossWeights weights;
    std::uint64_t seed = 1;
    LossSet loss_set;
    CosineMode asp_mode = CosineMode::complement;
    losses::AspTarget target_mode = losses::AspTarget::target;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    int k_folds = 5;
    double holdout_fraction = 0.1;
    double max_age = 100.0;
    std::vector<int> indicator_selection; // empty = all indicators supervise
    nn::NetworkConfig net;

    void validate() const;
    std::string resolved_text() const; // canonical key=value form
};

// Cosine annealing with warm restarts:
// lr = lr_min + (lr_init - lr_min) * (1 + cos(pi * (epoch mod cycle)/cycle)) / 2
double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double loss_d_adv = 0.0;
    double loss_d_dm = 0.0;
    double loss_g_adv = 0.0;
    double loss_g_asp = 0.0;
    double loss_g_dm = 0.0;
    double loss_g_total = 0.0;
    double val_ssim = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_ssim = 0.0;
    std::string ckpt_best;
    std::string ckpt_last;
};

// Alternating update loop: per batch both discriminator heads first
// (adversarial on the real/fake patch maps, indicator head on real images
// only), then the generator on the weighted loss restricted to loss_set.
TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const FoldAssignment& folds,
                  int fold_id, const std::string& run_dir);

// One generated image per target age, each conditioned directly on the input
// image with its own age-difference code.
std::vector<ImageU8> predict_sequence(const nn::Checkpoint& ckpt, const ImageU8& input,
                                      double age_i, const std::vector<double>& target_ages,
                                      double max_age = 100.0);

// [-1,1] float tensor sample -> 8-bit image (the disk pixel domain)
ImageU8 tensor_to_image(const Tensor& y, int sample);

} // namespace tgan::train

#endif
