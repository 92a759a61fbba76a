#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "tgan/ablation.hpp"
#include "tgan/nn/checkpoint.hpp"

using namespace tgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Corpus tiny_corpus() {
    CorpusParams p;
    p.n_subjects = 8;
    p.image_size = 32;
    p.missing_rate = 0.2;
    p.seed = 11;
    return generate_corpus(p);
}

train::TrainConfig tiny_cfg() {
    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.lr_init = 2e-4;
    cfg.batch_size = 4;
    cfg.seed = 3;
    cfg.k_folds = 2;
    cfg.net.image_size = 32;
    cfg.net.base_channels = 4;
    cfg.net.age_code_length = 64;
    cfg.net.d_a = 8;
    cfg.net.d_k = 8;
    cfg.net.cond_hidden = 16;
    return cfg;
}

} // namespace

TEST_CASE("loss-grid ablation emits one row per cell plus artifacts") {
    auto corpus = tiny_corpus();
    auto folds = split_folds(corpus, 2, 0.25, 7);
    TempDir out("tgan_ablate_loss");
    auto rows = train::run_ablation(corpus, folds, 0, tiny_cfg(), "loss", {"adv", "all"},
                                    out.path.string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "adv");
    CHECK(rows[1].label == "all");
    CHECK(fs::exists(out.path / "ablation.json"));
    CHECK(fs::exists(out.path / "ablation.txt"));
    CHECK(fs::exists(out.path / "adv" / "ckpt_best"));
    CHECK(fs::exists(out.path / "all" / "ckpt_best"));

    const auto table = train::ablation_table_text(rows);
    CHECK(table.find("adv") != std::string::npos);
    CHECK(table.find("all") != std::string::npos);
}

TEST_CASE("single-cell ablation equals a direct train-plus-evaluate") {
    auto corpus = tiny_corpus();
    auto folds = split_folds(corpus, 2, 0.25, 7);
    auto cfg = tiny_cfg();
    TempDir out("tgan_ablate_one");
    auto rows = train::run_ablation(corpus, folds, 0, cfg, "loss", {"all"}, out.path.string());
    REQUIRE(rows.size() == 1);

    TempDir direct("tgan_ablate_direct");
    cfg.loss_set = train::LossSet::parse("all");
    auto res = train::train(cfg, corpus, folds, 0, direct.path.string());
    auto ckpt = nn::load_checkpoint(res.ckpt_best);
    eval::EvalOptions opts;
    opts.split = eval::SplitSel::test;
    opts.with_dfd = false;
    opts.batch_size = cfg.batch_size;
    auto report = eval::evaluate(&ckpt, corpus, folds, opts);
    CHECK(rows[0].report.to_json() == report.to_json());
}

TEST_CASE("indicator grid resolves top and random selections") {
    auto corpus = tiny_corpus();
    auto folds = split_folds(corpus, 2, 0.25, 7);
    TempDir out("tgan_ablate_ind");
    auto rows = train::run_ablation(corpus, folds, 0, tiny_cfg(), "indicators",
                                    {"top:2", "random:2"}, out.path.string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "top:2");
    CHECK(rows[1].label == "random:2");
}

TEST_CASE("ablation rejects unknown grids and malformed cells") {
    auto corpus = tiny_corpus();
    auto folds = split_folds(corpus, 2, 0.25, 7);
    TempDir out("tgan_ablate_bad");
    CHECK_THROWS_AS(train::run_ablation(corpus, folds, 0, tiny_cfg(), "optimizers", {},
                                        out.path.string()),
                    ConfigError);
    CHECK_THROWS_AS(train::run_ablation(corpus, folds, 0, tiny_cfg(), "indicators", {"best:3"},
                                        out.path.string()),
                    ConfigError);
}
