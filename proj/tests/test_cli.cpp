#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "tgan/cli.hpp"
#include "tgan/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"tgan"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return tgan::cli::run(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub) const { return (path / sub).string(); }
};

} // namespace

TEST_CASE("cli end-to-end: gen-data, train, evaluate, predict-seq, plot") {
    TempDir tmp("tgan_cli_e2e");

    // generation
    CHECK(run_cli({"gen-data", "--out", tmp.str("corpus"), "--subjects", "10", "--image-size", "32",
                   "--seed", "5", "--missing-rate", "0.3"}) == 0);
    CHECK(fs::exists(tmp.path / "corpus" / "metadata.csv"));
    CHECK(fs::exists(tmp.path / "corpus" / "corpus.json"));
    CHECK(fs::exists(tmp.path / "corpus" / "manifest.json"));

    // refuse to overwrite without --force
    CHECK(run_cli({"gen-data", "--out", tmp.str("corpus"), "--subjects", "10"}) == 2);
    // usage error: bad subject count
    CHECK(run_cli({"gen-data", "--out", tmp.str("other"), "--subjects", "0"}) == 2);

    // deterministic regeneration, byte-identical metadata
    CHECK(run_cli({"gen-data", "--out", tmp.str("corpus_b"), "--subjects", "10", "--image-size", "32",
                   "--seed", "5", "--missing-rate", "0.3"}) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(tmp.path / "corpus" / "metadata.csv") == slurp(tmp.path / "corpus_b" / "metadata.csv"));

    // training (tiny but real)
    CHECK(run_cli({"train", "--corpus", tmp.str("corpus"), "--out", tmp.str("run"), "--epochs", "2",
                   "--batch", "4", "--lr", "2e-4", "--base-channels", "4", "--cond-hidden", "16",
                   "--d-a", "8", "--d-k", "8", "--age-code-length", "64", "--folds", "2"}) == 0);
    CHECK(fs::exists(tmp.path / "run" / "ckpt_best"));
    CHECK(fs::exists(tmp.path / "run" / "config.resolved"));
    CHECK(fs::exists(tmp.path / "run" / "manifest.json"));

    // evaluation with image dumps
    CHECK(run_cli({"evaluate", "--corpus", tmp.str("corpus"), "--ckpt", tmp.str("run/ckpt_best"),
                   "--out", tmp.str("eval"), "--folds", "2", "--no-dfd", "--dump-images", "2"}) == 0);
    CHECK(fs::exists(tmp.path / "eval" / "report.json"));
    {
        std::ifstream in(tmp.path / "eval" / "report.json");
        json j;
        in >> j;
        CHECK(j.contains("strata"));
        CHECK(j["strata"].contains("short"));
        CHECK(j.contains("indicators"));
    }

    // identity baseline requires no checkpoint
    CHECK(run_cli({"evaluate", "--corpus", tmp.str("corpus"), "--out", tmp.str("eval_id"), "--folds",
                   "2", "--identity", "--no-dfd"}) == 0);
    // but a normal evaluation does
    CHECK(run_cli({"evaluate", "--corpus", tmp.str("corpus"), "--out", tmp.str("eval_bad"), "--folds",
                   "2", "--no-dfd"}) == 2);
    // missing corpus is a data error
    CHECK(run_cli({"evaluate", "--corpus", tmp.str("nowhere"), "--out", tmp.str("eval_bad2"),
                   "--identity", "--no-dfd"}) == 3);

    // sequence prediction: find a real (subject, age) from the metadata
    std::string subject, age;
    {
        std::ifstream in(tmp.path / "corpus" / "metadata.csv");
        std::string header, first;
        std::getline(in, header);
        std::getline(in, first);
        subject = first.substr(0, first.find(','));
        const auto rest = first.substr(first.find(',') + 1);
        age = rest.substr(0, rest.find(','));
    }
    CHECK(run_cli({"predict-seq", "--corpus", tmp.str("corpus"), "--subject", subject, "--input-age",
                   age, "--ages", "96.0,97.0", "--ckpt", tmp.str("run/ckpt_best"), "--out",
                   tmp.str("seq")}) == 0);
    CHECK(fs::exists(tmp.path / "seq" / "gen_96.0.png"));
    CHECK(fs::exists(tmp.path / "seq" / "diff_96.0.png"));
    // target age not above the input age: usage error
    CHECK(run_cli({"predict-seq", "--corpus", tmp.str("corpus"), "--subject", subject, "--input-age",
                   age, "--ages", age, "--ckpt", tmp.str("run/ckpt_best"), "--out",
                   tmp.str("seq2")}) == 2);
    // unknown subject: data error
    CHECK(run_cli({"predict-seq", "--corpus", tmp.str("corpus"), "--subject", "sub_9999",
                   "--input-age", age, "--ages", "96.0", "--ckpt", tmp.str("run/ckpt_best"), "--out",
                   tmp.str("seq3")}) == 3);

    // plotting from the eval and run directories: three figure files
    CHECK(run_cli({"plot", "--run", tmp.str("eval"), "--log", tmp.str("run/log.csv"), "--out",
                   tmp.str("figs")}) == 0);
    CHECK(fs::exists(tmp.path / "figs" / "metrics_bars.png"));
    CHECK(fs::exists(tmp.path / "figs" / "loss_curves.png"));
    CHECK(fs::exists(tmp.path / "figs" / "image_grid.png"));
    CHECK(fs::exists(tmp.path / "figs" / "legend.txt"));

    // comparison chart over two reports
    CHECK(run_cli({"plot", "--report", tmp.str("eval/report.json"), "--report",
                   tmp.str("eval_id/report.json"), "--out", tmp.str("figs2")}) == 0);
    CHECK(fs::exists(tmp.path / "figs2" / "metrics_bars.png"));

    // malformed report: data error with the path in the message
    {
        std::ofstream bad(tmp.path / "bad.json");
        bad << "{ not json";
    }
    CHECK(run_cli({"plot", "--report", (tmp.path / "bad.json").string(), "--out",
                   tmp.str("figs3")}) == 3);
}

TEST_CASE("cli config file precedence: defaults < config < flags") {
    TempDir tmp("tgan_cli_cfg");
    {
        std::ofstream cfg(tmp.path / "gen.cfg");
        cfg << "subjects=7\nimage-size=32\nseed=9\n";
    }
    // config supplies subjects=7; the flag overrides image size back to 32
    CHECK(run_cli({"gen-data", "--config", (tmp.path / "gen.cfg").string(), "--out",
                   tmp.str("c1")}) == 0);
    std::ifstream in(tmp.path / "c1" / "corpus.json");
    json j;
    in >> j;
    CHECK(j["n_subjects"] == 7);
    CHECK(j["image_size"] == 32);
    CHECK(j["seed"] == 9);

    // flag beats config
    CHECK(run_cli({"gen-data", "--config", (tmp.path / "gen.cfg").string(), "--out", tmp.str("c2"),
                   "--seed", "11"}) == 0);
    std::ifstream in2(tmp.path / "c2" / "corpus.json");
    json j2;
    in2 >> j2;
    CHECK(j2["seed"] == 11);
    CHECK(j2["n_subjects"] == 7);
}

TEST_CASE("cli rerun produces identical manifests modulo timestamps") {
    TempDir tmp("tgan_cli_manifest");
    CHECK(run_cli({"gen-data", "--out", tmp.str("a"), "--subjects", "6", "--image-size", "32",
                   "--seed", "3"}) == 0);
    CHECK(run_cli({"gen-data", "--out", tmp.str("b"), "--subjects", "6", "--image-size", "32",
                   "--seed", "3"}) == 0);
    auto load = [](const fs::path& p) {
        std::ifstream in(p);
        json j;
        in >> j;
        j.erase("started_at");
        return j;
    };
    CHECK(load(tmp.path / "a" / "manifest.json") == load(tmp.path / "b" / "manifest.json"));
}
