#include "tgan/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tgan/ablation.hpp"
#include "tgan/anova.hpp"
#include "tgan/corpus.hpp"
#include "tgan/evaluate.hpp"
#include "tgan/plotting.hpp"
#include "tgan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgan::cli {

namespace {

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string fnv64_hex(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string corpus_hash(const std::string& dir) {
    const std::string a = file_bytes(fs::path(dir) / "corpus.json");
    const std::string b = file_bytes(fs::path(dir) / "metadata.csv");
    return fnv64_hex(b, std::stoull(fnv64_hex(a), nullptr, 16));
}

std::string join_workdir(const std::string& workdir, const std::string& path) {
    if (path.empty() || workdir.empty()) return path;
    fs::path p(path);
    return p.is_absolute() ? path : (fs::path(workdir) / p).string();
}

// Written atomically at run start; every artifact traces back to one manifest.
void write_manifest(const std::string& out_dir, const std::string& command, const json& config,
                    const std::string& corpus_provenance, std::uint64_t seed,
                    const std::vector<std::string>& artifacts) {
    fs::create_directories(out_dir);
    json m;
    m["command"] = command;
    m["config"] = config;
    m["corpus_hash"] = corpus_provenance;
    m["seed"] = seed;
    m["artifacts"] = artifacts;
    m["started_at"] = now_iso8601();
    const fs::path final_path = fs::path(out_dir) / "manifest.json";
    const fs::path tmp_path = fs::path(out_dir) / ".manifest.json.tmp";
    {
        std::ofstream out(tmp_path);
        out << m.dump(2) << "\n";
    }
    fs::rename(tmp_path, final_path);
}

// Plain-text key=value config support with precedence defaults < file <
// flags: values are injected as trailing options for keys the command line
// does not set explicitly.
std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);

    std::set<std::string> explicit_keys;
    for (const auto& a : args) {
        if (a.rfind("--", 0) != 0) continue;
        const auto eq = a.find('=');
        explicit_keys.insert(eq == std::string::npos ? a : a.substr(0, eq));
    }

    std::vector<std::string> out = args;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(config_path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = "--" + line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (explicit_keys.count(key)) continue; // flags beat the file
        if (value == "true" || value == "yes")
            out.push_back(key);
        else if (value == "false" || value == "no")
            continue;
        else
            out.push_back(key + "=" + value);
    }
    return out;
}

// Shared training-ish flags; reused by train and ablate.
struct TrainFlags {
    std::string corpus_dir;
    std::string out_dir;
    std::string loss = "all";
    std::string asp_mode = "one-minus-cos";
    std::string target_mode = "target";
    std::string indicators = "all";
    int epochs = 50;
    double lr = 1e-5;
    double lr_min = 1e-8;
    int cycle = 30;
    int batch = 16;
    double alpha = 1.0;
    double beta = 100.0;
    double gamma = 1.2;
    std::uint64_t seed = 1;
    int fold = 0;
    int folds = 5;
    double holdout = 0.1;
    std::uint64_t split_seed = 42;
    int base_channels = 64;
    int d_a = 64;
    int d_k = 64;
    int cond_hidden = 512;
    int age_code_length = 1000;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
    sub->add_option("--corpus", f.corpus_dir, "corpus directory")->required();
    sub->add_option("--out", f.out_dir, "run output directory")->required();
    sub->add_option("--loss", f.loss, "loss set: adv|adv+asp|adv+dm|all")
        ->check(CLI::IsMember({"adv", "adv+asp", "adv+dm", "all"}));
    sub->add_option("--asp-mode", f.asp_mode, "age scale: cos|one-minus-cos")
        ->check(CLI::IsMember({"cos", "one-minus-cos"}));
    sub->add_option("--target-mode", f.target_mode, "pixel-loss reference: paper-literal|target")
        ->check(CLI::IsMember({"paper-literal", "target"}));
    sub->add_option("--indicators", f.indicators, "indicator supervision: top:K|random:K|all");
    sub->add_option("--epochs", f.epochs, "training epochs");
    sub->add_option("--lr", f.lr, "initial learning rate");
    sub->add_option("--lr-min", f.lr_min, "cosine annealing floor");
    sub->add_option("--cycle", f.cycle, "annealing cycle in epochs");
    sub->add_option("--batch", f.batch, "batch size");
    sub->add_option("--alpha", f.alpha, "adversarial weight");
    sub->add_option("--beta", f.beta, "age-scaled pixel weight");
    sub->add_option("--gamma", f.gamma, "dynamic indicator weight");
    sub->add_option("--seed", f.seed, "training seed");
    sub->add_option("--fold", f.fold, "validation fold id");
    sub->add_option("--folds", f.folds, "fold count");
    sub->add_option("--holdout", f.holdout, "held-out test fraction");
    sub->add_option("--split-seed", f.split_seed, "subject split seed");
    sub->add_option("--base-channels", f.base_channels, "network width");
    sub->add_option("--d-a", f.d_a, "condition query width");
    sub->add_option("--d-k", f.d_k, "attention key width");
    sub->add_option("--cond-hidden", f.cond_hidden, "condition encoder hidden width");
    sub->add_option("--age-code-length", f.age_code_length, "thermometer code length");
}

train::TrainConfig build_train_config(const TrainFlags& f, const Corpus& corpus,
                                      const FoldAssignment& folds) {
    train::TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.lr_init = f.lr;
    cfg.lr_min = f.lr_min;
    cfg.anneal_cycle_epochs = f.cycle;
    cfg.batch_size = f.batch;
    cfg.weights = {f.alpha, f.beta, f.gamma};
    cfg.seed = f.seed;
    cfg.loss_set = train::LossSet::parse(f.loss);
    cfg.asp_mode = (f.asp_mode == "cos") ? CosineMode::literal : CosineMode::complement;
    cfg.target_mode =
        (f.target_mode == "paper-literal") ? losses::AspTarget::paper_literal : losses::AspTarget::target;
    cfg.k_folds = f.folds;
    cfg.holdout_fraction = f.holdout;
    cfg.net.image_size = corpus.params.image_size;
    cfg.net.base_channels = f.base_channels;
    cfg.net.age_code_length = f.age_code_length;
    cfg.net.d_a = f.d_a;
    cfg.net.d_k = f.d_k;
    cfg.net.cond_hidden = f.cond_hidden;
    cfg.net.n_indicators = corpus.params.n_indicators;

    if (f.indicators != "all") {
        const auto colon = f.indicators.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--indicators must be top:K, random:K or all, got '" + f.indicators + "'");
        const std::string kind = f.indicators.substr(0, colon);
        const int k = std::atoi(f.indicators.c_str() + colon + 1);
        if (kind == "random") {
            cfg.indicator_selection = select_random_k(corpus.params.n_indicators, k, f.seed);
        } else if (kind == "top") {
            Corpus train_view;
            train_view.params = corpus.params;
            for (std::size_t s = 0; s < corpus.subjects.size(); ++s)
                if (folds.partition[s] != -1) train_view.subjects.push_back(corpus.subjects[s]);
            train_view.params.n_subjects = static_cast<int>(train_view.subjects.size());
            cfg.indicator_selection = select_top_k(rank_indicators_anova(train_view), k);
        } else {
            throw ConfigError("--indicators must be top:K, random:K or all, got '" + f.indicators + "'");
        }
    }
    return cfg;
}

json train_flags_json(const TrainFlags& f) {
    return json{{"corpus", f.corpus_dir}, {"out", f.out_dir},       {"loss", f.loss},
                {"asp_mode", f.asp_mode}, {"target_mode", f.target_mode}, {"indicators", f.indicators},
                {"epochs", f.epochs},     {"lr", f.lr},             {"lr_min", f.lr_min},
                {"cycle", f.cycle},       {"batch", f.batch},       {"alpha", f.alpha},
                {"beta", f.beta},         {"gamma", f.gamma},       {"seed", f.seed},
                {"fold", f.fold},         {"folds", f.folds},       {"holdout", f.holdout},
                {"split_seed", f.split_seed},                       {"base_channels", f.base_channels},
                {"d_a", f.d_a},           {"d_k", f.d_k},           {"cond_hidden", f.cond_hidden},
                {"age_code_length", f.age_code_length}};
}

std::vector<double> parse_age_list(const std::string& csv) {
    std::vector<double> ages;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0')
            throw ConfigError("bad age '" + cell + "' in --ages");
        ages.push_back(v);
    }
    if (ages.empty()) throw ConfigError("--ages needs at least one age");
    return ages;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"temporal brain-image prediction on synthetic longitudinal phantoms"};
    app.require_subcommand(1);
    std::string workdir;
    app.add_option("--workdir", workdir, "base directory for relative paths")->configurable(false);
    std::string config_file;

    int exit_code = 0;

    // ---------------------------------------------------------------- gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic longitudinal corpus");
    gen->add_option("--config", config_file, "key=value defaults file (flags win)");
    
    struct {
        std::string out;
        int subjects = 200;
        int image_size = 64;
        double missing_rate = 0.3348;
        std::uint64_t seed = 42;
        int indicators = 10;
        bool force = false;
    } gd;
    gen->add_option("--out", gd.out, "output corpus directory")->required();
    gen->add_option("--subjects", gd.subjects, "number of subjects")->check(CLI::PositiveNumber);
    gen->add_option("--image-size", gd.image_size, "slice size (32/64/128)");
    gen->add_option("--missing-rate", gd.missing_rate, "indicator missingness rate");
    gen->add_option("--seed", gd.seed, "generation seed");
    gen->add_option("--indicators", gd.indicators, "indicator count (>= 6)");
    gen->add_flag("--force", gd.force, "overwrite a non-empty output directory");
    gen->callback([&] {
        const std::string out = join_workdir(workdir, gd.out);
        if (fs::exists(out) && !fs::is_empty(out) && !gd.force)
            throw ConfigError("output directory " + out + " is not empty (use --force)");
        CorpusParams params;
        params.n_subjects = gd.subjects;
        params.image_size = gd.image_size;
        params.missing_rate = gd.missing_rate;
        params.seed = gd.seed;
        params.n_indicators = gd.indicators;
        auto corpus = generate_corpus(params);
        save_corpus(corpus, out);
        write_manifest(out, "gen-data",
                       json{{"subjects", gd.subjects},
                            {"image_size", gd.image_size},
                            {"missing_rate", gd.missing_rate},
                            {"seed", gd.seed},
                            {"indicators", gd.indicators}},
                       corpus_hash(out), gd.seed, {"corpus.json", "metadata.csv", "images/"});
        const auto pairs = build_pairs(corpus);
        std::printf("corpus written to %s\n", out.c_str());
        std::printf("subjects=%d visits=%zu pairs=%zu\n", gd.subjects, corpus.total_visits(),
                    pairs.size());
        std::printf("short-term pair fraction=%.4f\n", short_fraction(pairs));
        std::printf("observed indicator fraction=%.4f (missing %.4f)\n", observed_fraction(corpus),
                    1.0 - observed_fraction(corpus));
    });

    // ------------------------------------------------------------------- train
    auto* tr = app.add_subcommand("train", "train the generator and both discriminator heads");
    tr->add_option("--config", config_file, "key=value defaults file (flags win)");
    
    TrainFlags tf;
    add_train_flags(tr, tf);
    tr->callback([&] {
        const std::string corpus_dir = join_workdir(workdir, tf.corpus_dir);
        const std::string out = join_workdir(workdir, tf.out_dir);
        auto corpus = load_corpus(corpus_dir);
        auto folds = split_folds(corpus, tf.folds, tf.holdout, tf.split_seed);
        auto cfg = build_train_config(tf, corpus, folds);
        write_manifest(out, "train", train_flags_json(tf), corpus_hash(corpus_dir), tf.seed,
                       {"config.resolved", "log.csv", "ckpt_best", "ckpt_last"});
        auto result = train::train(cfg, corpus, folds, tf.fold, out);
        std::printf("run directory: %s\n", out.c_str());
        std::printf("best epoch %d with validation SSIM %.4f\n", result.best_epoch,
                    result.best_val_ssim);
    });

    // ---------------------------------------------------------------- evaluate
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint against a corpus split");
    ev->add_option("--config", config_file, "key=value defaults file (flags win)");
    
    struct {
        std::string corpus_dir, ckpt, out;
        std::string split = "test";
        int fold = 0;
        int folds = 5;
        double holdout = 0.1;
        std::uint64_t split_seed = 42;
        bool identity = false;
        bool no_dfd = false;
        bool dfd_elementwise = false;
        bool dfd_logits = false;
        int dump_images = 0;
        int batch = 16;
        std::string indicators = "all";
    } ef;
    ev->add_option("--corpus", ef.corpus_dir, "corpus directory")->required();
    ev->add_option("--ckpt", ef.ckpt, "checkpoint path (omit with --identity)");
    ev->add_option("--out", ef.out, "output directory for report.json")->required();
    ev->add_option("--split", ef.split, "test|validation|train")
        ->check(CLI::IsMember({"test", "validation", "train"}));
    ev->add_option("--fold", ef.fold, "validation fold id");
    ev->add_option("--folds", ef.folds, "fold count");
    ev->add_option("--holdout", ef.holdout, "held-out test fraction");
    ev->add_option("--split-seed", ef.split_seed, "subject split seed");
    ev->add_flag("--identity", ef.identity, "identity baseline: prediction := input image");
    ev->add_flag("--no-dfd", ef.no_dfd, "skip the disease feature distance");
    ev->add_flag("--dfd-elementwise", ef.dfd_elementwise, "elementwise |.| reading of the DFD");
    ev->add_flag("--dfd-logits", ef.dfd_logits, "use classifier logits as the DFD features");
    ev->add_option("--dump-images", ef.dump_images, "sample triplet rows to dump for plotting");
    ev->add_option("--batch", ef.batch, "evaluation batch size");
    ev->add_option("--indicators", ef.indicators, "indicator metric restriction: top:K|random:K|all");
    ev->callback([&] {
        const std::string corpus_dir = join_workdir(workdir, ef.corpus_dir);
        const std::string out = join_workdir(workdir, ef.out);
        auto corpus = load_corpus(corpus_dir);
        auto folds = split_folds(corpus, ef.folds, ef.holdout, ef.split_seed);

        std::optional<nn::Checkpoint> ckpt;
        if (!ef.identity) {
            if (ef.ckpt.empty()) throw ConfigError("--ckpt is required unless --identity is given");
            ckpt = nn::load_checkpoint(join_workdir(workdir, ef.ckpt));
        }
        eval::EvalOptions opts;
        opts.split = ef.split == "test" ? eval::SplitSel::test
                     : ef.split == "validation" ? eval::SplitSel::validation
                                                : eval::SplitSel::train;
        opts.fold_id = ef.fold;
        opts.identity_baseline = ef.identity;
        opts.with_dfd = !ef.no_dfd;
        opts.dfd_norm = ef.dfd_elementwise ? metrics::DfdNorm::elementwise : metrics::DfdNorm::euclidean;
        opts.dfd_logits = ef.dfd_logits;
        opts.batch_size = ef.batch;
        opts.dump_images = ef.dump_images;
        opts.dump_dir = (fs::path(out) / "samples").string();

        write_manifest(out, "evaluate",
                       json{{"corpus", ef.corpus_dir},
                            {"ckpt", ef.ckpt},
                            {"split", ef.split},
                            {"fold", ef.fold},
                            {"identity", ef.identity}},
                       corpus_hash(corpus_dir), ef.split_seed, {"report.json", "report.txt"});
        auto report = eval::evaluate(ckpt ? &*ckpt : nullptr, corpus, folds, opts);
        fs::create_directories(out);
        {
            std::ofstream j(fs::path(out) / "report.json");
            j << report.to_json().dump(2) << "\n";
        }
        {
            std::ofstream t(fs::path(out) / "report.txt");
            t << report.to_text();
        }
        std::printf("%s", report.to_text().c_str());
        std::printf("report written to %s\n", (fs::path(out) / "report.json").string().c_str());
    });

    // ------------------------------------------------------------------ ablate
    auto* ab = app.add_subcommand("ablate", "train and evaluate a grid of configurations");
    ab->add_option("--config", config_file, "key=value defaults file (flags win)");
    
    TrainFlags af;
    std::string grid = "loss";
    std::string cells_csv;
    add_train_flags(ab, af);
    ab->add_option("--grid", grid, "loss|indicators")->check(CLI::IsMember({"loss", "indicators"}));
    ab->add_option("--cells", cells_csv, "comma-separated grid cells (defaults per grid)");
    ab->callback([&] {
        const std::string corpus_dir = join_workdir(workdir, af.corpus_dir);
        const std::string out = join_workdir(workdir, af.out_dir);
        auto corpus = load_corpus(corpus_dir);
        auto folds = split_folds(corpus, af.folds, af.holdout, af.split_seed);
        auto base = build_train_config(af, corpus, folds);
        std::vector<std::string> cells;
        if (!cells_csv.empty()) {
            std::stringstream ss(cells_csv);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
        }
        json cfg_json = train_flags_json(af);
        cfg_json["grid"] = grid;
        cfg_json["cells"] = cells;
        write_manifest(out, "ablate", cfg_json, corpus_hash(corpus_dir), af.seed,
                       {"ablation.json", "ablation.txt"});
        auto rows = train::run_ablation(corpus, folds, af.fold, base, grid, cells, out);
        std::printf("%s", train::ablation_table_text(rows).c_str());
        std::printf("ablation artifacts in %s\n", out.c_str());
    });

    // ------------------------------------------------------------- predict-seq
    auto* ps = app.add_subcommand("predict-seq", "generate an age-specific image sequence");
    ps->add_option("--config", config_file, "key=value defaults file (flags win)");
    
    struct {
        std::string corpus_dir, subject, ckpt, out, ages;
        double input_age = 0.0;
    } pf;
    ps->add_option("--corpus", pf.corpus_dir, "corpus directory")->required();
    ps->add_option("--subject", pf.subject, "subject id, e.g. sub_0003")->required();
    ps->add_option("--input-age", pf.input_age, "age of the input visit")->required();
    ps->add_option("--ages", pf.ages, "comma-separated target ages")->required();
    ps->add_option("--ckpt", pf.ckpt, "checkpoint path")->required();
    ps->add_option("--out", pf.out, "output directory")->required();
    ps->callback([&] {
        const std::string corpus_dir = join_workdir(workdir, pf.corpus_dir);
        const std::string out = join_workdir(workdir, pf.out);
        auto corpus = load_corpus(corpus_dir);
        const auto ages = parse_age_list(pf.ages);

        const PhantomSubject* subject = nullptr;
        for (const auto& s : corpus.subjects)
            if (s.subject_id == pf.subject) subject = &s;
        if (!subject) throw DataError("subject '" + pf.subject + "' not found in " + corpus_dir);
        const Visit* visit = nullptr;
        char want[16];
        std::snprintf(want, sizeof(want), "%.1f", pf.input_age);
        for (const auto& v : subject->visits) {
            char got[16];
            std::snprintf(got, sizeof(got), "%.1f", v.age_years);
            if (std::string(want) == got) visit = &v;
        }
        if (!visit)
            throw DataError("subject " + pf.subject + " has no visit at age " + want);

        auto ckpt = nn::load_checkpoint(join_workdir(workdir, pf.ckpt));
        write_manifest(out, "predict-seq",
                       json{{"corpus", pf.corpus_dir},
                            {"subject", pf.subject},
                            {"input_age", pf.input_age},
                            {"ages", pf.ages},
                            {"ckpt", pf.ckpt}},
                       corpus_hash(corpus_dir), 0, {"gen_<age>.png", "diff_<age>.png"});
        auto seq = train::predict_sequence(ckpt, visit->image, pf.input_age, ages);
        fs::create_directories(out);
        for (std::size_t i = 0; i < seq.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "gen_%.1f.png", ages[i]);
            write_png_gray8((fs::path(out) / name).string(), seq[i]);
            ImageU8 diff;
            diff.width = seq[i].width;
            diff.height = seq[i].height;
            diff.pixels.resize(seq[i].pixels.size());
            for (std::size_t j = 0; j < diff.pixels.size(); ++j)
                diff.pixels[j] = static_cast<std::uint8_t>(std::abs(
                    static_cast<int>(seq[i].pixels[j]) - static_cast<int>(visit->image.pixels[j])));
            std::snprintf(name, sizeof(name), "diff_%.1f.png", ages[i]);
            write_png_gray8((fs::path(out) / name).string(), diff);
        }
        std::printf("%zu images written to %s\n", seq.size(), out.c_str());
    });

    // -------------------------------------------------------------------- plot
    auto* pl = app.add_subcommand("plot", "render metric charts, loss curves and image grids");
    pl->add_option("--config", config_file, "key=value defaults file (flags win)");
    struct {
        std::vector<std::string> reports;
        std::string run, log, samples, out;
    } lf;
    pl->add_option("--report", lf.reports, "report.json path (repeatable)");
    pl->add_option("--run", lf.run, "run/eval directory to scan for report.json, log.csv, samples/");
    pl->add_option("--log", lf.log, "training log.csv");
    pl->add_option("--samples", lf.samples, "directory of dumped sample images");
    pl->add_option("--out", lf.out, "output directory")->required();
    pl->callback([&] {
        const std::string out = join_workdir(workdir, lf.out);
        fs::create_directories(out);
        std::vector<std::string> report_paths = lf.reports;
        std::string log_path = join_workdir(workdir, lf.log);
        std::string samples_path = join_workdir(workdir, lf.samples);
        if (!lf.run.empty()) {
            const fs::path run(join_workdir(workdir, lf.run));
            if (fs::exists(run / "report.json")) report_paths.push_back((run / "report.json").string());
            if (log_path.empty() && fs::exists(run / "log.csv")) log_path = (run / "log.csv").string();
            if (samples_path.empty() && fs::exists(run / "samples")) samples_path = (run / "samples").string();
        }
        std::vector<std::string> notes;
        std::vector<std::string> artifacts;
        if (!report_paths.empty()) {
            std::vector<plot::NamedReport> reports;
            for (const auto& rp : report_paths) {
                const std::string path = join_workdir(workdir, rp);
                std::ifstream in(path);
                if (!in) throw DataError("cannot open report: " + path);
                json j;
                try {
                    in >> j;
                } catch (const json::exception& e) {
                    throw DataError("malformed report " + path + ": " + e.what());
                }
                plot::NamedReport nr;
                nr.label = fs::path(path).parent_path().filename().string();
                if (nr.label.empty()) nr.label = "report";
                nr.report.split = j.value("split", "test");
                nr.report.fold = j.value("fold", 0);
                auto read_stratum = [&](const char* key) -> std::optional<eval::StratumMetrics> {
                    if (!j.contains("strata") || j["strata"][key].is_null()) return std::nullopt;
                    const auto& s = j["strata"][key];
                    return eval::StratumMetrics{s.value("mae", 0.0), s.value("mse", 0.0),
                                                s.value("ssim", 0.0), s.value("psnr", 0.0),
                                                s.value("n", std::size_t{0})};
                };
                nr.report.short_term = read_stratum("short");
                nr.report.long_term = read_stratum("long");
                nr.report.all = read_stratum("all");
                reports.push_back(std::move(nr));
            }
            const std::string chart = (fs::path(out) / "metrics_bars.png").string();
            auto chart_notes = plot::metric_bar_chart(reports, chart);
            notes.insert(notes.end(), chart_notes.begin(), chart_notes.end());
            artifacts.push_back(chart);
        }
        if (!log_path.empty()) {
            const std::string curves = (fs::path(out) / "loss_curves.png").string();
            plot::loss_curve_chart(log_path, curves);
            artifacts.push_back(curves);
        }
        if (!samples_path.empty()) {
            const std::string grid_png = (fs::path(out) / "image_grid.png").string();
            if (plot::image_grid(samples_path, grid_png))
                artifacts.push_back(grid_png);
            else
                notes.push_back("no complete sample rows under " + samples_path);
        }
        {
            std::ofstream legend(fs::path(out) / "legend.txt");
            for (const auto& n : notes) legend << n << "\n";
            for (const auto& a : artifacts) legend << "artifact: " << a << "\n";
        }
        for (const auto& a : artifacts) std::printf("wrote %s\n", a.c_str());
        if (artifacts.empty()) std::printf("nothing to plot (no reports, log or samples found)\n");
    });

    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        args = apply_config_file(args);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed); // CLI11 takes args in reverse order
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << e.what() << "\n";
        return 3;
    }
    return exit_code;
}

} // namespace tgan::cli
