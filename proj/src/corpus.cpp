#include "tgan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "tgan/common.hpp"
#include "tgan/kernels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tgan {

const char* to_string(Diagnosis d) {
    switch (d) {
    case Diagnosis::CN: return "CN";
    case Diagnosis::MCI: return "MCI";
    case Diagnosis::AD: return "AD";
    }
    return "CN";
}

Diagnosis diagnosis_from_string(const std::string& s) {
    if (s == "CN") return Diagnosis::CN;
    if (s == "MCI") return Diagnosis::MCI;
    if (s == "AD") return Diagnosis::AD;
    throw DataError("unknown diagnosis label '" + s + "'");
}

Diagnosis diagnosis_from_severity(double severity) {
    if (severity < 0.25) return Diagnosis::CN;
    if (severity < 0.6) return Diagnosis::MCI;
    return Diagnosis::AD;
}

std::size_t Corpus::total_visits() const {
    std::size_t n = 0;
    for (const auto& s : subjects) n += s.visits.size();
    return n;
}

namespace {

double round_tenth(double v) { return std::round(v * 10.0) / 10.0; }

std::string format_age(double age) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", age);
    return buf;
}

std::string format_indicator(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Quantize through the on-disk decimal format so save/load round-trips are
// exact.
double quantize_indicator(double v) { return std::strtod(format_indicator(v).c_str(), nullptr); }

std::string subject_name(int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sub_%04d", idx);
    return buf;
}

std::vector<double> draw_schedule(Rng& rng, const ScheduleParams& sp) {
    const int n_visits = 2 + static_cast<int>(rng.categorical(sp.visit_count_weights));
    std::vector<double> ages;
    double age = round_tenth(rng.uniform(sp.first_age_min, sp.first_age_max));
    ages.push_back(age);
    for (int v = 1; v < n_visits; ++v) {
        double gap = 0.0;
        switch (rng.categorical(sp.gap_weights)) {
        case 0: gap = 0.5; break;
        case 1: gap = 1.0; break;
        case 2: gap = 1.5; break;
        default: gap = rng.uniform(sp.long_gap_min, sp.long_gap_max); break;
        }
        age = round_tenth(age + gap);
        if (age > kMaxVisitAge) break;
        ages.push_back(age);
    }
    return ages;
}

} // namespace

void apply_missingness(std::vector<Visit>& visits, double rate, Rng rng) {
    if (!(rate >= 0.0 && rate < 1.0))
        throw ConfigError("missing rate must be in [0,1), got " + std::to_string(rate));
    for (auto& visit : visits) {
        for (std::size_t p = 0; p < visit.indicators.size(); ++p) {
            if (rng.bernoulli(rate)) {
                visit.mask[p] = 0;
                visit.indicators[p] = std::numeric_limits<double>::quiet_NaN();
            } else {
                visit.mask[p] = 1;
            }
        }
    }
}

Corpus generate_corpus(const CorpusParams& params) {
    if (params.n_subjects < 1)
        throw ConfigError("n_subjects must be >= 1, got " + std::to_string(params.n_subjects));
    if (params.image_size != 32 && params.image_size != 64 && params.image_size != 128)
        throw ConfigError("image_size must be one of 32/64/128, got " + std::to_string(params.image_size));
    if (!(params.missing_rate >= 0.0 && params.missing_rate < 1.0))
        throw ConfigError("missing_rate must be in [0,1), got " + std::to_string(params.missing_rate));

    Corpus corpus;
    corpus.params = params;
    corpus.subjects.resize(static_cast<std::size_t>(params.n_subjects));

    const Rng base(params.seed);
    const int P = params.n_indicators;

    const bool par = kernels::parallel_enabled() && params.n_subjects > 1;
#pragma omp parallel for schedule(dynamic) if (par)
    for (int s = 0; s < params.n_subjects; ++s) {
        Rng rng = base.derive("subject").derive(static_cast<std::uint64_t>(s));
        PhantomSubject subject;
        subject.subject_id = subject_name(s);
        subject.latent.severity = rng.uniform(0.0, 0.25);
        subject.latent.onset_age = rng.uniform(55.0, 72.0);
        subject.latent.progression_rate = rng.uniform(0.025, 0.06);
        subject.latent.morphology_seed = rng.next_u64();

        const auto ages = draw_schedule(rng, params.schedule);
        Rng noise = rng.derive("indicator-noise");
        for (std::size_t v = 0; v < ages.size(); ++v) {
            Visit visit;
            visit.age_years = ages[v];
            visit.image = render_phantom(subject.latent, visit.age_years, params.image_size);
            visit.indicators = derive_indicators(subject.latent, visit.age_years, noise.next_u64(), P);
            visit.mask.assign(static_cast<std::size_t>(P), 1);
            visit.diagnosis = diagnosis_from_severity(subject.latent.severity_at(visit.age_years));
            subject.visits.push_back(std::move(visit));
        }
        corpus.subjects[static_cast<std::size_t>(s)] = std::move(subject);
    }

    // z-score against corpus statistics, then quantize through the on-disk
    // precision so persisted and in-memory values agree exactly
    corpus.indicator_mean.assign(static_cast<std::size_t>(P), 0.0);
    corpus.indicator_std.assign(static_cast<std::size_t>(P), 1.0);
    std::size_t n_visits = corpus.total_visits();
    if (n_visits > 0) {
        for (int p = 0; p < P; ++p) {
            double sum = 0.0, sum2 = 0.0;
            for (const auto& subj : corpus.subjects)
                for (const auto& visit : subj.visits) sum += visit.indicators[static_cast<std::size_t>(p)];
            const double mean = sum / static_cast<double>(n_visits);
            for (const auto& subj : corpus.subjects)
                for (const auto& visit : subj.visits) {
                    const double d = visit.indicators[static_cast<std::size_t>(p)] - mean;
                    sum2 += d * d;
                }
            const double std_dev = std::sqrt(std::max(sum2 / static_cast<double>(n_visits), 1e-12));
            corpus.indicator_mean[static_cast<std::size_t>(p)] = mean;
            corpus.indicator_std[static_cast<std::size_t>(p)] = std_dev;
            for (auto& subj : corpus.subjects)
                for (auto& visit : subj.visits) {
                    auto& x = visit.indicators[static_cast<std::size_t>(p)];
                    x = quantize_indicator((x - mean) / std_dev);
                }
        }
    }

    for (int s = 0; s < params.n_subjects; ++s) {
        Rng rng = base.derive("missingness").derive(static_cast<std::uint64_t>(s));
        apply_missingness(corpus.subjects[static_cast<std::size_t>(s)].visits, params.missing_rate, rng);
    }
    return corpus;
}

std::vector<TrainingPair> build_pairs(const Corpus& corpus) {
    std::vector<TrainingPair> pairs;
    for (std::size_t s = 0; s < corpus.subjects.size(); ++s) {
        const auto& visits = corpus.subjects[s].visits;
        if (visits.size() < 2) {
            std::cerr << "warning: subject " << corpus.subjects[s].subject_id
                      << " has fewer than two visits; skipped\n";
            continue;
        }
        for (std::size_t i = 0; i + 1 < visits.size(); ++i) {
            for (std::size_t j = i + 1; j < visits.size(); ++j) {
                TrainingPair p;
                p.subject = static_cast<int>(s);
                p.visit_i = static_cast<int>(i);
                p.visit_j = static_cast<int>(j);
                p.age_i = visits[i].age_years;
                p.age_j = visits[j].age_years;
                p.term = (p.age_j - p.age_i > kShortTermMaxGapYears) ? Term::long_term : Term::short_term;
                pairs.push_back(p);
            }
        }
    }
    return pairs;
}

double short_fraction(const std::vector<TrainingPair>& pairs) {
    if (pairs.empty()) return 0.0;
    std::size_t n_short = 0;
    for (const auto& p : pairs) n_short += (p.term == Term::short_term);
    return static_cast<double>(n_short) / static_cast<double>(pairs.size());
}

double observed_fraction(const Corpus& corpus) {
    std::size_t observed = 0, total = 0;
    for (const auto& s : corpus.subjects)
        for (const auto& v : s.visits) {
            total += v.mask.size();
            for (auto m : v.mask) observed += m;
        }
    return total == 0 ? 0.0 : static_cast<double>(observed) / static_cast<double>(total);
}

FoldAssignment split_folds(const Corpus& corpus, int k, double holdout_fraction, std::uint64_t seed) {
    const int n = static_cast<int>(corpus.subjects.size());
    if (k < 2) throw ConfigError("fold count must be >= 2, got " + std::to_string(k));
    if (n < k + 1)
        throw ConfigError("need at least " + std::to_string(k + 1) + " subjects for " +
                          std::to_string(k) + " folds, have " + std::to_string(n));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng = Rng(seed).derive("fold-split");
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    const int n_test = static_cast<int>(std::floor(n * holdout_fraction + 0.5));
    FoldAssignment fa;
    fa.k = k;
    fa.partition.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        const int subject = order[static_cast<std::size_t>(i)];
        fa.partition[static_cast<std::size_t>(subject)] = (i < n_test) ? -1 : (i - n_test) % k;
    }
    return fa;
}

// ---------------------------------------------------------------------------
// Persistence. Layout:
//   <dir>/corpus.json
//   <dir>/metadata.csv      header: subject_id,age_years,image_path,diagnosis,ind_01,...
//   <dir>/images/<subject_id>/<age %.1f>.png

void save_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    fs::create_directories(fs::path(dir) / "images");

    json meta;
    meta["format_version"] = 1;
    meta["n_subjects"] = corpus.params.n_subjects;
    meta["image_size"] = corpus.params.image_size;
    meta["missing_rate"] = corpus.params.missing_rate;
    meta["seed"] = corpus.params.seed;
    meta["n_indicators"] = corpus.params.n_indicators;
    meta["schedule"] = {
        {"target_short_fraction", corpus.params.schedule.target_short_fraction},
        {"visit_count_weights", corpus.params.schedule.visit_count_weights},
        {"gap_weights", corpus.params.schedule.gap_weights},
        {"long_gap_min", corpus.params.schedule.long_gap_min},
        {"long_gap_max", corpus.params.schedule.long_gap_max},
        {"first_age_min", corpus.params.schedule.first_age_min},
        {"first_age_max", corpus.params.schedule.first_age_max},
    };
    meta["indicator_mean"] = corpus.indicator_mean;
    meta["indicator_std"] = corpus.indicator_std;
    json latents = json::array();
    for (const auto& s : corpus.subjects) {
        latents.push_back({{"id", s.subject_id},
                           {"severity", s.latent.severity},
                           {"onset_age", s.latent.onset_age},
                           {"progression_rate", s.latent.progression_rate},
                           {"morphology_seed", s.latent.morphology_seed}});
    }
    meta["subjects"] = latents;
    {
        std::ofstream out(fs::path(dir) / "corpus.json");
        if (!out) throw DataError("cannot write corpus.json in " + dir);
        out << meta.dump(2) << "\n";
    }

    std::ofstream csv(fs::path(dir) / "metadata.csv");
    if (!csv) throw DataError("cannot write metadata.csv in " + dir);
    csv << "subject_id,age_years,image_path,diagnosis";
    for (int p = 1; p <= corpus.params.n_indicators; ++p) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), ",ind_%02d", p);
        csv << buf;
    }
    csv << "\n";

    for (const auto& subject : corpus.subjects) {
        const fs::path subj_dir = fs::path(dir) / "images" / subject.subject_id;
        fs::create_directories(subj_dir);
        for (const auto& visit : subject.visits) {
            const std::string age_str = format_age(visit.age_years);
            const std::string rel = "images/" + subject.subject_id + "/" + age_str + ".png";
            write_png_gray8((fs::path(dir) / rel).string(), visit.image);
            csv << subject.subject_id << "," << age_str << "," << rel << ","
                << to_string(visit.diagnosis);
            for (std::size_t p = 0; p < visit.indicators.size(); ++p) {
                csv << ",";
                if (visit.mask[p]) csv << format_indicator(visit.indicators[p]);
            }
            csv << "\n";
        }
    }
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}
} // namespace

Corpus load_corpus(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream meta_in(root / "corpus.json");
    if (!meta_in) throw DataError("missing corpus.json in " + dir);
    json meta;
    try {
        meta_in >> meta;
    } catch (const json::exception& e) {
        throw DataError("malformed corpus.json in " + dir + ": " + e.what());
    }

    Corpus corpus;
    corpus.params.n_subjects = meta.value("n_subjects", 0);
    corpus.params.image_size = meta.value("image_size", 64);
    corpus.params.missing_rate = meta.value("missing_rate", 0.0);
    corpus.params.seed = meta.value("seed", std::uint64_t{0});
    corpus.params.n_indicators = meta.value("n_indicators", 10);
    if (meta.contains("schedule")) {
        const auto& sch = meta["schedule"];
        auto& sp = corpus.params.schedule;
        sp.target_short_fraction = sch.value("target_short_fraction", sp.target_short_fraction);
        if (sch.contains("visit_count_weights"))
            for (std::size_t i = 0; i < sp.visit_count_weights.size(); ++i)
                sp.visit_count_weights[i] = sch["visit_count_weights"].at(i).get<double>();
        if (sch.contains("gap_weights"))
            for (std::size_t i = 0; i < sp.gap_weights.size(); ++i)
                sp.gap_weights[i] = sch["gap_weights"].at(i).get<double>();
        sp.long_gap_min = sch.value("long_gap_min", sp.long_gap_min);
        sp.long_gap_max = sch.value("long_gap_max", sp.long_gap_max);
        sp.first_age_min = sch.value("first_age_min", sp.first_age_min);
        sp.first_age_max = sch.value("first_age_max", sp.first_age_max);
    }
    if (meta.contains("indicator_mean")) corpus.indicator_mean = meta["indicator_mean"].get<std::vector<double>>();
    if (meta.contains("indicator_std")) corpus.indicator_std = meta["indicator_std"].get<std::vector<double>>();

    std::map<std::string, LatentState> latents;
    if (meta.contains("subjects")) {
        for (const auto& s : meta["subjects"]) {
            LatentState l;
            l.severity = s.value("severity", 0.0);
            l.onset_age = s.value("onset_age", 0.0);
            l.progression_rate = s.value("progression_rate", 0.0);
            l.morphology_seed = s.value("morphology_seed", std::uint64_t{0});
            latents[s.value("id", std::string())] = l;
        }
    }

    std::ifstream csv(root / "metadata.csv");
    if (!csv) throw DataError("missing metadata.csv in " + dir);
    std::string line;
    if (!std::getline(csv, line)) throw DataError("metadata.csv is empty in " + dir);
    const auto header = split_csv_line(line);
    if (header.size() < 5 || header[0] != "subject_id" || header[1] != "age_years" ||
        header[2] != "image_path" || header[3] != "diagnosis")
        throw DataError("metadata.csv has an unexpected header in " + dir);
    const int P = static_cast<int>(header.size()) - 4;

    std::map<std::string, std::size_t> subject_index;
    int row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != 4 + P)
            throw DataError("metadata.csv row " + std::to_string(row) + ": expected " +
                            std::to_string(4 + P) + " fields, got " + std::to_string(fields.size()));
        const std::string& sid = fields[0];
        Visit visit;
        char* end = nullptr;
        visit.age_years = std::strtod(fields[1].c_str(), &end);
        if (end == fields[1].c_str() || *end != '\0')
            throw DataError("metadata.csv row " + std::to_string(row) + ": bad age '" + fields[1] + "'");
        try {
            visit.diagnosis = diagnosis_from_string(fields[3]);
        } catch (const DataError& e) {
            throw DataError("metadata.csv row " + std::to_string(row) + ": " + e.what());
        }
        visit.indicators.assign(static_cast<std::size_t>(P), std::numeric_limits<double>::quiet_NaN());
        visit.mask.assign(static_cast<std::size_t>(P), 0);
        for (int p = 0; p < P; ++p) {
            const std::string& cell = fields[static_cast<std::size_t>(4 + p)];
            if (cell.empty()) continue;
            end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw DataError("metadata.csv row " + std::to_string(row) + ": bad indicator '" + cell + "'");
            visit.indicators[static_cast<std::size_t>(p)] = v;
            visit.mask[static_cast<std::size_t>(p)] = 1;
        }
        const fs::path img_path = root / fields[2];
        if (!fs::exists(img_path))
            throw DataError("metadata.csv row " + std::to_string(row) + ": missing image file " +
                            img_path.string());
        visit.image = read_png_gray8(img_path.string());

        auto it = subject_index.find(sid);
        if (it == subject_index.end()) {
            it = subject_index.emplace(sid, corpus.subjects.size()).first;
            PhantomSubject subj;
            subj.subject_id = sid;
            if (auto lit = latents.find(sid); lit != latents.end()) subj.latent = lit->second;
            corpus.subjects.push_back(std::move(subj));
        }
        auto& subj = corpus.subjects[it->second];
        for (const auto& existing : subj.visits)
            if (format_age(existing.age_years) == fields[1])
                throw DataError("metadata.csv row " + std::to_string(row) + ": duplicate visit (" + sid +
                                ", " + fields[1] + ")");
        subj.visits.push_back(std::move(visit));
    }
    for (auto& subj : corpus.subjects)
        std::sort(subj.visits.begin(), subj.visits.end(),
                  [](const Visit& a, const Visit& b) { return a.age_years < b.age_years; });
    return corpus;
}

} // namespace tgan
