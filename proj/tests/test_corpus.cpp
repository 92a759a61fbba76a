#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tgan/anova.hpp"
#include "tgan/common.hpp"
#include "tgan/corpus.hpp"

using namespace tgan;
namespace fs = std::filesystem;

namespace {

CorpusParams small_params(int n = 24, int size = 32, double missing = 0.2, std::uint64_t seed = 5) {
    CorpusParams p;
    p.n_subjects = n;
    p.image_size = size;
    p.missing_rate = missing;
    p.seed = seed;
    return p;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

bool corpora_equal(const Corpus& a, const Corpus& b) {
    if (a.subjects.size() != b.subjects.size()) return false;
    for (std::size_t s = 0; s < a.subjects.size(); ++s) {
        const auto& sa = a.subjects[s];
        const auto& sb = b.subjects[s];
        if (sa.subject_id != sb.subject_id) return false;
        if (sa.latent.morphology_seed != sb.latent.morphology_seed) return false;
        if (sa.visits.size() != sb.visits.size()) return false;
        for (std::size_t v = 0; v < sa.visits.size(); ++v) {
            const auto& va = sa.visits[v];
            const auto& vb = sb.visits[v];
            if (va.age_years != vb.age_years) return false;
            if (!(va.image == vb.image)) return false;
            if (va.diagnosis != vb.diagnosis) return false;
            if (va.mask != vb.mask) return false;
            for (std::size_t p = 0; p < va.indicators.size(); ++p) {
                if (!va.mask[p]) continue;
                if (va.indicators[p] != vb.indicators[p]) return false;
            }
        }
    }
    return true;
}

} // namespace

TEST_CASE("generate_corpus invariants and determinism") {
    auto corpus = generate_corpus(small_params());
    CHECK(corpus.subjects.size() == 24);
    for (const auto& s : corpus.subjects) {
        CHECK(s.visits.size() >= 2);
        CHECK(s.visits.size() <= 6);
        double prev = 0.0;
        for (const auto& v : s.visits) {
            CHECK(v.age_years >= kMinVisitAge);
            CHECK(v.age_years <= kMaxVisitAge);
            CHECK(v.age_years > prev);
            prev = v.age_years;
        }
    }
    auto again = generate_corpus(small_params());
    CHECK(corpora_equal(corpus, again));
}

TEST_CASE("generate_corpus rejects bad configs") {
    auto p = small_params();
    p.image_size = 48;
    CHECK_THROWS_AS(generate_corpus(p), ConfigError);
    p = small_params();
    p.n_subjects = 0;
    CHECK_THROWS_AS(generate_corpus(p), ConfigError);
    p = small_params();
    p.missing_rate = 1.0;
    CHECK_THROWS_AS(generate_corpus(p), ConfigError);
}

TEST_CASE("zero missingness observes everything") {
    auto corpus = generate_corpus(small_params(1, 32, 0.0, 7));
    CHECK(observed_fraction(corpus) == 1.0);
}

TEST_CASE("apply_missingness hits the requested rate") {
    auto corpus = generate_corpus(small_params(60, 32, 0.0, 3));
    // rate = 1 - eps keeps roughly eps observed
    for (auto& s : corpus.subjects) {
        Rng rng = Rng(11).derive(s.subject_id);
        apply_missingness(s.visits, 0.95, rng);
    }
    CHECK(observed_fraction(corpus) == doctest::Approx(0.05).epsilon(0.5));
    CHECK(std::abs(observed_fraction(corpus) - 0.05) < 0.02);

    // same seed, same masks
    auto c2 = generate_corpus(small_params(60, 32, 0.0, 3));
    for (auto& s : c2.subjects) {
        Rng rng = Rng(11).derive(s.subject_id);
        apply_missingness(s.visits, 0.95, rng);
    }
    for (std::size_t s = 0; s < corpus.subjects.size(); ++s)
        for (std::size_t v = 0; v < corpus.subjects[s].visits.size(); ++v)
            CHECK(corpus.subjects[s].visits[v].mask == c2.subjects[s].visits[v].mask);
}

TEST_CASE("build_pairs enumerates ordered pairs with the 3-year split") {
    Corpus corpus;
    corpus.params.n_indicators = 2;
    PhantomSubject s;
    s.subject_id = "sub_0000";
    for (double age : {70.0, 71.0, 75.0}) {
        Visit v;
        v.age_years = age;
        v.indicators = {0.0, 0.0};
        v.mask = {1, 1};
        s.visits.push_back(v);
    }
    corpus.subjects.push_back(s);

    auto pairs = build_pairs(corpus);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].age_i == 70.0);
    CHECK(pairs[0].age_j == 71.0);
    CHECK(pairs[0].term == Term::short_term);
    CHECK(pairs[1].age_j == 75.0);
    CHECK(pairs[1].term == Term::long_term);
    CHECK(pairs[2].age_i == 71.0);
    CHECK(pairs[2].term == Term::long_term);
}

TEST_CASE("pair count matches the combinatorial oracle") {
    auto corpus = generate_corpus(small_params(30, 32, 0.1, 9));
    auto pairs = build_pairs(corpus);
    std::size_t expect = 0;
    for (const auto& s : corpus.subjects) {
        const std::size_t k = s.visits.size();
        expect += k * (k - 1) / 2;
    }
    CHECK(pairs.size() == expect);
}

TEST_CASE("split_folds partitions subjects") {
    auto corpus = generate_corpus(small_params(100, 32, 0.0, 21));
    auto fa = split_folds(corpus, 5, 0.1, 42);
    REQUIRE(fa.partition.size() == 100);
    int n_test = 0;
    std::vector<int> fold_sizes(5, 0);
    for (int part : fa.partition) {
        CHECK(part >= -1);
        CHECK(part < 5);
        if (part == -1)
            ++n_test;
        else
            ++fold_sizes[static_cast<std::size_t>(part)];
    }
    CHECK(n_test == 10);
    for (int sz : fold_sizes) CHECK(sz == 18);

    auto fa2 = split_folds(corpus, 5, 0.1, 42);
    CHECK(fa.partition == fa2.partition);

    auto tiny = generate_corpus(small_params(4, 32, 0.0, 1));
    CHECK_THROWS_AS(split_folds(tiny, 5, 0.1, 42), ConfigError);
}

TEST_CASE("corpus round-trips through disk exactly") {
    TempDir tmp("tgan_corpus_rt");
    auto corpus = generate_corpus(small_params(6, 32, 0.3, 13));
    save_corpus(corpus, tmp.path.string());
    auto loaded = load_corpus(tmp.path.string());
    CHECK(corpora_equal(corpus, loaded));
    CHECK(loaded.params.seed == corpus.params.seed);
    CHECK(loaded.indicator_mean == corpus.indicator_mean);
}

TEST_CASE("load_corpus error paths") {
    TempDir tmp("tgan_corpus_err");
    auto corpus = generate_corpus(small_params(3, 32, 0.4, 17));
    save_corpus(corpus, tmp.path.string());

    SUBCASE("empty cell means masked") {
        auto loaded = load_corpus(tmp.path.string());
        bool any_missing = false;
        for (const auto& s : loaded.subjects)
            for (const auto& v : s.visits)
                for (std::size_t p = 0; p < v.mask.size(); ++p)
                    if (!v.mask[p]) {
                        any_missing = true;
                        CHECK(std::isnan(v.indicators[p]));
                    }
        CHECK(any_missing);
    }

    SUBCASE("missing image file is reported with its path") {
        const auto img = tmp.path / "images" / "sub_0001";
        fs::remove_all(img);
        try {
            load_corpus(tmp.path.string());
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("sub_0001") != std::string::npos);
        }
    }

    SUBCASE("malformed row is reported with its number") {
        std::ofstream csv(tmp.path / "metadata.csv", std::ios::app);
        csv << "sub_9999,not_a_number\n";
        csv.close();
        try {
            load_corpus(tmp.path.string());
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("row") != std::string::npos);
        }
    }

    SUBCASE("duplicate (subject, age) is rejected") {
        std::ifstream in(tmp.path / "metadata.csv");
        std::string header, first;
        std::getline(in, header);
        std::getline(in, first);
        in.close();
        std::ofstream csv(tmp.path / "metadata.csv", std::ios::app);
        csv << first << "\n";
        csv.close();
        CHECK_THROWS_AS(load_corpus(tmp.path.string()), DataError);
    }
}

TEST_CASE("anova ranking puts disease-coupled indicators first") {
    auto corpus = generate_corpus(small_params(80, 32, 0.2, 23));
    auto ranking = rank_indicators_anova(corpus);
    REQUIRE(ranking.size() == 10);
    std::set<int> top6;
    for (int i = 0; i < 6; ++i) top6.insert(ranking[static_cast<std::size_t>(i)].first);
    for (int p = 0; p < 6; ++p) CHECK(top6.count(p) == 1);
    // noise indicators score near zero, disease ones clearly above
    CHECK(ranking[5].second > 10.0 * ranking[6].second);
}

TEST_CASE("anova F is zero for a constant indicator") {
    auto corpus = generate_corpus(small_params(40, 32, 0.0, 29));
    for (auto& s : corpus.subjects)
        for (auto& v : s.visits) v.indicators[7] = 1.25;
    auto ranking = rank_indicators_anova(corpus);
    bool found = false;
    for (const auto& [p, f] : ranking)
        if (p == 7) {
            CHECK(f == 0.0);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("anova F is invariant under class-label permutation symmetry") {
    // two classes with identical group statistics after swapping labels
    Corpus corpus;
    corpus.params.n_indicators = 1;
    auto add_subject = [&](const std::string& id, Diagnosis d, std::vector<double> vals) {
        PhantomSubject s;
        s.subject_id = id;
        for (double x : vals) {
            Visit v;
            v.age_years = 60.0 + x;
            v.indicators = {x};
            v.mask = {1};
            v.diagnosis = d;
            s.visits.push_back(v);
        }
        corpus.subjects.push_back(s);
    };
    add_subject("a", Diagnosis::CN, {1.0, 2.0, 3.0});
    add_subject("b", Diagnosis::AD, {4.0, 5.0, 6.0});
    auto f1 = rank_indicators_anova(corpus);

    corpus.subjects[0].visits[0].diagnosis = Diagnosis::AD;
    corpus.subjects[0].visits[1].diagnosis = Diagnosis::AD;
    corpus.subjects[0].visits[2].diagnosis = Diagnosis::AD;
    corpus.subjects[1].visits[0].diagnosis = Diagnosis::CN;
    corpus.subjects[1].visits[1].diagnosis = Diagnosis::CN;
    corpus.subjects[1].visits[2].diagnosis = Diagnosis::CN;
    auto f2 = rank_indicators_anova(corpus);
    CHECK(f1[0].second == doctest::Approx(f2[0].second).epsilon(1e-12));
}

TEST_CASE("anova longhand oracle on a tiny fixture") {
    Corpus corpus;
    corpus.params.n_indicators = 1;
    PhantomSubject s1, s2;
    s1.subject_id = "x";
    s2.subject_id = "y";
    auto mk = [](double age, double val, Diagnosis d) {
        Visit v;
        v.age_years = age;
        v.indicators = {val};
        v.mask = {1};
        v.diagnosis = d;
        return v;
    };
    s1.visits = {mk(60, 1.0, Diagnosis::CN), mk(61, 2.0, Diagnosis::CN), mk(62, 2.4, Diagnosis::CN)};
    s2.visits = {mk(60, 5.0, Diagnosis::AD), mk(61, 6.0, Diagnosis::AD), mk(62, 7.1, Diagnosis::AD)};
    corpus.subjects = {s1, s2};

    // longhand: group means, between/within sums of squares
    const double m1 = (1.0 + 2.0 + 2.4) / 3.0;
    const double m2 = (5.0 + 6.0 + 7.1) / 3.0;
    const double gm = (m1 + m2) / 2.0;
    const double ssb = 3.0 * (m1 - gm) * (m1 - gm) + 3.0 * (m2 - gm) * (m2 - gm);
    double ssw = 0.0;
    for (double x : {1.0, 2.0, 2.4}) ssw += (x - m1) * (x - m1);
    for (double x : {5.0, 6.0, 7.1}) ssw += (x - m2) * (x - m2);
    const double f_expect = (ssb / 1.0) / (ssw / 4.0);

    auto ranking = rank_indicators_anova(corpus);
    REQUIRE(ranking.size() == 1);
    CHECK(ranking[0].second == doctest::Approx(f_expect).epsilon(1e-12));
}

TEST_CASE("indicator selection helpers") {
    std::vector<std::pair<int, double>> ranking{{3, 9.0}, {0, 5.0}, {2, 1.0}, {1, 0.5}};
    CHECK(select_top_k(ranking, 2) == std::vector<int>{0, 3});
    CHECK_THROWS_AS(select_top_k(ranking, 5), ConfigError);
    auto r1 = select_random_k(10, 4, 7);
    auto r2 = select_random_k(10, 4, 7);
    CHECK(r1 == r2);
    CHECK(r1.size() == 4);
}

TEST_CASE("extended indicator pools keep six disease-coupled indicators") {
    auto p = small_params(20, 32, 0.1, 31);
    p.n_indicators = 36; // the 10 defaults plus 26 extra noise indicators
    auto corpus = generate_corpus(p);
    for (const auto& s : corpus.subjects)
        for (const auto& v : s.visits) CHECK(v.indicators.size() == 36);
    auto ranking = rank_indicators_anova(corpus);
    CHECK(ranking.size() == 36);
    std::set<int> top6;
    for (int i = 0; i < 6; ++i) top6.insert(ranking[static_cast<std::size_t>(i)].first);
    for (int i = 0; i < 6; ++i) CHECK(top6.count(i) == 1);
}
