#ifndef TGAN_CORPUS_HPP
#define TGAN_CORPUS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tgan/phantom.hpp"
#include "tgan/rng.hpp"

namespace tgan {

enum class Diagnosis { CN, MCI, AD };

const char* to_string(Diagnosis d);
Diagnosis diagnosis_from_string(const std::string& s);
Diagnosis diagnosis_from_severity(double severity);

struct Visit {
    double age_years = 0.0;
    ImageU8 image;
    std::vector<double> indicators;     // z-scored; NaN sentinel where masked
    std::vector<std::uint8_t> mask;     // 1 = observed
    Diagnosis diagnosis = Diagnosis::CN;
};

struct PhantomSubject {
    std::string subject_id;
    LatentState latent;
    std::vector<Visit> visits; // strictly increasing ages in [55.0, 97.3]
};

// Visit schedule knobs. Defaults are tuned so all ordered within-subject
// pairs come out ~64.5% short-term (gap <= 3 years).
struct ScheduleParams {
    double target_short_fraction = 0.6453;
    std::array<double, 5> visit_count_weights{0.36, 0.33, 0.17, 0.09, 0.05}; // counts 2..6
    std::array<double, 4> gap_weights{0.32, 0.30, 0.12, 0.26}; // 0.5y, 1y, 1.5y, long
    double long_gap_min = 3.5;
    double long_gap_max = 8.0;
    double first_age_min = 58.0;
    double first_age_max = 82.0;
};

struct CorpusParams {
    int n_subjects = 200;
    int image_size = 64;
    double missing_rate = 0.3348;
    std::uint64_t seed = 42;
    int n_indicators = 10;
    ScheduleParams schedule;
};

struct Corpus {
    CorpusParams params;
    std::vector<PhantomSubject> subjects;
    std::vector<double> indicator_mean; // z-scoring statistics used at export
    std::vector<double> indicator_std;

    std::size_t total_visits() const;
};

inline constexpr double kMinVisitAge = 55.0;
inline constexpr double kMaxVisitAge = 97.3;
inline constexpr double kShortTermMaxGapYears = 3.0;

Corpus generate_corpus(const CorpusParams& params);

// MCAR drop of indicator cells; masks and sentinel values only, ages and
// images untouched.
void apply_missingness(std::vector<Visit>& visits, double rate, Rng rng);

enum class Term { short_term, long_term };

struct TrainingPair {
    int subject = 0;
    int visit_i = 0;
    int visit_j = 0;
    double age_i = 0.0;
    double age_j = 0.0;
    Term term = Term::short_term;
};

std::vector<TrainingPair> build_pairs(const Corpus& corpus);
double short_fraction(const std::vector<TrainingPair>& pairs);
double observed_fraction(const Corpus& corpus);

// Subject-level split: holdout_fraction of subjects become the test set
// (partition id -1), the rest are dealt round-robin into k folds (ids 0..k-1).
struct FoldAssignment {
    int k = 5;
    std::vector<int> partition; // per subject index

    bool is_test(int subject) const { return partition[static_cast<std::size_t>(subject)] == -1; }
};

FoldAssignment split_folds(const Corpus& corpus, int k, double holdout_fraction, std::uint64_t seed);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

} // namespace tgan

#endif
