#ifndef TGAN_ANOVA_HPP
#define TGAN_ANOVA_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "tgan/corpus.hpp"

namespace tgan {

// One-way ANOVA F statistic of each indicator grouped by diagnosis, computed
// over observed cells only and sorted descending. Indicators with fewer than
// two observed values in some present class are excluded with a warning.
std::vector<std::pair<int, double>> rank_indicators_anova(const Corpus& corpus);

// Selection helpers mirroring the "Select Best" / "Random" ablation modes.
std::vector<int> select_top_k(const std::vector<std::pair<int, double>>& ranking, int k);
std::vector<int> select_random_k(int n_indicators, int k, std::uint64_t seed);

} // namespace tgan

#endif
