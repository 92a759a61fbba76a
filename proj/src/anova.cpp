#include "tgan/anova.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "tgan/common.hpp"

namespace tgan {

std::vector<std::pair<int, double>> rank_indicators_anova(const Corpus& corpus) {
    const int P = corpus.params.n_indicators;

    bool class_present[3] = {false, false, false};
    for (const auto& s : corpus.subjects)
        for (const auto& v : s.visits) class_present[static_cast<int>(v.diagnosis)] = true;
    int n_classes = class_present[0] + class_present[1] + class_present[2];
    if (n_classes < 2)
        throw ConfigError("ANOVA ranking needs at least two diagnosis classes in the corpus");

    std::vector<std::pair<int, double>> ranking;
    for (int p = 0; p < P; ++p) {
        std::vector<double> values[3];
        for (const auto& s : corpus.subjects)
            for (const auto& v : s.visits)
                if (v.mask[static_cast<std::size_t>(p)])
                    values[static_cast<int>(v.diagnosis)].push_back(v.indicators[static_cast<std::size_t>(p)]);

        bool skip = false;
        for (int g = 0; g < 3; ++g) {
            if (class_present[g] && values[g].size() < 2) {
                std::cerr << "warning: indicator " << (p + 1)
                          << " has fewer than two observed values in class "
                          << to_string(static_cast<Diagnosis>(g)) << "; excluded from ranking\n";
                skip = true;
            }
        }
        if (skip) continue;

        double grand_sum = 0.0;
        std::size_t n_total = 0;
        for (const auto& g : values) {
            for (double x : g) grand_sum += x;
            n_total += g.size();
        }
        const double grand_mean = grand_sum / static_cast<double>(n_total);

        double ssb = 0.0, ssw = 0.0;
        int groups_used = 0;
        for (const auto& g : values) {
            if (g.empty()) continue;
            ++groups_used;
            double m = 0.0;
            for (double x : g) m += x;
            m /= static_cast<double>(g.size());
            ssb += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
            for (double x : g) ssw += (x - m) * (x - m);
        }
        double f = 0.0;
        if (ssb > 0.0) {
            const double df_between = groups_used - 1;
            const double df_within = static_cast<double>(n_total) - groups_used;
            f = (ssw > 0.0 && df_within > 0.0)
                    ? (ssb / df_between) / (ssw / df_within)
                    : std::numeric_limits<double>::infinity();
        }
        ranking.emplace_back(p, f);
    }
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranking;
}

std::vector<int> select_top_k(const std::vector<std::pair<int, double>>& ranking, int k) {
    if (k < 1 || k > static_cast<int>(ranking.size()))
        throw ConfigError("top-k selection out of range: k=" + std::to_string(k) + " of " +
                          std::to_string(ranking.size()));
    std::vector<int> sel;
    for (int i = 0; i < k; ++i) sel.push_back(ranking[static_cast<std::size_t>(i)].first);
    std::sort(sel.begin(), sel.end());
    return sel;
}

std::vector<int> select_random_k(int n_indicators, int k, std::uint64_t seed) {
    if (k < 1 || k > n_indicators)
        throw ConfigError("random-k selection out of range: k=" + std::to_string(k) + " of " +
                          std::to_string(n_indicators));
    std::vector<int> all(static_cast<std::size_t>(n_indicators));
    for (int i = 0; i < n_indicators; ++i) all[static_cast<std::size_t>(i)] = i;
    Rng rng = Rng(seed).derive("indicator-selection");
    for (int i = n_indicators - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
    }
    all.resize(static_cast<std::size_t>(k));
    std::sort(all.begin(), all.end());
    return all;
}

} // namespace tgan
