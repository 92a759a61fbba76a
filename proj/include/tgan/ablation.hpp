#ifndef TGAN_ABLATION_HPP
#define TGAN_ABLATION_HPP

#include <string>
#include <vector>

#include "tgan/evaluate.hpp"
#include "tgan/training.hpp"

namespace tgan::train {

struct AblationRow {
    std::string label;
    eval::EvalReport report;
};

// Trains one run per grid cell with a shared seed and fold, evaluates each on
// the held-out split and writes ablation.json plus a plain-text table.
// Grids: "loss" (adv | adv+asp | adv+dm | all) and "indicators" with cells
// like top:1, top:5, top:10, random:5, all.
std::vector<AblationRow> run_ablation(const Corpus& corpus, const FoldAssignment& folds, int fold_id,
                                      const TrainConfig& base, const std::string& grid,
                                      const std::vector<std::string>& cells,
                                      const std::string& out_dir);

std::string ablation_table_text(const std::vector<AblationRow>& rows);

} // namespace tgan::train

#endif
