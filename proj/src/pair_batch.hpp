#ifndef TGAN_SRC_PAIR_BATCH_HPP
#define TGAN_SRC_PAIR_BATCH_HPP

// Internal helpers shared by the training loop and the evaluator: assembling
// network tensors from corpus pairs.

#include <cstdint>
#include <vector>

#include "tgan/age_encoding.hpp"
#include "tgan/corpus.hpp"
#include "tgan/tensor.hpp"

namespace tgan::detail {

inline void image_to_sample(const ImageU8& img, float* dst) {
    for (std::size_t j = 0; j < img.pixels.size(); ++j)
        dst[j] = static_cast<float>(img.pixels[j]) / 127.5f - 1.0f;
}

struct PairBatch {
    Tensor x;      // [B,1,H,W]
    Tensor y;      // [B,1,H,W]
    Tensor diff;   // [B,L]
    std::vector<std::vector<double>> target_indicators; // per sample, z-scored (NaN where masked)
    std::vector<std::vector<std::uint8_t>> mask;
    std::vector<double> cos_literal;
    std::vector<double> cos_complement;
};

inline PairBatch make_pair_batch(const Corpus& corpus, const std::vector<TrainingPair>& pairs,
                                 std::size_t lo, std::size_t hi, int code_length, double max_age) {
    const int b = static_cast<int>(hi - lo);
    const int size = corpus.params.image_size;
    PairBatch batch;
    batch.x = Tensor({b, 1, size, size});
    batch.y = Tensor({b, 1, size, size});
    batch.diff = Tensor({b, code_length});
    const std::size_t npx = static_cast<std::size_t>(size) * size;
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& pair = pairs[i];
        const auto& subj = corpus.subjects[static_cast<std::size_t>(pair.subject)];
        const auto& vi = subj.visits[static_cast<std::size_t>(pair.visit_i)];
        const auto& vj = subj.visits[static_cast<std::size_t>(pair.visit_j)];
        image_to_sample(vi.image, batch.x.ptr() + (i - lo) * npx);
        image_to_sample(vj.image, batch.y.ptr() + (i - lo) * npx);

        const AgeCode code_i = encode_age(vi.age_years, code_length, max_age);
        const AgeCode code_j = encode_age(vj.age_years, code_length, max_age);
        const AgeDiffCode diff = age_difference_code(code_i, code_j);
        float* drow = batch.diff.ptr() + (i - lo) * static_cast<std::size_t>(code_length);
        for (int k = 0; k < code_length; ++k) drow[k] = static_cast<float>(diff.values[static_cast<std::size_t>(k)]);

        batch.cos_literal.push_back(cosine_scale(code_i, code_j, CosineMode::literal));
        batch.cos_complement.push_back(cosine_scale(code_i, code_j, CosineMode::complement));
        batch.target_indicators.push_back(vj.indicators);
        batch.mask.push_back(vj.mask);
    }
    return batch;
}

} // namespace tgan::detail

#endif
