#ifndef TGAN_AGE_ENCODING_HPP
#define TGAN_AGE_ENCODING_HPP

#include <cstdint>
#include <vector>

namespace tgan {

// Thermometer age code: a binary vector whose leading round(age * L / max_age)
// entries are 1. Two codes subtract elementwise into a {-1,0,1} difference
// vector that conditions the generator.
struct AgeCode {
    std::vector<std::uint8_t> bits;
    double age_years = 0.0;
    double max_age = 100.0;

    int popcount() const {
        int n = 0;
        for (auto b : bits) n += b;
        return n;
    }
    int length() const { return static_cast<int>(bits.size()); }
};

struct AgeDiffCode {
    std::vector<std::int8_t> values;
    int length() const { return static_cast<int>(values.size()); }
};

enum class CosineMode { literal, complement };

AgeCode encode_age(double age_years, int length = 1000, double max_age = 100.0);
AgeDiffCode age_difference_code(const AgeCode& a_i, const AgeCode& a_j);

// literal: cos<a_i, a_j> exactly as written; complement: 1 - cos<a_i, a_j>
// (the "cosine distance" reading that upweights long gaps).
double cosine_scale(const AgeCode& a_i, const AgeCode& a_j, CosineMode mode);

} // namespace tgan

#endif
