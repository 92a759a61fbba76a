#include "tgan/age_encoding.hpp"

#include <cmath>
#include <string>

#include "tgan/common.hpp"

namespace tgan {

AgeCode encode_age(double age_years, int length, double max_age) {
    if (length < 1) throw ConfigError("age code length must be >= 1, got " + std::to_string(length));
    if (!(age_years >= 0.0 && age_years <= max_age))
        throw std::domain_error("age " + std::to_string(age_years) + " outside [0, " +
                                std::to_string(max_age) + "]");
    AgeCode code;
    code.age_years = age_years;
    code.max_age = max_age;
    code.bits.assign(static_cast<std::size_t>(length), 0);
    // round-half-up keeps exact tenths exact (67.5 -> 675 of 1000)
    const int ones = static_cast<int>(std::floor(age_years * length / max_age + 0.5));
    for (int i = 0; i < ones && i < length; ++i) code.bits[static_cast<std::size_t>(i)] = 1;
    return code;
}

AgeDiffCode age_difference_code(const AgeCode& a_i, const AgeCode& a_j) {
    if (a_i.length() != a_j.length())
        throw ShapeError("age codes differ in length: " + std::to_string(a_i.length()) + " vs " +
                         std::to_string(a_j.length()));
    AgeDiffCode diff;
    diff.values.resize(a_i.bits.size());
    for (std::size_t k = 0; k < a_i.bits.size(); ++k)
        diff.values[k] = static_cast<std::int8_t>(static_cast<int>(a_j.bits[k]) - static_cast<int>(a_i.bits[k]));
    return diff;
}

double cosine_scale(const AgeCode& a_i, const AgeCode& a_j, CosineMode mode) {
    if (a_i.length() != a_j.length())
        throw ShapeError("age codes differ in length: " + std::to_string(a_i.length()) + " vs " +
                         std::to_string(a_j.length()));
    const int ni = a_i.popcount();
    const int nj = a_j.popcount();
    if (ni == 0 || nj == 0)
        throw std::domain_error("cosine_scale undefined for an all-zero age code");
    // prefix-ones codes: dot = min popcount, norms = sqrt of popcounts
    const double dot = static_cast<double>(ni < nj ? ni : nj);
    const double cos = dot / std::sqrt(static_cast<double>(ni) * static_cast<double>(nj));
    return mode == CosineMode::literal ? cos : 1.0 - cos;
}

} // namespace tgan
