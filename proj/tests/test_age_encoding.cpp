#include "doctest.h"

#include <cmath>

#include "tgan/age_encoding.hpp"
#include "tgan/common.hpp"

using namespace tgan;

namespace {
// explicit-loop oracle for the cosine factor (Eq.-style dot product / norms)
double cosine_oracle(const AgeCode& a, const AgeCode& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < a.length(); ++k) {
        dot += static_cast<double>(a.bits[k]) * b.bits[k];
        na += static_cast<double>(a.bits[k]) * a.bits[k];
        nb += static_cast<double>(b.bits[k]) * b.bits[k];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}
} // namespace

TEST_CASE("encode_age reproduces the 67.5 -> 675 ones example") {
    auto code = encode_age(67.5, 1000, 100.0);
    CHECK(code.length() == 1000);
    CHECK(code.popcount() == 675);
    for (int i = 0; i < 675; ++i) CHECK(code.bits[i] == 1);
    for (int i = 675; i < 1000; ++i) CHECK(code.bits[i] == 0);
}

TEST_CASE("encode_age boundary cases") {
    CHECK(encode_age(0.0, 1000, 100.0).popcount() == 0);
    CHECK(encode_age(100.0, 1000, 100.0).popcount() == 1000);
    CHECK_THROWS_AS(encode_age(-0.1, 1000, 100.0), std::domain_error);
    CHECK_THROWS_AS(encode_age(100.1, 1000, 100.0), std::domain_error);
    CHECK_THROWS_AS(encode_age(50.0, 0, 100.0), ConfigError);
}

TEST_CASE("encode_age is monotone in age") {
    int prev = 0;
    for (double age = 0.0; age <= 100.0; age += 0.7) {
        const int pc = encode_age(age, 1000, 100.0).popcount();
        CHECK(pc >= prev);
        prev = pc;
    }
}

TEST_CASE("age_difference_code by explicit subtraction") {
    auto ai = encode_age(67.5, 1000, 100.0);
    auto aj = encode_age(70.0, 1000, 100.0);

    auto diff = age_difference_code(ai, aj);
    int plus = 0, minus = 0;
    for (int k = 0; k < diff.length(); ++k) {
        if (diff.values[k] == 1) ++plus;
        if (diff.values[k] == -1) ++minus;
        if (k >= 675 && k < 700) CHECK(diff.values[k] == 1);
        if (k < 675 || k >= 700) CHECK(diff.values[k] == 0);
    }
    CHECK(plus == 25);
    CHECK(minus == 0);

    auto rev = age_difference_code(aj, ai);
    int rev_minus = 0;
    for (auto v : rev.values) rev_minus += (v == -1);
    CHECK(rev_minus == 25);

    auto zero = age_difference_code(ai, ai);
    for (auto v : zero.values) CHECK(v == 0);

    auto shorter = encode_age(67.5, 500, 100.0);
    CHECK_THROWS_AS(age_difference_code(ai, shorter), ShapeError);
}

TEST_CASE("cosine_scale matches the explicit-loop oracle to 1e-12") {
    auto ai = encode_age(67.5, 1000, 100.0);
    auto aj = encode_age(75.0, 1000, 100.0);
    const double lit = cosine_scale(ai, aj, CosineMode::literal);
    CHECK(lit == doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));
    CHECK(std::abs(lit - cosine_oracle(ai, aj)) < 1e-12);

    for (double a = 56.0; a < 95.0; a += 7.3) {
        for (double b = 55.5; b < 97.0; b += 5.1) {
            auto ca = encode_age(a);
            auto cb = encode_age(b);
            CHECK(std::abs(cosine_scale(ca, cb, CosineMode::literal) - cosine_oracle(ca, cb)) < 1e-12);
        }
    }
}

TEST_CASE("cosine_scale identities and errors") {
    auto a = encode_age(67.5);
    CHECK(cosine_scale(a, a, CosineMode::literal) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine_scale(a, a, CosineMode::complement) == doctest::Approx(0.0).epsilon(1e-15));
    auto zero = encode_age(0.0);
    CHECK_THROWS_AS(cosine_scale(a, zero, CosineMode::literal), std::domain_error);
}

TEST_CASE("cosine_scale is symmetric and monotone in the gap") {
    auto base = encode_age(60.0);
    double prev_lit = 2.0, prev_comp = -1.0;
    for (double gap = 0.5; gap <= 30.0; gap += 0.5) {
        auto other = encode_age(60.0 + gap);
        const double lit = cosine_scale(base, other, CosineMode::literal);
        const double comp = cosine_scale(base, other, CosineMode::complement);
        CHECK(lit == cosine_scale(other, base, CosineMode::literal));
        CHECK(lit < prev_lit);
        CHECK(comp > prev_comp);
        CHECK(lit >= 0.0);
        CHECK(lit <= 1.0);
        CHECK(comp >= 0.0);
        CHECK(comp <= 1.0);
        prev_lit = lit;
        prev_comp = comp;
    }
}
