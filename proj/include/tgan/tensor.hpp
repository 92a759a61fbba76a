#ifndef TGAN_TENSOR_HPP
#define TGAN_TENSOR_HPP

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tgan/common.hpp"

namespace tgan {

// Dense row-major float tensor, NCHW for images, [rows, cols] for matrices.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0f) {}
    Tensor(std::vector<int> s, float fill) : shape(std::move(s)), data(count(shape), fill) {}

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    float* ptr() { return data.data(); }
    const float* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), 0.0f); }

    void reshape(std::vector<int> s) {
        if (count(s) != data.size()) throw ShapeError("reshape changes element count");
        shape = std::move(s);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string r = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(shape[i]);
        }
        return r + "]";
    }
};

inline std::string shape_to_str(const std::vector<int>& s) {
    std::string r = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += ",";
        r += std::to_string(s[i]);
    }
    return r + "]";
}

inline void require_shape(const Tensor& t, const std::vector<int>& s, const char* what) {
    if (t.shape != s)
        throw ShapeError(std::string(what) + ": expected " + shape_to_str(s) + ", got " + t.shape_str());
}

} // namespace tgan

#endif
