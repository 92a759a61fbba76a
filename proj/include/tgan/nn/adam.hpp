#ifndef TGAN_NN_ADAM_HPP
#define TGAN_NN_ADAM_HPP

#include <vector>

#include "tgan/nn/layers.hpp"

namespace tgan::nn {

class Adam {
public:
    explicit Adam(ParamRefs params, double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step(double lr);

private:
    ParamRefs params_;
    std::vector<std::vector<float>> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

} // namespace tgan::nn

#endif
