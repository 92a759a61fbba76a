#ifndef TGAN_NN_CLASSIFIER_HPP
#define TGAN_NN_CLASSIFIER_HPP

#include <cstdint>
#include <vector>

#include "tgan/corpus.hpp"
#include "tgan/nn/layers.hpp"

namespace tgan::nn {

// Small convolutional two-class classifier whose penultimate representation
// serves as the feature map f for the disease feature distance.
class FeatureClassifier {
public:
    explicit FeatureClassifier(int feature_dim = 64);

    void init(Rng& rng);
    ParamRefs params();

    struct Outputs {
        Tensor features; // [B, F] input to the final fully connected layer
        Tensor logits;   // [B, 2]
    };
    Outputs forward(const Tensor& x); // [B,1,H,W] in [-1,1]
    void backward(const Tensor& dlogits);

    int feature_dim() const { return feature_dim_; }

private:
    int feature_dim_;
    Conv2d c1_, c2_, c3_;
    Activation a1_, a2_, a3_;
    GlobalAvgPool pool_;
    Linear fc1_, fc2_;
    Activation a4_;
};

enum class ClassPair { ad_cn, ad_mci };
const char* to_string(ClassPair p);

struct TrainedClassifier {
    FeatureClassifier model{64};
    double holdout_accuracy = 0.0;
    ClassPair pair = ClassPair::ad_cn;
};

// Trains on real images of the two classes drawn from the given subjects;
// deterministic given seed. Throws ConfigError when a class is absent.
TrainedClassifier train_feature_classifier(const Corpus& corpus,
                                           const std::vector<int>& subjects, ClassPair pair,
                                           std::uint64_t seed, int feature_dim = 64,
                                           int epochs = 12);

// Feature extraction helper; logits=true applies the alternate reading of f.
std::vector<std::vector<double>> extract_features(FeatureClassifier& clf,
                                                  const std::vector<const ImageU8*>& images,
                                                  bool logits = false);

} // namespace tgan::nn

#endif
