#include "tgan/nn/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "tgan/common.hpp"
#include "tgan/nn/adam.hpp"

namespace tgan::nn {

const char* to_string(ClassPair p) { return p == ClassPair::ad_cn ? "ad_cn" : "ad_mci"; }

FeatureClassifier::FeatureClassifier(int feature_dim)
    : feature_dim_(feature_dim),
      c1_("clf.c1", 1, 16, 3, 2, 1),
      c2_("clf.c2", 16, 32, 3, 2, 1),
      c3_("clf.c3", 32, 64, 3, 2, 1),
      a1_(Act::relu), a2_(Act::relu), a3_(Act::relu),
      fc1_("clf.fc1", 64, feature_dim),
      fc2_("clf.fc2", feature_dim, 2),
      a4_(Act::relu) {}

void FeatureClassifier::init(Rng& rng) {
    c1_.init(rng);
    c2_.init(rng);
    c3_.init(rng);
    fc1_.init(rng, 0.05f);
    fc2_.init(rng, 0.05f);
}

ParamRefs FeatureClassifier::params() {
    ParamRefs out;
    c1_.collect(out);
    c2_.collect(out);
    c3_.collect(out);
    fc1_.collect(out);
    fc2_.collect(out);
    return out;
}

FeatureClassifier::Outputs FeatureClassifier::forward(const Tensor& x) {
    Tensor h = a1_.forward(c1_.forward(x));
    h = a2_.forward(c2_.forward(h));
    h = a3_.forward(c3_.forward(h));
    Tensor pooled = pool_.forward(h);
    Tensor feat = a4_.forward(fc1_.forward(pooled));
    Outputs out;
    out.logits = fc2_.forward(feat);
    out.features = std::move(feat);
    return out;
}

void FeatureClassifier::backward(const Tensor& dlogits) {
    Tensor d = fc1_.backward(a4_.backward(fc2_.backward(dlogits)));
    d = pool_.backward(d);
    d = c3_.backward(a3_.backward(d), true);
    d = c2_.backward(a2_.backward(d), true);
    c1_.backward(a1_.backward(d), false);
}

namespace {

Tensor images_to_batch(const std::vector<const ImageU8*>& imgs, std::size_t lo, std::size_t hi) {
    const int h = imgs[lo]->height, w = imgs[lo]->width;
    Tensor x({static_cast<int>(hi - lo), 1, h, w});
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& px = imgs[i]->pixels;
        float* dst = x.ptr() + (i - lo) * px.size();
        for (std::size_t j = 0; j < px.size(); ++j)
            dst[j] = static_cast<float>(px[j]) / 127.5f - 1.0f;
    }
    return x;
}

// softmax cross entropy over two classes; returns mean loss, writes dlogits
double softmax_ce(const Tensor& logits, const std::vector<int>& labels, std::size_t lo, Tensor& dlogits) {
    const int b = logits.dim(0);
    double loss = 0.0;
    dlogits = Tensor(logits.shape);
    for (int i = 0; i < b; ++i) {
        const float z0 = logits.data[static_cast<std::size_t>(i) * 2];
        const float z1 = logits.data[static_cast<std::size_t>(i) * 2 + 1];
        const float m = std::max(z0, z1);
        const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
        const double z = e0 + e1;
        const int label = labels[lo + static_cast<std::size_t>(i)];
        const double p0 = e0 / z, p1 = e1 / z;
        loss += -std::log(std::max(label == 0 ? p0 : p1, 1e-12));
        dlogits.data[static_cast<std::size_t>(i) * 2] = static_cast<float>((p0 - (label == 0 ? 1.0 : 0.0)) / b);
        dlogits.data[static_cast<std::size_t>(i) * 2 + 1] = static_cast<float>((p1 - (label == 1 ? 1.0 : 0.0)) / b);
    }
    return loss / b;
}

} // namespace

TrainedClassifier train_feature_classifier(const Corpus& corpus, const std::vector<int>& subjects,
                                           ClassPair pair, std::uint64_t seed, int feature_dim,
                                           int epochs) {
    const Diagnosis pos = Diagnosis::AD;
    const Diagnosis neg = (pair == ClassPair::ad_cn) ? Diagnosis::CN : Diagnosis::MCI;

    std::vector<const ImageU8*> images;
    std::vector<int> labels;
    for (int s : subjects) {
        const auto& subj = corpus.subjects[static_cast<std::size_t>(s)];
        for (const auto& v : subj.visits) {
            if (v.diagnosis == pos) {
                images.push_back(&v.image);
                labels.push_back(1);
            } else if (v.diagnosis == neg) {
                images.push_back(&v.image);
                labels.push_back(0);
            }
        }
    }
    const int n_pos = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
    const int n_neg = static_cast<int>(labels.size()) - n_pos;
    if (n_pos < 4 || n_neg < 4)
        throw ConfigError(std::string("classifier ") + to_string(pair) + " needs both classes present (" +
                          std::to_string(n_pos) + " vs " + std::to_string(n_neg) + " images)");

    Rng rng = Rng(seed).derive(std::string("feature-classifier-") + to_string(pair));
    // shuffle, 80/20 split
    std::vector<std::size_t> order(images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_index(i + 1)]);
    std::vector<const ImageU8*> shuffled;
    std::vector<int> shuffled_labels;
    for (auto i : order) {
        shuffled.push_back(images[i]);
        shuffled_labels.push_back(labels[i]);
    }
    const std::size_t n_train = std::max<std::size_t>(1, shuffled.size() * 8 / 10);

    TrainedClassifier out;
    out.pair = pair;
    out.model = FeatureClassifier(feature_dim);
    Rng init_rng = rng.derive("init");
    out.model.init(init_rng);
    Adam opt(out.model.params(), 0.9, 0.999);

    const std::size_t batch = 16;
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t lo = 0; lo < n_train; lo += batch) {
            const std::size_t hi = std::min(n_train, lo + batch);
            Tensor x = images_to_batch(shuffled, lo, hi);
            auto outs = out.model.forward(x);
            Tensor dlogits;
            softmax_ce(outs.logits, shuffled_labels, lo, dlogits);
            opt.zero_grad();
            out.model.backward(dlogits);
            opt.step(2e-3);
        }
    }

    std::size_t correct = 0, total = 0;
    for (std::size_t lo = n_train; lo < shuffled.size(); lo += batch) {
        const std::size_t hi = std::min(shuffled.size(), lo + batch);
        Tensor x = images_to_batch(shuffled, lo, hi);
        auto outs = out.model.forward(x);
        for (std::size_t i = lo; i < hi; ++i) {
            const float z0 = outs.logits.data[(i - lo) * 2];
            const float z1 = outs.logits.data[(i - lo) * 2 + 1];
            correct += ((z1 > z0) == (shuffled_labels[i] == 1));
            ++total;
        }
    }
    out.holdout_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return out;
}

std::vector<std::vector<double>> extract_features(FeatureClassifier& clf,
                                                  const std::vector<const ImageU8*>& images,
                                                  bool logits) {
    std::vector<std::vector<double>> feats;
    const std::size_t batch = 16;
    for (std::size_t lo = 0; lo < images.size(); lo += batch) {
        const std::size_t hi = std::min(images.size(), lo + batch);
        Tensor x = images_to_batch(images, lo, hi);
        auto outs = clf.forward(x);
        const Tensor& src = logits ? outs.logits : outs.features;
        const int width = src.dim(1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::vector<double> f(static_cast<std::size_t>(width));
            for (int d = 0; d < width; ++d)
                f[static_cast<std::size_t>(d)] = src.data[(i - lo) * static_cast<std::size_t>(width) + static_cast<std::size_t>(d)];
            feats.push_back(std::move(f));
        }
    }
    return feats;
}

} // namespace tgan::nn
