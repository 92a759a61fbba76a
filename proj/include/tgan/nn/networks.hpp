#ifndef TGAN_NN_NETWORKS_HPP
#define TGAN_NN_NETWORKS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "tgan/nn/layers.hpp"

namespace tgan::nn {

struct NetworkConfig {
    int image_size = 64;     // must be divisible by 16
    int base_channels = 64;  // encoder widths are base * {1,2,4,8}
    int age_code_length = 1000;
    int d_a = 64;            // width of each condition query vector
    int d_k = 64;            // attention key width
    int cond_hidden = 512;   // condition encoder hidden width
    int n_indicators = 10;

    int bottleneck_channels() const { return 8 * base_channels; }
    int bottleneck_side() const { return image_size / 16; }
    int bottleneck_tokens() const { return bottleneck_side() * bottleneck_side(); }
    int fpn_channels() const { return 2 * base_channels; }

    bool operator==(const NetworkConfig&) const = default;

    void validate() const;
    nlohmann::json to_json() const;
    static NetworkConfig from_json(const nlohmann::json& j);
};

// U-Net generator with cross-attention fusion of the age-difference code at
// the bottleneck.
class Generator {
public:
    explicit Generator(const NetworkConfig& cfg);

    void init(Rng& rng);
    ParamRefs params();
    std::size_t param_count();
    std::vector<std::pair<std::string, Tensor*>> named_tensors();

    // x [B,1,H,W] in [-1,1]; diff [B,L] entries {-1,0,1}
    Tensor forward(const Tensor& x, const Tensor& diff, bool use_skips = true);
    void backward(const Tensor& dy);

    const NetworkConfig& config() const { return cfg_; }
    AttentionFuse& attention() { return fuse_; }

private:
    NetworkConfig cfg_;
    Conv2d enc1_, enc2_, enc3_, enc4_;
    InstanceNorm2d n2_, n3_, n4_;
    Activation a1_, a2_, a3_, a4_;
    Linear cond1_, cond2_;
    Activation cond_act_;
    AttentionFuse fuse_;
    ConvTranspose2d dec1_, dec2_, dec3_, dec4_;
    InstanceNorm2d nd1_, nd2_, nd3_, nd4_;
    Activation ad1_, ad2_, ad3_, ad4_;
    Conv2d out_conv_;
    Activation out_tanh_;
    bool used_skips_ = true;
};

// Five-layer patch discriminator over the channel concat of the input image
// and a candidate; emits an SxS sigmoid map (S = H/8 - 4 at H >= 64).
class PatchDiscriminator {
public:
    explicit PatchDiscriminator(const NetworkConfig& cfg);

    void init(Rng& rng);
    ParamRefs params();
    std::vector<std::pair<std::string, Tensor*>> named_tensors();

    static int map_side(int image_size);

    Tensor forward(const Tensor& x, const Tensor& candidate);
    // returns gradient wrt the candidate image
    Tensor backward(const Tensor& dmap, bool need_dcandidate = true, bool accumulate_params = true);

private:
    NetworkConfig cfg_;
    Conv2d c1_, c2_, c3_, c4_, c5_;
    InstanceNorm2d n2_, n3_, n4_;
    Activation a1_, a2_, a3_, a4_, sig_;
};

// Residual backbone with a top-down multi-scale path over blocks 2-4; three
// scale heads are averaged into P indicator predictions.
class IndicatorDiscriminator {
public:
    explicit IndicatorDiscriminator(const NetworkConfig& cfg);

    void init(Rng& rng);
    ParamRefs params();
    std::vector<std::pair<std::string, Tensor*>> named_tensors();

    Tensor forward(const Tensor& y); // [B,1,H,W] -> [B,P]
    Tensor backward(const Tensor& dpred, bool need_dx = false, bool accumulate_params = true);

private:
    struct ResBlock {
        Conv2d conv1, conv2, shortcut;
        InstanceNorm2d n1, n2, nsc;
        Activation a1, aout;
        Tensor forward(const Tensor& x);
        Tensor backward(const Tensor& dy, bool need_dx, bool accumulate_params);
        void init(Rng& rng);
        void collect(ParamRefs& out);
    };
    struct ScaleHead {
        Conv2d conv;
        Activation act;
        GlobalAvgPool pool;
        Linear fc;
        Tensor forward(const Tensor& x);
        Tensor backward(const Tensor& dy, bool accumulate_params);
        void init(Rng& rng);
        void collect(ParamRefs& out);
    };

    NetworkConfig cfg_;
    ResBlock b1_, b2_, b3_, b4_;
    Conv2d lat2_, lat3_, lat4_;
    Upsample2x up43_, up32_;
    ScaleHead head2_, head3_, head4_;
};

} // namespace tgan::nn

#endif
