#include "tgan/nn/networks.hpp"

#include <cmath>

#include "json.hpp"

using nlohmann::json;

namespace tgan::nn {

void NetworkConfig::validate() const {
    if (image_size < 32 || image_size % 16 != 0)
        throw ConfigError("image_size must be >= 32 and divisible by 16, got " +
                          std::to_string(image_size));
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (age_code_length < 1) throw ConfigError("age_code_length must be >= 1");
    if (n_indicators < 1) throw ConfigError("n_indicators must be >= 1");
}

json NetworkConfig::to_json() const {
    return json{{"image_size", image_size},     {"base_channels", base_channels},
                {"age_code_length", age_code_length}, {"d_a", d_a},
                {"d_k", d_k},                   {"cond_hidden", cond_hidden},
                {"n_indicators", n_indicators}};
}

NetworkConfig NetworkConfig::from_json(const json& j) {
    NetworkConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.age_code_length = j.value("age_code_length", c.age_code_length);
    c.d_a = j.value("d_a", c.d_a);
    c.d_k = j.value("d_k", c.d_k);
    c.cond_hidden = j.value("cond_hidden", c.cond_hidden);
    c.n_indicators = j.value("n_indicators", c.n_indicators);
    return c;
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const NetworkConfig& cfg)
    : cfg_(cfg),
      enc1_("g.enc1", 1, cfg.base_channels, 4, 2, 1),
      enc2_("g.enc2", cfg.base_channels, 2 * cfg.base_channels, 4, 2, 1),
      enc3_("g.enc3", 2 * cfg.base_channels, 4 * cfg.base_channels, 4, 2, 1),
      enc4_("g.enc4", 4 * cfg.base_channels, 8 * cfg.base_channels, 4, 2, 1),
      n2_("g.enc2.norm", 2 * cfg.base_channels),
      n3_("g.enc3.norm", 4 * cfg.base_channels),
      n4_("g.enc4.norm", 8 * cfg.base_channels),
      a1_(Act::leaky_relu), a2_(Act::leaky_relu), a3_(Act::leaky_relu), a4_(Act::leaky_relu),
      cond1_("g.cond1", cfg.age_code_length, cfg.cond_hidden),
      cond2_("g.cond2", cfg.cond_hidden, cfg.bottleneck_channels() * cfg.d_a),
      cond_act_(Act::relu),
      fuse_("g.fuse", cfg.bottleneck_tokens(), cfg.d_a, cfg.d_k),
      dec1_("g.dec1", 8 * cfg.base_channels, 4 * cfg.base_channels, 4, 2, 1),
      dec2_("g.dec2", 8 * cfg.base_channels, 2 * cfg.base_channels, 4, 2, 1),
      dec3_("g.dec3", 4 * cfg.base_channels, cfg.base_channels, 4, 2, 1),
      dec4_("g.dec4", 2 * cfg.base_channels, cfg.base_channels, 4, 2, 1),
      nd1_("g.dec1.norm", 4 * cfg.base_channels),
      nd2_("g.dec2.norm", 2 * cfg.base_channels),
      nd3_("g.dec3.norm", cfg.base_channels),
      nd4_("g.dec4.norm", cfg.base_channels),
      ad1_(Act::relu), ad2_(Act::relu), ad3_(Act::relu), ad4_(Act::relu),
      out_conv_("g.out", cfg.base_channels, 1, 3, 1, 1),
      out_tanh_(Act::tanh) {
    cfg.validate();
}

void Generator::init(Rng& rng) {
    enc1_.init(rng); enc2_.init(rng); enc3_.init(rng); enc4_.init(rng);
    n2_.init(rng); n3_.init(rng); n4_.init(rng);
    cond1_.init(rng); cond2_.init(rng);
    fuse_.init(rng);
    dec1_.init(rng); dec2_.init(rng); dec3_.init(rng); dec4_.init(rng);
    nd1_.init(rng); nd2_.init(rng); nd3_.init(rng); nd4_.init(rng);
    out_conv_.init(rng);
}

ParamRefs Generator::params() {
    ParamRefs out;
    enc1_.collect(out); enc2_.collect(out); enc3_.collect(out); enc4_.collect(out);
    n2_.collect(out); n3_.collect(out); n4_.collect(out);
    cond1_.collect(out); cond2_.collect(out);
    fuse_.collect(out);
    dec1_.collect(out); dec2_.collect(out); dec3_.collect(out); dec4_.collect(out);
    nd1_.collect(out); nd2_.collect(out); nd3_.collect(out); nd4_.collect(out);
    out_conv_.collect(out);
    return out;
}

std::size_t Generator::param_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.numel();
    return n;
}

std::vector<std::pair<std::string, Tensor*>> Generator::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto* p : params()) out.emplace_back(p->name, &p->value);
    return out;
}

Tensor Generator::forward(const Tensor& x, const Tensor& diff, bool use_skips) {
    if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.image_size || x.dim(3) != cfg_.image_size)
        throw ShapeError("generator input must be [B,1," + std::to_string(cfg_.image_size) + "," +
                         std::to_string(cfg_.image_size) + "], got " + x.shape_str());
    if (diff.ndim() != 2 || diff.dim(0) != x.dim(0) || diff.dim(1) != cfg_.age_code_length)
        throw ShapeError("age diff code must be [B," + std::to_string(cfg_.age_code_length) +
                         "], got " + diff.shape_str());
    used_skips_ = use_skips;
    const int b = x.dim(0);
    const int C = cfg_.bottleneck_channels();
    const int side = cfg_.bottleneck_side();

    Tensor e1 = a1_.forward(enc1_.forward(x));
    Tensor e2 = a2_.forward(n2_.forward(enc2_.forward(e1)));
    Tensor e3 = a3_.forward(n3_.forward(enc3_.forward(e2)));
    Tensor e4 = a4_.forward(n4_.forward(enc4_.forward(e3)));

    Tensor fa = cond2_.forward(cond_act_.forward(cond1_.forward(diff)));
    fa.reshape({b, C, cfg_.d_a});
    Tensor fx = e4;
    fx.reshape({b, C, side * side});
    Tensor fused = fuse_.forward(fx, fa);
    fused.reshape({b, C, side, side});

    Tensor d1 = ad1_.forward(nd1_.forward(dec1_.forward(fused)));
    Tensor s3 = use_skips ? e3 : Tensor(e3.shape);
    Tensor d2 = ad2_.forward(nd2_.forward(dec2_.forward(channel_concat(d1, s3))));
    Tensor s2 = use_skips ? e2 : Tensor(e2.shape);
    Tensor d3 = ad3_.forward(nd3_.forward(dec3_.forward(channel_concat(d2, s2))));
    Tensor s1 = use_skips ? e1 : Tensor(e1.shape);
    Tensor d4 = ad4_.forward(nd4_.forward(dec4_.forward(channel_concat(d3, s1))));
    return out_tanh_.forward(out_conv_.forward(d4));
}

void Generator::backward(const Tensor& dy) {
    const int b = dy.dim(0);
    const int C = cfg_.bottleneck_channels();
    const int side = cfg_.bottleneck_side();

    Tensor dd4 = out_conv_.backward(out_tanh_.backward(dy));
    Tensor dcat3 = dec4_.backward(nd4_.backward(ad4_.backward(dd4)));
    Tensor dd3, de1_skip;
    channel_split(dcat3, cfg_.base_channels, dd3, de1_skip);

    Tensor dcat2 = dec3_.backward(nd3_.backward(ad3_.backward(dd3)));
    Tensor dd2, de2_skip;
    channel_split(dcat2, 2 * cfg_.base_channels, dd2, de2_skip);

    Tensor dcat1 = dec2_.backward(nd2_.backward(ad2_.backward(dd2)));
    Tensor dd1, de3_skip;
    channel_split(dcat1, 4 * cfg_.base_channels, dd1, de3_skip);

    Tensor dfused = dec1_.backward(nd1_.backward(ad1_.backward(dd1)));
    dfused.reshape({b, C, side * side});
    Tensor dfa;
    Tensor dfx = fuse_.backward(dfused, dfa);
    dfa.reshape({b, C * cfg_.d_a});
    cond1_.backward(cond_act_.backward(cond2_.backward(dfa)), false);

    Tensor de4 = dfx;
    de4.reshape({b, C, side, side});
    Tensor de3 = enc4_.backward(n4_.backward(a4_.backward(de4)));
    if (used_skips_)
        for (std::size_t i = 0; i < de3.numel(); ++i) de3.ptr()[i] += de3_skip.ptr()[i];
    Tensor de2 = enc3_.backward(n3_.backward(a3_.backward(de3)));
    if (used_skips_)
        for (std::size_t i = 0; i < de2.numel(); ++i) de2.ptr()[i] += de2_skip.ptr()[i];
    Tensor de1 = enc2_.backward(n2_.backward(a2_.backward(de2)));
    if (used_skips_)
        for (std::size_t i = 0; i < de1.numel(); ++i) de1.ptr()[i] += de1_skip.ptr()[i];
    enc1_.backward(a1_.backward(de1), false);
}

// ---------------------------------------------------------------------------
// PatchDiscriminator

namespace {
// paddings (1,1,1,0,1) realize S = H/8 - 4; at H=32 that collapses, so the
// small-input config pads the stride-1 tail instead
int pad4_for(int image_size) { return image_size >= 64 ? 0 : 1; }
} // namespace

PatchDiscriminator::PatchDiscriminator(const NetworkConfig& cfg)
    : cfg_(cfg),
      c1_("d_adv.c1", 2, cfg.base_channels, 4, 2, 1),
      c2_("d_adv.c2", cfg.base_channels, 2 * cfg.base_channels, 4, 2, 1),
      c3_("d_adv.c3", 2 * cfg.base_channels, 4 * cfg.base_channels, 4, 2, 1),
      c4_("d_adv.c4", 4 * cfg.base_channels, 8 * cfg.base_channels, 4, 1, pad4_for(cfg.image_size)),
      c5_("d_adv.c5", 8 * cfg.base_channels, 1, 4, 1, 1),
      n2_("d_adv.c2.norm", 2 * cfg.base_channels),
      n3_("d_adv.c3.norm", 4 * cfg.base_channels),
      n4_("d_adv.c4.norm", 8 * cfg.base_channels),
      a1_(Act::leaky_relu), a2_(Act::leaky_relu), a3_(Act::leaky_relu), a4_(Act::leaky_relu),
      sig_(Act::sigmoid) {
    cfg.validate();
}

int PatchDiscriminator::map_side(int image_size) {
    int s = image_size;
    for (int layer = 0; layer < 3; ++layer) s = (s + 2 - 4) / 2 + 1; // k4 s2 p1
    s = (s + 2 * pad4_for(image_size) - 4) / 1 + 1;                  // k4 s1
    s = (s + 2 - 4) / 1 + 1;                                         // k4 s1 p1
    return s;
}

void PatchDiscriminator::init(Rng& rng) {
    c1_.init(rng); c2_.init(rng); c3_.init(rng); c4_.init(rng); c5_.init(rng);
    n2_.init(rng); n3_.init(rng); n4_.init(rng);
}

ParamRefs PatchDiscriminator::params() {
    ParamRefs out;
    c1_.collect(out); c2_.collect(out); c3_.collect(out); c4_.collect(out); c5_.collect(out);
    n2_.collect(out); n3_.collect(out); n4_.collect(out);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> PatchDiscriminator::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto* p : params()) out.emplace_back(p->name, &p->value);
    return out;
}

Tensor PatchDiscriminator::forward(const Tensor& x, const Tensor& candidate) {
    if (!x.same_shape(candidate))
        throw ShapeError("discriminator pair shapes differ: " + x.shape_str() + " vs " +
                         candidate.shape_str());
    Tensor h = channel_concat(x, candidate);
    h = a1_.forward(c1_.forward(h));
    h = a2_.forward(n2_.forward(c2_.forward(h)));
    h = a3_.forward(n3_.forward(c3_.forward(h)));
    h = a4_.forward(n4_.forward(c4_.forward(h)));
    return sig_.forward(c5_.forward(h));
}

Tensor PatchDiscriminator::backward(const Tensor& dmap, bool need_dcandidate, bool ap) {
    Tensor dh = c5_.backward(sig_.backward(dmap), true, ap);
    dh = c4_.backward(n4_.backward(a4_.backward(dh), ap), true, ap);
    dh = c3_.backward(n3_.backward(a3_.backward(dh), ap), true, ap);
    dh = c2_.backward(n2_.backward(a2_.backward(dh), ap), true, ap);
    Tensor dpair = c1_.backward(a1_.backward(dh), need_dcandidate, ap);
    if (!need_dcandidate) return Tensor();
    Tensor dx, dcand;
    channel_split(dpair, 1, dx, dcand);
    return dcand;
}

// ---------------------------------------------------------------------------
// IndicatorDiscriminator

Tensor IndicatorDiscriminator::ResBlock::forward(const Tensor& x) {
    Tensor main = n2.forward(conv2.forward(a1.forward(n1.forward(conv1.forward(x)))));
    Tensor sc = nsc.forward(shortcut.forward(x));
    for (std::size_t i = 0; i < main.numel(); ++i) main.ptr()[i] += sc.ptr()[i];
    return aout.forward(main);
}

Tensor IndicatorDiscriminator::ResBlock::backward(const Tensor& dy, bool need_dx, bool ap) {
    Tensor dsum = aout.backward(dy);
    Tensor dmain = conv1.backward(n1.backward(a1.backward(conv2.backward(n2.backward(dsum, ap), true, ap)), ap), need_dx, ap);
    Tensor dsc = shortcut.backward(nsc.backward(dsum, ap), need_dx, ap);
    if (!need_dx) return Tensor();
    for (std::size_t i = 0; i < dmain.numel(); ++i) dmain.ptr()[i] += dsc.ptr()[i];
    return dmain;
}

void IndicatorDiscriminator::ResBlock::init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
    shortcut.init(rng);
    n1.init(rng);
    n2.init(rng);
    nsc.init(rng);
}

void IndicatorDiscriminator::ResBlock::collect(ParamRefs& out) {
    conv1.collect(out);
    conv2.collect(out);
    shortcut.collect(out);
    n1.collect(out);
    n2.collect(out);
    nsc.collect(out);
}

Tensor IndicatorDiscriminator::ScaleHead::forward(const Tensor& x) {
    return fc.forward(pool.forward(act.forward(conv.forward(x))));
}

Tensor IndicatorDiscriminator::ScaleHead::backward(const Tensor& dy, bool ap) {
    return conv.backward(act.backward(pool.backward(fc.backward(dy, true, ap))), true, ap);
}

void IndicatorDiscriminator::ScaleHead::init(Rng& rng) {
    conv.init(rng);
    fc.init(rng);
}

void IndicatorDiscriminator::ScaleHead::collect(ParamRefs& out) {
    conv.collect(out);
    fc.collect(out);
}

IndicatorDiscriminator::IndicatorDiscriminator(const NetworkConfig& cfg)
    : cfg_(cfg),
      b1_{Conv2d("d_ind.b1.conv1", 1, cfg.base_channels, 3, 2, 1),
          Conv2d("d_ind.b1.conv2", cfg.base_channels, cfg.base_channels, 3, 1, 1),
          Conv2d("d_ind.b1.sc", 1, cfg.base_channels, 1, 2, 0),
          InstanceNorm2d("d_ind.b1.n1", cfg.base_channels),
          InstanceNorm2d("d_ind.b1.n2", cfg.base_channels),
          InstanceNorm2d("d_ind.b1.nsc", cfg.base_channels),
          Activation(Act::relu), Activation(Act::relu)},
      b2_{Conv2d("d_ind.b2.conv1", cfg.base_channels, 2 * cfg.base_channels, 3, 2, 1),
          Conv2d("d_ind.b2.conv2", 2 * cfg.base_channels, 2 * cfg.base_channels, 3, 1, 1),
          Conv2d("d_ind.b2.sc", cfg.base_channels, 2 * cfg.base_channels, 1, 2, 0),
          InstanceNorm2d("d_ind.b2.n1", 2 * cfg.base_channels),
          InstanceNorm2d("d_ind.b2.n2", 2 * cfg.base_channels),
          InstanceNorm2d("d_ind.b2.nsc", 2 * cfg.base_channels),
          Activation(Act::relu), Activation(Act::relu)},
      b3_{Conv2d("d_ind.b3.conv1", 2 * cfg.base_channels, 4 * cfg.base_channels, 3, 2, 1),
          Conv2d("d_ind.b3.conv2", 4 * cfg.base_channels, 4 * cfg.base_channels, 3, 1, 1),
          Conv2d("d_ind.b3.sc", 2 * cfg.base_channels, 4 * cfg.base_channels, 1, 2, 0),
          InstanceNorm2d("d_ind.b3.n1", 4 * cfg.base_channels),
          InstanceNorm2d("d_ind.b3.n2", 4 * cfg.base_channels),
          InstanceNorm2d("d_ind.b3.nsc", 4 * cfg.base_channels),
          Activation(Act::relu), Activation(Act::relu)},
      b4_{Conv2d("d_ind.b4.conv1", 4 * cfg.base_channels, 8 * cfg.base_channels, 3, 2, 1),
          Conv2d("d_ind.b4.conv2", 8 * cfg.base_channels, 8 * cfg.base_channels, 3, 1, 1),
          Conv2d("d_ind.b4.sc", 4 * cfg.base_channels, 8 * cfg.base_channels, 1, 2, 0),
          InstanceNorm2d("d_ind.b4.n1", 8 * cfg.base_channels),
          InstanceNorm2d("d_ind.b4.n2", 8 * cfg.base_channels),
          InstanceNorm2d("d_ind.b4.nsc", 8 * cfg.base_channels),
          Activation(Act::relu), Activation(Act::relu)},
      lat2_("d_ind.lat2", 2 * cfg.base_channels, cfg.fpn_channels(), 1, 1, 0),
      lat3_("d_ind.lat3", 4 * cfg.base_channels, cfg.fpn_channels(), 1, 1, 0),
      lat4_("d_ind.lat4", 8 * cfg.base_channels, cfg.fpn_channels(), 1, 1, 0),
      head2_{Conv2d("d_ind.head2.conv", cfg.fpn_channels(), cfg.fpn_channels(), 3, 1, 1),
             Activation(Act::relu), GlobalAvgPool{},
             Linear("d_ind.head2.fc", cfg.fpn_channels(), cfg.n_indicators)},
      head3_{Conv2d("d_ind.head3.conv", cfg.fpn_channels(), cfg.fpn_channels(), 3, 1, 1),
             Activation(Act::relu), GlobalAvgPool{},
             Linear("d_ind.head3.fc", cfg.fpn_channels(), cfg.n_indicators)},
      head4_{Conv2d("d_ind.head4.conv", cfg.fpn_channels(), cfg.fpn_channels(), 3, 1, 1),
             Activation(Act::relu), GlobalAvgPool{},
             Linear("d_ind.head4.fc", cfg.fpn_channels(), cfg.n_indicators)} {
    cfg.validate();
}

void IndicatorDiscriminator::init(Rng& rng) {
    b1_.init(rng); b2_.init(rng); b3_.init(rng); b4_.init(rng);
    lat2_.init(rng); lat3_.init(rng); lat4_.init(rng);
    head2_.init(rng); head3_.init(rng); head4_.init(rng);
}

ParamRefs IndicatorDiscriminator::params() {
    ParamRefs out;
    b1_.collect(out); b2_.collect(out); b3_.collect(out); b4_.collect(out);
    lat2_.collect(out); lat3_.collect(out); lat4_.collect(out);
    head2_.collect(out); head3_.collect(out); head4_.collect(out);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> IndicatorDiscriminator::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto* p : params()) out.emplace_back(p->name, &p->value);
    return out;
}

Tensor IndicatorDiscriminator::forward(const Tensor& y) {
    if (y.ndim() != 4 || y.dim(1) != 1 || y.dim(2) < 32 || y.dim(2) % 16 != 0 || y.dim(2) != y.dim(3))
        throw ShapeError("indicator discriminator input must be square, side >= 32 and divisible by 16, got " +
                         y.shape_str());
    Tensor o1 = b1_.forward(y);
    Tensor o2 = b2_.forward(o1);
    Tensor o3 = b3_.forward(o2);
    Tensor o4 = b4_.forward(o3);

    // top-down path: block 1 stays out
    Tensor p4 = lat4_.forward(o4);
    Tensor p3 = up43_.forward(p4);
    {
        Tensor l3 = lat3_.forward(o3);
        for (std::size_t i = 0; i < p3.numel(); ++i) p3.ptr()[i] += l3.ptr()[i];
    }
    Tensor p2 = up32_.forward(p3);
    {
        Tensor l2 = lat2_.forward(o2);
        for (std::size_t i = 0; i < p2.numel(); ++i) p2.ptr()[i] += l2.ptr()[i];
    }

    Tensor r4 = head4_.forward(p4);
    Tensor r3 = head3_.forward(p3);
    Tensor r2 = head2_.forward(p2);
    Tensor out(r4.shape);
    const float third = 1.0f / 3.0f;
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.ptr()[i] = (r2.ptr()[i] + r3.ptr()[i] + r4.ptr()[i]) * third;
    return out;
}

Tensor IndicatorDiscriminator::backward(const Tensor& dpred, bool need_dx, bool ap) {
    const float third = 1.0f / 3.0f;
    Tensor dhead(dpred.shape);
    for (std::size_t i = 0; i < dpred.numel(); ++i) dhead.ptr()[i] = dpred.ptr()[i] * third;

    Tensor dp2 = head2_.backward(dhead, ap);
    Tensor dp3 = head3_.backward(dhead, ap);
    Tensor dp4 = head4_.backward(dhead, ap);

    // p2 = up(p3) + lat2(o2)
    Tensor do2 = lat2_.backward(dp2, true, ap);
    {
        Tensor up = up32_.backward(dp2);
        for (std::size_t i = 0; i < dp3.numel(); ++i) dp3.ptr()[i] += up.ptr()[i];
    }
    Tensor do3 = lat3_.backward(dp3, true, ap);
    {
        Tensor up = up43_.backward(dp3);
        for (std::size_t i = 0; i < dp4.numel(); ++i) dp4.ptr()[i] += up.ptr()[i];
    }
    Tensor do4 = lat4_.backward(dp4, true, ap);

    Tensor d3 = b4_.backward(do4, true, ap);
    for (std::size_t i = 0; i < do3.numel(); ++i) do3.ptr()[i] += d3.ptr()[i];
    Tensor d2 = b3_.backward(do3, true, ap);
    for (std::size_t i = 0; i < do2.numel(); ++i) do2.ptr()[i] += d2.ptr()[i];
    Tensor d1 = b2_.backward(do2, true, ap);
    return b1_.backward(d1, need_dx, ap);
}

} // namespace tgan::nn
