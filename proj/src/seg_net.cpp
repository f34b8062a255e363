#include "cugr/seg_net.hpp"

#include "cugr/common.hpp"
#include "cugr/nn/loss_math.hpp"
#include "cugr/rng.hpp"

#include <cmath>

namespace cugr {

using nn::Tensor;

SegModel::SegModel(const SegTopology& topo, uint64_t init_seed)
    : topo_(topo),
      stem_("seg.stem", 3, topo.stem, 3, 1, 1),
      enc1_("seg.enc1", topo.stem, topo.enc1, 3, 2, 1),
      enc2_("seg.enc2", topo.enc1, topo.enc2, 3, 2, 1),
      enc3_("seg.enc3", topo.enc2, topo.enc3, 3, 2, 1),
      ctx1_("seg.ctx1", topo.enc3, topo.ctx1, 3, 1, 1, 1),
      ctx2_("seg.ctx2", topo.enc3, topo.ctx2, 3, 1, 2, 2),
      ctx3_("seg.ctx3", topo.enc3, topo.ctx3, 3, 1, 4, 4),
      skip_("seg.skip", topo.enc2, topo.skip, 1, 1, 0),
      dec_("seg.dec", topo.ctx1 + topo.ctx2 + topo.ctx3 + topo.skip, topo.dec, 3, 1, 1),
      fuse_("seg.fuse", topo.dec + topo.stem, topo.features, 1, 1, 0),
      cls_("seg.cls", topo.features, topo.classes, 1, 1, 0) {
    Rng rng(init_seed);
    stem_.init_he(rng);
    enc1_.init_he(rng);
    enc2_.init_he(rng);
    enc3_.init_he(rng);
    ctx1_.init_he(rng);
    ctx2_.init_he(rng);
    ctx3_.init_he(rng);
    skip_.init_he(rng);
    dec_.init_he(rng);
    fuse_.init_he(rng);
    cls_.init_zero(); // equal logits -> uniform 0.5/0.5 before training
}

std::vector<nn::Param*> SegModel::params() {
    std::vector<nn::Param*> ps;
    for (nn::Conv2d* c : {&stem_, &enc1_, &enc2_, &enc3_, &ctx1_, &ctx2_, &ctx3_, &skip_, &dec_,
                          &fuse_, &cls_}) {
        ps.push_back(&c->w);
        ps.push_back(&c->b);
    }
    return ps;
}

nn::Tensor image_to_tensor(const ImageU8& image) {
    Tensor t({3, image.height, image.width});
    const size_t plane = image.pixels();
    for (size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c)
            t.data[c * plane + i] = static_cast<float>(image.data[i * 3 + c]) / 255.0f;
    return t;
}

Tensor SegModel::forward_train(const Tensor& image) {
    check(image.shape.size() == 3 && image.dim(0) == 3, "seg_forward: expected {3,H,W} input");
    const int h = image.dim(1), w = image.dim(2);
    const int f = topo_.downsample_factor;
    if (h % f != 0 || w % f != 0) {
        int ph = (f - h % f) % f, pw = (f - w % f) % f;
        throw Error("seg_forward: dimensions " + std::to_string(h) + "x" + std::to_string(w) +
                    " not divisible by " + std::to_string(f) + "; pad by " + std::to_string(ph) +
                    " rows and " + std::to_string(pw) + " cols");
    }
    h_ = h;
    w_ = w;

    Tensor t0 = r_stem_.forward(stem_.forward(image));       // {stem,H,W}
    Tensor t1 = r_enc1_.forward(enc1_.forward(t0));          // /2
    Tensor t2 = r_enc2_.forward(enc2_.forward(t1));          // /4
    Tensor t3 = r_enc3_.forward(enc3_.forward(t2));          // /8
    Tensor c1 = r_ctx1_.forward(ctx1_.forward(t3));
    Tensor c2 = r_ctx2_.forward(ctx2_.forward(t3));
    Tensor c3 = r_ctx3_.forward(ctx3_.forward(t3));
    Tensor ctx = nn::concat_channels(nn::concat_channels(c1, c2), c3);
    Tensor u1 = up2_.forward(ctx);                           // /4
    Tensor sk = r_skip_.forward(skip_.forward(t2));          // /4
    Tensor d = r_dec_.forward(dec_.forward(nn::concat_channels(u1, sk)));
    Tensor u2 = up4_.forward(d);                             // /1
    last_features_ = r_fuse_.forward(fuse_.forward(nn::concat_channels(u2, t0)));
    return cls_.forward(last_features_);
}

void SegModel::backward(const Tensor& dlogits) {
    const int h = h_, w = w_;
    Tensor dfeat = r_fuse_.backward(cls_.backward(dlogits));
    Tensor dcat2 = fuse_.backward(dfeat);
    Tensor du2 = nn::slice_channels(dcat2, 0, topo_.dec);
    Tensor dt0_a = nn::slice_channels(dcat2, topo_.dec, topo_.dec + topo_.stem);
    Tensor dd = r_dec_.backward(up4_.backward(du2, h / 4, w / 4));
    Tensor dcat1 = dec_.backward(dd);
    int ctx_ch = topo_.ctx1 + topo_.ctx2 + topo_.ctx3;
    Tensor du1 = nn::slice_channels(dcat1, 0, ctx_ch);
    Tensor dsk = nn::slice_channels(dcat1, ctx_ch, ctx_ch + topo_.skip);
    Tensor dctx = up2_.backward(du1, h / 8, w / 8);
    Tensor dt2_a = skip_.backward(r_skip_.backward(dsk));
    Tensor dc1 = nn::slice_channels(dctx, 0, topo_.ctx1);
    Tensor dc2 = nn::slice_channels(dctx, topo_.ctx1, topo_.ctx1 + topo_.ctx2);
    Tensor dc3 = nn::slice_channels(dctx, topo_.ctx1 + topo_.ctx2, ctx_ch);
    Tensor dt3 = ctx1_.backward(r_ctx1_.backward(dc1));
    {
        Tensor t = ctx2_.backward(r_ctx2_.backward(dc2));
        for (size_t i = 0; i < dt3.size(); ++i) dt3.data[i] += t.data[i];
        t = ctx3_.backward(r_ctx3_.backward(dc3));
        for (size_t i = 0; i < dt3.size(); ++i) dt3.data[i] += t.data[i];
    }
    Tensor dt2 = enc3_.backward(r_enc3_.backward(dt3));
    for (size_t i = 0; i < dt2.size(); ++i) dt2.data[i] += dt2_a.data[i];
    Tensor dt1 = enc2_.backward(r_enc2_.backward(dt2));
    Tensor dt0 = enc1_.backward(r_enc1_.backward(dt1));
    for (size_t i = 0; i < dt0.size(); ++i) dt0.data[i] += dt0_a.data[i];
    stem_.backward(r_stem_.backward(dt0)); // input gradient discarded
}

SegOutput SegModel::forward(const ImageU8& image) { return forward(image_to_tensor(image)); }

SegOutput SegModel::forward(const nn::Tensor& image) {
    Tensor logits = forward_train(image);
    const int h = image.dim(1), w = image.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;

    SegOutput out;
    out.probabilities = Tensor({2, h, w});
    for (size_t j = 0; j < plane; ++j) {
        float z0 = logits.data[j], z1 = logits.data[plane + j];
        float m = std::max(z0, z1);
        float e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
        float inv = 1.0f / (e0 + e1);
        out.probabilities.data[j] = e0 * inv;
        out.probabilities.data[plane + j] = e1 * inv;
    }
    out.features = last_features_;
    return out;
}

double loss1(const SegOutput& pred, const Heatmap& truth) {
    check(pred.probabilities.dim(1) == truth.height && pred.probabilities.dim(2) == truth.width,
          "loss1: dimension mismatch");
    const size_t plane = truth.pixels();
    std::vector<double> prob_true(plane);
    for (size_t j = 0; j < plane; ++j)
        prob_true[j] =
            pred.probabilities.data[truth.labels[j] == 0 ? j : plane + j];
    return nn::ce_mean_from_probs(prob_true.data(), plane);
}

Heatmap predict_heatmap(const SegOutput& out) {
    const int h = out.probabilities.dim(1), w = out.probabilities.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;
    Heatmap hm(h, w);
    for (size_t j = 0; j < plane; ++j)
        hm.labels[j] = out.probabilities.data[j] >= out.probabilities.data[plane + j] ? 0 : 1;
    return hm;
}

} // namespace cugr
