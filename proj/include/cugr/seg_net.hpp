#pragma once

#include "cugr/heatmap.hpp"
#include "cugr/image.hpp"
#include "cugr/nn/layers.hpp"

#include <memory>
#include <vector>

namespace cugr {

// Compact encoder-decoder: strided encoder (total factor 8), a three-rate
// dilated context block at the bottleneck, one skip connection, bilinear
// upsampling back to input resolution.
struct SegTopology {
    int stem = 8;
    int enc1 = 16;
    int enc2 = 24;
    int enc3 = 32;
    int ctx1 = 12, ctx2 = 10, ctx3 = 10; // dilation rates 1, 2, 4
    int skip = 8;
    int dec = 16;
    int features = 32; // pre-classifier feature channels at input resolution
    int classes = 2;
    int downsample_factor = 8;
};

struct SegOutput {
    nn::Tensor probabilities; // {2,H,W}, per-pixel distribution
    nn::Tensor features;      // {features,H,W}, exposed for purity-net fusion
};

// Instances are not thread-safe (forward caches live in the layers); clone
// one model per worker for concurrent inference.
class SegModel {
public:
    SegModel(const SegTopology& topo, uint64_t init_seed);

    SegOutput forward(const ImageU8& image);
    SegOutput forward(const nn::Tensor& image); // {3,H,W}, values in [0,1]

    // Training path: returns pre-softmax logits {2,H,W} and keeps caches so
    // backward(dlogits) can accumulate parameter gradients.
    nn::Tensor forward_train(const nn::Tensor& image);
    void backward(const nn::Tensor& dlogits);

    std::vector<nn::Param*> params();
    const SegTopology& topology() const { return topo_; }

    bool frozen = false;

private:
    SegTopology topo_;
    nn::Conv2d stem_, enc1_, enc2_, enc3_;
    nn::Conv2d ctx1_, ctx2_, ctx3_;
    nn::Conv2d skip_, dec_, fuse_, cls_;
    nn::Relu r_stem_, r_enc1_, r_enc2_, r_enc3_, r_ctx1_, r_ctx2_, r_ctx3_, r_skip_, r_dec_,
        r_fuse_;
    nn::BilinearUpsample up2_{2}, up4_{4};
    // caches from the last forward_train, used by backward()/forward()
    int h_ = 0, w_ = 0;
    nn::Tensor last_features_;
};

nn::Tensor image_to_tensor(const ImageU8& image);

// Eq.-style mean pixel cross entropy evaluated from the output
// probabilities (the training loop uses the fused logits kernel, which is
// the same function of the inputs).
double loss1(const SegOutput& pred, const Heatmap& truth);

// Per-pixel argmax; ties resolve to copper (class 0).
Heatmap predict_heatmap(const SegOutput& out);

} // namespace cugr
