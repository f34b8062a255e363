#pragma once

#include "cugr/heatmap.hpp"
#include "cugr/nn/layers.hpp"

#include <vector>

namespace cugr {

struct PurityTopology {
    int n = 16;          // heatmap stack channels; fixed per trained model
    int image_size = 128;
    int num_levels = 7;
    bool fuse_seg_features = false; // append mean seg features to the mass trunk
    int seg_feature_channels = 32;
    int area_hidden = 4;
    int trunk1 = 24, trunk2 = 48, trunk3 = 64; // mass/rank conv stages
};

struct PurityOutput {
    std::vector<double> area_purities; // n values in [0,1]
    double mass_purity = 0.0;          // in [0,1]
    std::vector<double> level_logits;  // num_levels
    int level = 1;                     // argmax + 1, ties resolve to the better level
};

// Three-branch encoder over the spliced heatmap stack:
//  - area branch: weight-shared per-channel convs ending in global average
//    pooling (one purity per input heatmap), clamped to [0,1]. Initialized
//    to reproduce the analytic area purity exactly.
//  - mass branch: three strided conv stages to an (S/16 x S/16 x trunk3)
//    map, a full-extent kernel, then a logistic squash.
//  - rank branch: same trunk shape with its own weights; its logits also
//    consume the pooled area vector and the mass scalar.
class PurityModel {
public:
    PurityModel(const PurityTopology& topo, uint64_t init_seed);

    // seg_features: mean per-image feature grid {seg_feature_channels,S,S};
    // required iff the model was built with fuse_seg_features.
    PurityOutput forward(const HeatmapStack& stack, const nn::Tensor* seg_features = nullptr);

    // Phase-2 backward: gradient w.r.t. the area outputs (clamp gate applied
    // internally). Recomputes per-channel activations, so it must follow the
    // forward() of the same stack.
    void backward_area(const std::vector<double>& darea);

    // Phase-3 backward: gradients w.r.t. mass output and level logits.
    void backward_mass_rank(double dmass, const std::vector<double>& dlogits);

    std::vector<nn::Param*> area_params();
    std::vector<nn::Param*> mass_params();
    std::vector<nn::Param*> rank_params();
    std::vector<nn::Param*> params(); // area + mass + rank, stable order

    const PurityTopology& topology() const { return topo_; }

    bool area_trainable = true;
    bool mass_trainable = true;
    bool rank_trainable = true;

private:
    nn::Tensor area_channel_input(int c) const;
    void init_area_identity();

    PurityTopology topo_;
    nn::Conv2d area_c1_, area_c2_;
    nn::Conv2d mass_c1_, mass_c2_, mass_c3_;
    nn::Linear mass_head_;
    nn::Conv2d rank_c1_, rank_c2_, rank_c3_;
    nn::Linear rank_head_, rank_area_, rank_mass_;
    nn::Relu mr1_, mr2_, mr3_, rr1_, rr2_, rr3_, ar1_;

    // caches from the last forward
    nn::Tensor stack_f_;      // {n,S,S}
    nn::Tensor mass_input_;   // stack (+ features when fusing)
    std::vector<double> area_prepool_; // pre-clamp pooled values
    double mass_z_ = 0.0;              // pre-sigmoid
    double mass_ = 0.0;
    nn::Tensor area_vec_f_;   // {n} float copy fed to rank_area_
};

HeatmapStack stack_from_heatmaps(const std::vector<Heatmap>& hs); // alias of stack_heatmaps

} // namespace cugr
