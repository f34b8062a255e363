#include "cugr/purity_net.hpp"

#include "cugr/common.hpp"
#include "cugr/rng.hpp"

#include <cmath>

namespace cugr {

using nn::Tensor;

PurityModel::PurityModel(const PurityTopology& topo, uint64_t init_seed)
    : topo_(topo),
      area_c1_("purity.area.c1", 1, topo.area_hidden, 3, 1, 1),
      area_c2_("purity.area.c2", topo.area_hidden, 1, 3, 1, 1),
      mass_c1_("purity.mass.c1",
               topo.n + (topo.fuse_seg_features ? topo.seg_feature_channels : 0), topo.trunk1, 5,
               4, 2),
      mass_c2_("purity.mass.c2", topo.trunk1, topo.trunk2, 3, 2, 1),
      mass_c3_("purity.mass.c3", topo.trunk2, topo.trunk3, 3, 2, 1),
      mass_head_("purity.mass.head",
                 topo.trunk3 * (topo.image_size / 16) * (topo.image_size / 16), 1),
      rank_c1_("purity.rank.c1", topo.n, topo.trunk1, 5, 4, 2),
      rank_c2_("purity.rank.c2", topo.trunk1, topo.trunk2, 3, 2, 1),
      rank_c3_("purity.rank.c3", topo.trunk2, topo.trunk3, 3, 2, 1),
      rank_head_("purity.rank.head",
                 topo.trunk3 * (topo.image_size / 16) * (topo.image_size / 16),
                 topo.num_levels),
      rank_area_("purity.rank.area_in", topo.n, topo.num_levels, /*bias=*/false),
      rank_mass_("purity.rank.mass_in", 1, topo.num_levels, /*bias=*/false) {
    check(topo.n >= 1, "purity: n must be >= 1");
    check(topo.num_levels >= 2, "purity: need at least 2 levels");
    check(topo.image_size % 16 == 0, "purity: image_size must be divisible by 16");

    Rng rng(init_seed);
    Rng mass_rng = rng.derive(0x3a55);
    Rng rank_rng = rng.derive(0x4a4b);
    mass_c1_.init_he(mass_rng);
    mass_c2_.init_he(mass_rng);
    mass_c3_.init_he(mass_rng);
    mass_head_.init_zero(); // sigmoid(0) = 0.5 start
    rank_c1_.init_he(rank_rng);
    rank_c2_.init_he(rank_rng);
    rank_c3_.init_he(rank_rng);
    rank_head_.init_zero();
    rank_area_.init_zero();
    rank_mass_.init_zero();
    init_area_identity();
}

// Start the area branch at the analytic solution: the pre-pooling map is the
// copper indicator 1 - x, so pooling yields the exact area purity.
void PurityModel::init_area_identity() {
    area_c1_.init_zero();
    area_c2_.init_zero();
    area_c1_.w.value.data[4] = 1.0f;  // filter 0, center tap of the 3x3 kernel
    area_c2_.w.value.data[4] = -1.0f; // reads filter 0's center
    area_c2_.b.value.data[0] = 1.0f;
}

std::vector<nn::Param*> PurityModel::area_params() {
    return {&area_c1_.w, &area_c1_.b, &area_c2_.w, &area_c2_.b};
}

std::vector<nn::Param*> PurityModel::mass_params() {
    return {&mass_c1_.w, &mass_c1_.b, &mass_c2_.w, &mass_c2_.b,
            &mass_c3_.w, &mass_c3_.b, &mass_head_.w, &mass_head_.b};
}

std::vector<nn::Param*> PurityModel::rank_params() {
    return {&rank_c1_.w, &rank_c1_.b, &rank_c2_.w,    &rank_c2_.b,   &rank_c3_.w,
            &rank_c3_.b, &rank_head_.w, &rank_head_.b, &rank_area_.w, &rank_mass_.w};
}

std::vector<nn::Param*> PurityModel::params() {
    std::vector<nn::Param*> ps = area_params();
    for (nn::Param* p : mass_params()) ps.push_back(p);
    for (nn::Param* p : rank_params()) ps.push_back(p);
    return ps;
}

Tensor PurityModel::area_channel_input(int c) const {
    const int s = topo_.image_size;
    Tensor x({1, s, s});
    const size_t plane = static_cast<size_t>(s) * s;
    std::copy_n(stack_f_.ptr() + static_cast<size_t>(c) * plane, plane, x.ptr());
    return x;
}

PurityOutput PurityModel::forward(const HeatmapStack& stack, const Tensor* seg_features) {
    check(stack.channels == topo_.n,
          "purity_forward: stack has " + std::to_string(stack.channels) +
              " channels, model expects n = " + std::to_string(topo_.n));
    check(stack.height == topo_.image_size && stack.width == topo_.image_size,
          "purity_forward: spatial size mismatch with trained configuration");

    const int s = topo_.image_size;
    const size_t plane = static_cast<size_t>(s) * s;
    stack_f_ = Tensor({topo_.n, s, s});
    for (size_t i = 0; i < stack_f_.size(); ++i)
        stack_f_.data[i] = static_cast<float>(stack.labels[i]);

    PurityOutput out;

    // area branch: shared weights applied per channel
    area_prepool_.assign(topo_.n, 0.0);
    area_vec_f_ = Tensor({topo_.n});
    for (int c = 0; c < topo_.n; ++c) {
        Tensor a1 = ar1_.forward(area_c1_.forward(area_channel_input(c)));
        Tensor a2 = area_c2_.forward(a1);
        double pooled = 0.0;
        nn::global_avg_pool(a2, &pooled);
        area_prepool_[c] = pooled;
        double clamped = std::clamp(pooled, 0.0, 1.0);
        out.area_purities.push_back(clamped);
        area_vec_f_.data[c] = static_cast<float>(clamped);
    }

    // mass branch
    if (topo_.fuse_seg_features) {
        check(seg_features != nullptr &&
                  seg_features->shape ==
                      std::vector<int>{topo_.seg_feature_channels, s, s},
              "purity_forward: fusion enabled but seg features missing or misshapen");
        mass_input_ = nn::concat_channels(stack_f_, *seg_features);
    } else {
        mass_input_ = stack_f_;
    }
    Tensor m3 = mr3_.forward(mass_c3_.forward(
        mr2_.forward(mass_c2_.forward(mr1_.forward(mass_c1_.forward(mass_input_))))));
    m3.shape = {static_cast<int>(m3.size())};
    Tensor z = mass_head_.forward(m3);
    mass_z_ = static_cast<double>(z.data[0]);
    mass_ = 1.0 / (1.0 + std::exp(-mass_z_));
    out.mass_purity = mass_;

    // rank branch
    Tensor r3 = rr3_.forward(rank_c3_.forward(
        rr2_.forward(rank_c2_.forward(rr1_.forward(rank_c1_.forward(stack_f_))))));
    r3.shape = {static_cast<int>(r3.size())};
    Tensor logits = rank_head_.forward(r3);
    Tensor from_area = rank_area_.forward(area_vec_f_);
    Tensor mass_in({1});
    mass_in.data[0] = static_cast<float>(mass_);
    Tensor from_mass = rank_mass_.forward(mass_in);
    out.level_logits.resize(topo_.num_levels);
    int best = 0;
    for (int l = 0; l < topo_.num_levels; ++l) {
        out.level_logits[l] = static_cast<double>(logits.data[l]) +
                              static_cast<double>(from_area.data[l]) +
                              static_cast<double>(from_mass.data[l]);
        if (out.level_logits[l] > out.level_logits[best]) best = l; // ties keep lower level
    }
    out.level = best + 1;
    return out;
}

void PurityModel::backward_area(const std::vector<double>& darea) {
    check(static_cast<int>(darea.size()) == topo_.n, "backward_area: bad gradient length");
    const int s = topo_.image_size;
    const double inv_plane = 1.0 / (static_cast<double>(s) * s);
    for (int c = 0; c < topo_.n; ++c) {
        // clamp gate: no gradient once the pooled value saturates
        if (darea[c] == 0.0 || area_prepool_[c] < 0.0 || area_prepool_[c] > 1.0) continue;
        Tensor a1 = ar1_.forward(area_c1_.forward(area_channel_input(c)));
        area_c2_.forward(a1); // restore caches for this channel
        Tensor da2({1, s, s});
        float g = static_cast<float>(darea[c] * inv_plane);
        std::fill(da2.data.begin(), da2.data.end(), g);
        area_c1_.backward(ar1_.backward(area_c2_.backward(da2)));
    }
}

void PurityModel::backward_mass_rank(double dmass, const std::vector<double>& dlogits) {
    check(static_cast<int>(dlogits.size()) == topo_.num_levels,
          "backward_mass_rank: bad logits gradient length");
    Tensor dl({topo_.num_levels});
    for (int l = 0; l < topo_.num_levels; ++l) dl.data[l] = static_cast<float>(dlogits[l]);

    // rank branch; the gradient into the pooled area vector is discarded
    // (the area branch is frozen during phase 3 by design)
    Tensor dr3 = rank_head_.backward(dl);
    dr3.shape = {topo_.trunk3, topo_.image_size / 16, topo_.image_size / 16};
    rank_c1_.backward(rr1_.backward(
        rank_c2_.backward(rr2_.backward(rank_c3_.backward(rr3_.backward(dr3))))));
    rank_area_.backward(dl);
    Tensor dmass_in = rank_mass_.backward(dl);

    double dmass_total = dmass + static_cast<double>(dmass_in.data[0]);
    double dz = dmass_total * mass_ * (1.0 - mass_);
    Tensor dzt({1});
    dzt.data[0] = static_cast<float>(dz);
    Tensor dm3 = mass_head_.backward(dzt);
    dm3.shape = {topo_.trunk3, topo_.image_size / 16, topo_.image_size / 16};
    mass_c1_.backward(mr1_.backward(
        mass_c2_.backward(mr2_.backward(mass_c3_.backward(mr3_.backward(dm3))))));
}

HeatmapStack stack_from_heatmaps(const std::vector<Heatmap>& hs) { return stack_heatmaps(hs); }

} // namespace cugr
