#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cugr {

// Per-pixel binary classification map: 0 = copper, 1 = impurity.
struct Heatmap {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> labels; // height*width, each 0 or 1

    Heatmap() = default;
    Heatmap(int h, int w, uint8_t fill = 0)
        : height(h), width(w), labels(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
    size_t pixels() const { return static_cast<size_t>(height) * width; }
};

// 2x2 pixel confusion counts plus the per-class and mean IoU derived from
// them. Aggregating over a dataset sums confusions first, then derives IoU
// once from the totals (corpus-level mIoU, not per-image averaging).
struct SegMetrics {
    // confusion[t][p] = pixels with true class t predicted as p (0 copper, 1 impurity)
    uint64_t confusion[2][2] = {{0, 0}, {0, 0}};
    double iou_copper = 0.0;
    double iou_impurity = 0.0;
    double miou = 0.0;

    void accumulate(const SegMetrics& other);
    void finalize(); // recompute IoUs from the confusion counts
    uint64_t total_pixels() const {
        return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
    }
};

// Fraction of copper (0) pixels.
double area_purity(const Heatmap& h);

// Per-class IoU between prediction and ground truth. A class absent from
// both maps contributes IoU = 1 (vacuous agreement).
SegMetrics miou(const Heatmap& pred, const Heatmap& truth);

// n heatmaps spliced into an n-channel grid, input order preserved.
struct HeatmapStack {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> labels; // channels*height*width

    const uint8_t* channel(int c) const {
        return labels.data() + static_cast<size_t>(c) * height * width;
    }
    Heatmap slice(int c) const;
};

HeatmapStack stack_heatmaps(const std::vector<Heatmap>& hs);

// PNG codec for the dataset layout: label 0 <-> pixel 0, label 1 <-> pixel 255.
// Round-trip is lossless; any other pixel value on disk is rejected.
void write_heatmap_png(const std::string& path, const Heatmap& h);
Heatmap read_heatmap_png(const std::string& path);

} // namespace cugr
