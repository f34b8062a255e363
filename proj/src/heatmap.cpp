#include "cugr/heatmap.hpp"

#include "cugr/common.hpp"
#include "cugr/image.hpp"

namespace cugr {

void SegMetrics::accumulate(const SegMetrics& other) {
    for (int t = 0; t < 2; ++t)
        for (int p = 0; p < 2; ++p) confusion[t][p] += other.confusion[t][p];
}

void SegMetrics::finalize() {
    auto iou_of = [&](int c) {
        uint64_t inter = confusion[c][c];
        uint64_t uni = confusion[c][0] + confusion[c][1] + confusion[1 - c][c] - inter;
        if (uni == 0) return 1.0; // class absent from both maps
        return static_cast<double>(inter) / static_cast<double>(uni);
    };
    iou_copper = iou_of(0);
    iou_impurity = iou_of(1);
    miou = 0.5 * (iou_copper + iou_impurity);
}

double area_purity(const Heatmap& h) {
    check(h.pixels() > 0, "area_purity: empty heatmap");
    uint64_t zeros = 0;
    for (uint8_t v : h.labels) zeros += (v == 0);
    return static_cast<double>(zeros) / static_cast<double>(h.pixels());
}

SegMetrics miou(const Heatmap& pred, const Heatmap& truth) {
    check(pred.height == truth.height && pred.width == truth.width,
          "miou: dimension mismatch");
    SegMetrics m;
    for (size_t i = 0; i < truth.labels.size(); ++i)
        m.confusion[truth.labels[i]][pred.labels[i]]++;
    m.finalize();
    return m;
}

Heatmap HeatmapStack::slice(int c) const {
    Heatmap h(height, width);
    std::copy_n(channel(c), h.pixels(), h.labels.begin());
    return h;
}

HeatmapStack stack_heatmaps(const std::vector<Heatmap>& hs) {
    check(!hs.empty(), "stack_heatmaps: empty collection");
    HeatmapStack s;
    s.channels = static_cast<int>(hs.size());
    s.height = hs[0].height;
    s.width = hs[0].width;
    s.labels.reserve(hs.size() * hs[0].pixels());
    for (const Heatmap& h : hs) {
        check(h.height == s.height && h.width == s.width,
              "stack_heatmaps: dimension mismatch");
        s.labels.insert(s.labels.end(), h.labels.begin(), h.labels.end());
    }
    return s;
}

void write_heatmap_png(const std::string& path, const Heatmap& h) {
    std::vector<uint8_t> gray(h.pixels());
    for (size_t i = 0; i < gray.size(); ++i) gray[i] = h.labels[i] ? 255 : 0;
    write_png_gray(path, h.height, h.width, gray);
}

Heatmap read_heatmap_png(const std::string& path) {
    int height = 0, width = 0;
    std::vector<uint8_t> gray = read_png_gray(path, height, width);
    Heatmap h(height, width);
    for (size_t i = 0; i < gray.size(); ++i) {
        check(gray[i] == 0 || gray[i] == 255,
              "read_heatmap_png: non-binary pixel in " + path);
        h.labels[i] = gray[i] ? 1 : 0;
    }
    return h;
}

} // namespace cugr
