#include "cugr/augment.hpp"

#include "cugr/common.hpp"
#include "cugr/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cugr {

namespace {

// Two-pass 8-connected labeling with union-find. The test suite checks the
// component count against an independent flood-fill oracle.
std::vector<int> label_components(const Heatmap& mask, int& num_labels) {
    const int h = mask.height, w = mask.width;
    std::vector<int> label(static_cast<size_t>(h) * w, -1);
    std::vector<int> parent;
    auto find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask.at(y, x) != 1) continue;
            size_t i = static_cast<size_t>(y) * w + x;
            int neighbors[4][2] = {{y, x - 1}, {y - 1, x - 1}, {y - 1, x}, {y - 1, x + 1}};
            int found = -1;
            for (auto& nb : neighbors) {
                int ny = nb[0], nx = nb[1];
                if (ny < 0 || nx < 0 || nx >= w) continue;
                int l = label[static_cast<size_t>(ny) * w + nx];
                if (l < 0) continue;
                if (found < 0)
                    found = l;
                else
                    unite(found, l);
            }
            if (found < 0) {
                found = static_cast<int>(parent.size());
                parent.push_back(found);
            }
            label[i] = found;
        }
    }
    // compress to dense labels
    std::vector<int> dense(parent.size(), -1);
    num_labels = 0;
    for (size_t i = 0; i < label.size(); ++i) {
        if (label[i] < 0) continue;
        int root = find(label[i]);
        if (dense[root] < 0) dense[root] = num_labels++;
        label[i] = dense[root];
    }
    return label;
}

} // namespace

PatchBank extract_impurity_regions(const std::vector<const ImageU8*>& images,
                                   const std::vector<const Heatmap*>& masks,
                                   const std::vector<std::string>& source_ids, int min_area,
                                   uint64_t seed) {
    check(images.size() == masks.size() && images.size() == source_ids.size(),
          "extract_impurity_regions: input size mismatch");
    PatchBank bank;
    bank.rng_seed = seed;
    for (size_t s = 0; s < images.size(); ++s) {
        const ImageU8& img = *images[s];
        const Heatmap& mask = *masks[s];
        check(img.height == mask.height && img.width == mask.width,
              "extract_impurity_regions: image/mask size mismatch");
        int num = 0;
        std::vector<int> label = label_components(mask, num);
        if (num == 0) continue;

        struct Box {
            int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1;
            int area = 0;
        };
        std::vector<Box> boxes(num);
        for (int y = 0; y < mask.height; ++y) {
            for (int x = 0; x < mask.width; ++x) {
                int l = label[static_cast<size_t>(y) * mask.width + x];
                if (l < 0) continue;
                Box& b = boxes[l];
                b.x0 = std::min(b.x0, x);
                b.y0 = std::min(b.y0, y);
                b.x1 = std::max(b.x1, x);
                b.y1 = std::max(b.y1, y);
                b.area++;
            }
        }
        for (int l = 0; l < num; ++l) {
            const Box& b = boxes[l];
            if (b.area < min_area) continue;
            ImpurityPatch p;
            p.height = b.y1 - b.y0 + 1;
            p.width = b.x1 - b.x0 + 1;
            p.bbox_x = b.x0;
            p.bbox_y = b.y0;
            p.source_id = source_ids[s];
            p.pixels.assign(static_cast<size_t>(p.height) * p.width * 3, 0);
            p.coverage.assign(static_cast<size_t>(p.height) * p.width, 0);
            for (int y = b.y0; y <= b.y1; ++y) {
                for (int x = b.x0; x <= b.x1; ++x) {
                    if (label[static_cast<size_t>(y) * mask.width + x] != l) continue;
                    size_t d = static_cast<size_t>(y - b.y0) * p.width + (x - b.x0);
                    p.coverage[d] = 1;
                    const uint8_t* src = img.px(y, x);
                    p.pixels[d * 3 + 0] = src[0];
                    p.pixels[d * 3 + 1] = src[1];
                    p.pixels[d * 3 + 2] = src[2];
                }
            }
            bank.patches.push_back(std::move(p));
        }
    }
    return bank;
}

ImpurityPatch rotate_patch(const ImpurityPatch& patch, double angle) {
    double c = std::cos(angle), s = std::sin(angle);
    double cx = (patch.width - 1) / 2.0, cy = (patch.height - 1) / 2.0;
    // rotated bbox
    double ex = std::abs(c) * patch.width + std::abs(s) * patch.height;
    double ey = std::abs(s) * patch.width + std::abs(c) * patch.height;
    int rw = std::max(1, static_cast<int>(std::ceil(ex)));
    int rh = std::max(1, static_cast<int>(std::ceil(ey)));

    ImpurityPatch out;
    out.height = rh;
    out.width = rw;
    out.source_id = patch.source_id;
    out.bbox_x = patch.bbox_x;
    out.bbox_y = patch.bbox_y;
    out.pixels.assign(static_cast<size_t>(rh) * rw * 3, 0);
    out.coverage.assign(static_cast<size_t>(rh) * rw, 0);

    double ox = (rw - 1) / 2.0, oy = (rh - 1) / 2.0;
    for (int y = 0; y < rh; ++y) {
        for (int x = 0; x < rw; ++x) {
            // inverse rotation back into the source patch
            double dx = x - ox, dy = y - oy;
            int sx = static_cast<int>(std::lround(c * dx + s * dy + cx));
            int sy = static_cast<int>(std::lround(-s * dx + c * dy + cy));
            if (sx < 0 || sy < 0 || sx >= patch.width || sy >= patch.height) continue;
            size_t si = static_cast<size_t>(sy) * patch.width + sx;
            if (!patch.coverage[si]) continue;
            size_t di = static_cast<size_t>(y) * rw + x;
            out.coverage[di] = 1;
            for (int ch = 0; ch < 3; ++ch) out.pixels[di * 3 + ch] = patch.pixels[si * 3 + ch];
        }
    }
    return out;
}

PasteResult paste_impurities(ImageU8& image, Heatmap& mask, const PatchBank& bank, int k,
                             uint64_t seed, int max_tries) {
    check(!bank.empty(), "paste_impurities: empty patch bank");
    check(k >= 0, "paste_impurities: k must be >= 0");
    check(image.height == mask.height && image.width == mask.width,
          "paste_impurities: image/mask size mismatch");
    Rng rng(hash_combine(bank.rng_seed, seed));
    PasteResult result;
    result.requested = k;
    for (int i = 0; i < k; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < max_tries && !placed; ++attempt) {
            const ImpurityPatch& src =
                bank.patches[rng.uniform_int(static_cast<uint64_t>(bank.size()))];
            ImpurityPatch rot = rotate_patch(src, rng.uniform(0.0, 6.283185307179586));
            if (rot.height > image.height || rot.width > image.width) continue;
            // anchor = coverage centroid; the whole patch must stay in frame
            double sx = 0.0, sy = 0.0, sc = 0.0;
            for (int y = 0; y < rot.height; ++y)
                for (int x = 0; x < rot.width; ++x)
                    if (rot.coverage[static_cast<size_t>(y) * rot.width + x]) {
                        sx += x;
                        sy += y;
                        sc += 1.0;
                    }
            if (sc == 0.0) continue; // aliasing ate the patch
            int acx = std::clamp(static_cast<int>(std::lround(sx / sc)), 0, rot.width - 1);
            int acy = std::clamp(static_cast<int>(std::lround(sy / sc)), 0, rot.height - 1);
            int x0 = rng.uniform_int(0, image.width - rot.width);
            int y0 = rng.uniform_int(0, image.height - rot.height);
            if (mask.at(y0 + acy, x0 + acx) != 0) continue; // anchor must sit on copper
            for (int y = 0; y < rot.height; ++y) {
                for (int x = 0; x < rot.width; ++x) {
                    size_t si = static_cast<size_t>(y) * rot.width + x;
                    if (!rot.coverage[si]) continue;
                    uint8_t* dst = image.px(y0 + y, x0 + x);
                    dst[0] = rot.pixels[si * 3 + 0];
                    dst[1] = rot.pixels[si * 3 + 1];
                    dst[2] = rot.pixels[si * 3 + 2];
                    mask.at(y0 + y, x0 + x) = 1;
                }
            }
            placed = true;
        }
        if (placed) result.applied++;
    }
    return result;
}

void flip_horizontal(ImageU8& image, Heatmap& mask) {
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width / 2; ++x) {
            int mx = image.width - 1 - x;
            for (int c = 0; c < 3; ++c) std::swap(image.px(y, x)[c], image.px(y, mx)[c]);
            std::swap(mask.at(y, x), mask.at(y, mx));
        }
    }
}

void flip_vertical(ImageU8& image, Heatmap& mask) {
    for (int y = 0; y < image.height / 2; ++y) {
        int my = image.height - 1 - y;
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) std::swap(image.px(y, x)[c], image.px(my, x)[c]);
            std::swap(mask.at(y, x), mask.at(my, x));
        }
    }
}

void rotate_quarter(ImageU8& image, Heatmap& mask, int quarter_turns) {
    int q = ((quarter_turns % 4) + 4) % 4;
    for (int r = 0; r < q; ++r) {
        // 90 degrees clockwise; square frames only (generator emits squares)
        check(image.height == image.width, "rotate_quarter: non-square frame");
        ImageU8 img2(image.height, image.width);
        Heatmap m2(mask.height, mask.width);
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                int ny = x, nx = image.height - 1 - y;
                std::copy_n(image.px(y, x), 3, img2.px(ny, nx));
                m2.at(ny, nx) = mask.at(y, x);
            }
        }
        image = std::move(img2);
        mask = std::move(m2);
    }
}

void translate_wrap(ImageU8& image, Heatmap& mask, int dx, int dy) {
    const int h = image.height, w = image.width;
    dx = ((dx % w) + w) % w;
    dy = ((dy % h) + h) % h;
    if (dx == 0 && dy == 0) return;
    ImageU8 img2(h, w);
    Heatmap m2(h, w);
    for (int y = 0; y < h; ++y) {
        int ny = (y + dy) % h;
        for (int x = 0; x < w; ++x) {
            int nx = (x + dx) % w;
            std::copy_n(image.px(y, x), 3, img2.px(ny, nx));
            m2.at(ny, nx) = mask.at(y, x);
        }
    }
    image = std::move(img2);
    mask = std::move(m2);
}

void standard_augment(ImageU8& image, Heatmap& mask, const StandardAugmentOptions& ops,
                      uint64_t seed) {
    Rng rng(seed);
    if (ops.flip) {
        if (rng.bernoulli(0.5)) flip_horizontal(image, mask);
        if (rng.bernoulli(0.5)) flip_vertical(image, mask);
    }
    if (ops.rotate) rotate_quarter(image, mask, static_cast<int>(rng.uniform_int(4)));
    if (ops.translate)
        translate_wrap(image, mask, static_cast<int>(rng.uniform_int(image.width)),
                       static_cast<int>(rng.uniform_int(image.height)));
}

void save_patch_bank(const std::string& dir, const PatchBank& bank) {
    fs::create_directories(dir);
    json index;
    index["rng_seed"] = bank.rng_seed;
    index["patches"] = json::array();
    for (size_t i = 0; i < bank.patches.size(); ++i) {
        const ImpurityPatch& p = bank.patches[i];
        std::string stem = "patch_" + std::to_string(i);
        ImageU8 img(p.height, p.width);
        img.data = p.pixels;
        write_png_rgb(dir + "/" + stem + "_pixels.png", img);
        std::vector<uint8_t> cov(p.coverage.size());
        for (size_t j = 0; j < cov.size(); ++j) cov[j] = p.coverage[j] ? 255 : 0;
        write_png_gray(dir + "/" + stem + "_coverage.png", p.height, p.width, cov);
        index["patches"].push_back({{"stem", stem},
                                    {"source_id", p.source_id},
                                    {"bbox_x", p.bbox_x},
                                    {"bbox_y", p.bbox_y}});
    }
    std::ofstream out(dir + "/index.json");
    out << index.dump(2) << "\n";
}

PatchBank load_patch_bank(const std::string& dir) {
    std::ifstream in(dir + "/index.json");
    check(in.good(), "load_patch_bank: missing index.json in " + dir);
    json index = json::parse(in);
    PatchBank bank;
    bank.rng_seed = index.at("rng_seed").get<uint64_t>();
    for (const json& e : index.at("patches")) {
        std::string stem = e.at("stem").get<std::string>();
        ImageU8 img = read_png_rgb(dir + "/" + stem + "_pixels.png");
        int h = 0, w = 0;
        std::vector<uint8_t> cov = read_png_gray(dir + "/" + stem + "_coverage.png", h, w);
        check(h == img.height && w == img.width, "load_patch_bank: size mismatch for " + stem);
        ImpurityPatch p;
        p.height = h;
        p.width = w;
        p.pixels = img.data;
        p.coverage.resize(cov.size());
        for (size_t j = 0; j < cov.size(); ++j) p.coverage[j] = cov[j] ? 1 : 0;
        p.source_id = e.at("source_id").get<std::string>();
        p.bbox_x = e.at("bbox_x").get<int>();
        p.bbox_y = e.at("bbox_y").get<int>();
        bank.patches.push_back(std::move(p));
    }
    return bank;
}

} // namespace cugr
