#pragma once

#include "cugr/heatmap.hpp"
#include "cugr/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cugr {

// One connected impurity region cut from a source image. Every covered
// pixel was labeled impurity in the source mask.
struct ImpurityPatch {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> pixels;   // height*width*3, RGB
    std::vector<uint8_t> coverage; // height*width, 0/1
    std::string source_id;
    int bbox_x = 0, bbox_y = 0; // original top-left in the source image

    size_t area() const {
        size_t a = 0;
        for (uint8_t c : coverage) a += c;
        return a;
    }
};

struct PatchBank {
    std::vector<ImpurityPatch> patches;
    uint64_t rng_seed = 0;

    bool empty() const { return patches.empty(); }
    size_t size() const { return patches.size(); }
};

// One patch per 8-connected impurity component with at least min_area
// pixels; patch pixels are copied verbatim from the source images.
// Returns an empty bank when the split contains no impurities.
PatchBank extract_impurity_regions(const std::vector<const ImageU8*>& images,
                                   const std::vector<const Heatmap*>& masks,
                                   const std::vector<std::string>& source_ids, int min_area,
                                   uint64_t seed);

// Patch rotated by `angle` (radians) around its centroid, nearest-neighbor.
ImpurityPatch rotate_patch(const ImpurityPatch& patch, double angle);

struct PasteResult {
    int requested = 0;
    int applied = 0;
};

// Select k patches with replacement, rotate each by a random angle, and
// paste where the patch centroid lands on a copper pixel and the patch fits
// inside the frame. Pasted pixels flip the mask to impurity; everything
// else is untouched. Placement retries are bounded; fewer than k pastes are
// reported via the result.
PasteResult paste_impurities(ImageU8& image, Heatmap& mask, const PatchBank& bank, int k,
                             uint64_t seed, int max_tries = 40);

// Joint image/mask transforms that preserve full frame coverage: flips,
// quarter-turn rotations and wrap-around translation are all pixel
// permutations, so the mask stays binary and area purity is unchanged.
void flip_horizontal(ImageU8& image, Heatmap& mask);
void flip_vertical(ImageU8& image, Heatmap& mask);
void rotate_quarter(ImageU8& image, Heatmap& mask, int quarter_turns);
void translate_wrap(ImageU8& image, Heatmap& mask, int dx, int dy);

struct StandardAugmentOptions {
    bool flip = true;
    bool rotate = true;
    bool translate = true;
};

// Random selection of the enabled transforms, deterministic in the seed.
void standard_augment(ImageU8& image, Heatmap& mask, const StandardAugmentOptions& ops,
                      uint64_t seed);

// Optional on-disk bank: pixels/coverage PNG pairs plus an index.json.
void save_patch_bank(const std::string& dir, const PatchBank& bank);
PatchBank load_patch_bank(const std::string& dir);

} // namespace cugr
