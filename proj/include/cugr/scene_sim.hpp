#pragma once

#include "cugr/heatmap.hpp"
#include "cugr/image.hpp"
#include "cugr/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cugr {

// Mean color plus per-channel jitter half-range for rendering.
struct ColorModel {
    std::array<int, 3> mean{128, 128, 128};
    std::array<int, 3> jitter{16, 16, 16};
};

struct MaterialSpec {
    std::string name;
    double density = 1.0; // g/cm^3
    bool is_copper = false;
    ColorModel color;
};

struct Vec2 {
    double x = 0.0, y = 0.0;
};

// Simple star-shaped polygon around the origin, pixel units.
struct Polygon {
    std::vector<Vec2> v;
    double area() const; // shoelace, always positive for our windings
};

struct Granule {
    int material = 0;   // index into the population's palette
    Polygon footprint;  // centered at origin
    double thickness = 1.0;

    double volume() const { return footprint.area() * thickness; }
};

// The physical description of one granule sample; the source of all ground
// truth. Re-rendered (stirred) any number of times without mutation.
struct SamplePopulation {
    std::string sample_id;
    std::vector<MaterialSpec> palette;
    std::vector<Granule> granules;
    double total_mass = 0.0;   // grams, derived
    double total_volume = 0.0; // cm^3, derived
    uint64_t rng_seed = 0;
    int image_size = 128;
    int n_stirs = 16;
    double shade_lo = 0.80; // per-stir brightness factor range for rendering
    double shade_hi = 1.15;
};

struct GranulePlacement {
    double tx = 0.0, ty = 0.0; // translation of the footprint origin
    double angle = 0.0;        // rotation, radians
    double shade = 1.0;        // per-stir brightness factor
};

// One rendered layout of a population. `layout` and `paint_order` describe
// the placement exactly (paint_order is bottom to top), so ground truth can
// be re-derived geometrically.
struct StirredScene {
    ImageU8 image;
    Heatmap mask; // 0 copper, 1 impurity
    int stir_index = 0;
    std::vector<GranulePlacement> layout; // index-aligned with granules
    std::vector<int> paint_order;
};

struct GeneratorConfig {
    int image_size = 128;
    int n_stirs = 16;
    int num_samples = 66;

    // Target mass-purity range for one population draw.
    double purity_lo = 0.71;
    double purity_hi = 0.98;

    // Dataset generation draws each sample's target purity near its group's
    // target (industrial lots come in grade bands). Empty -> uniform draw
    // from [purity_lo, purity_hi] instead.
    std::vector<double> group_targets;
    double group_jitter = 0.004;

    int granule_count_lo = 340;
    int granule_count_hi = 400;
    double copper_radius_lo = 5.0;
    double copper_radius_hi = 11.0;
    double impurity_radius_lo = 4.5;
    double impurity_radius_hi = 9.0;
    double thickness_lo = 0.5;
    double thickness_hi = 2.0;
    double shade_lo = 0.80;
    double shade_hi = 1.15;

    std::vector<MaterialSpec> palette; // empty -> default_palette()
    std::array<int, 3> split_group_ratio{8, 2, 1};
    uint64_t seed = 20260801;

    void validate() const;
};

// Copper plus six impurity materials with densities spanning [0.9, 8.0]
// and distinct color models.
std::vector<MaterialSpec> default_palette();

// Eleven grade-band targets spread over [0.73, 0.975], placed away from the
// default ladder thresholds and the 5-level equal-width boundaries.
std::vector<double> default_group_targets();

// Draw one population hitting a target mass purity inside the configured
// range exactly (impurity footprints are scaled to land on the target).
// Deterministic for fixed (config, seed).
SamplePopulation sample_population(const GeneratorConfig& config, uint64_t seed);

// Re-layout the same granules: new positions, rotations and occlusion order;
// the frame is fully covered and the mask matches rendered materials
// pixel-for-pixel.
StirredScene stir_and_render(const SamplePopulation& pop, int stir_index);

// Mass purity per the subtraction form: P = (m - sum_i rho_i * p_i^v * V)/m,
// summed over the impurity kinds present, from exact per-granule volumes.
double true_mass_purity(const SamplePopulation& pop);

// The direct ratio (copper mass)/(total mass); algebraically identical to
// true_mass_purity and kept as the second route of the dual check.
double copper_mass_ratio(const SamplePopulation& pop);

// Fraction of copper pixels in the scene's mask.
double true_area_purity(const StirredScene& scene);

// Per-material volume fractions, copper included.
struct MaterialShare {
    std::string name;
    double density = 0.0;
    double volume_fraction = 0.0;
};
std::vector<MaterialShare> material_breakdown(const SamplePopulation& pop);

} // namespace cugr
