#include "cugr/scene_sim.hpp"

#include "cugr/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cugr {

namespace {

constexpr double kTau = 6.283185307179586;

// rng substream tags
constexpr uint64_t kTagStir = 0x5717a9;
constexpr uint64_t kTagColor = 0xc0103;

std::vector<Vec2> transform_polygon(const Polygon& poly, const GranulePlacement& pl) {
    std::vector<Vec2> out(poly.v.size());
    double c = std::cos(pl.angle), s = std::sin(pl.angle);
    for (size_t i = 0; i < poly.v.size(); ++i) {
        const Vec2& p = poly.v[i];
        out[i] = {p.x * c - p.y * s + pl.tx, p.x * s + p.y * c + pl.ty};
    }
    return out;
}

// Scanline fill over pixel centers, clipped to the frame. Half-open span
// rule, so abutting polygons never double-cover a pixel.
template <typename Fn>
void rasterize(const std::vector<Vec2>& poly, int height, int width, Fn&& fn) {
    double miny = std::numeric_limits<double>::infinity(), maxy = -miny;
    for (const Vec2& p : poly) {
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    int y1 = std::min(height - 1, static_cast<int>(std::floor(maxy - 0.5)));
    std::vector<double> xs;
    for (int y = y0; y <= y1; ++y) {
        double yc = y + 0.5;
        xs.clear();
        for (size_t i = 0; i < poly.size(); ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % poly.size()];
            if ((a.y <= yc && b.y > yc) || (b.y <= yc && a.y > yc))
                xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (size_t i = 0; i + 1 < xs.size(); i += 2) {
            int x0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
            int x1 = std::min(width - 1, static_cast<int>(std::ceil(xs[i + 1] - 0.5)) - 1);
            for (int x = x0; x <= x1; ++x) fn(y, x);
        }
    }
}

Polygon make_footprint(Rng& rng, double radius_lo, double radius_hi) {
    int k = rng.uniform_int(5, 10);
    double r_base = rng.uniform(radius_lo, radius_hi);
    Polygon poly;
    poly.v.resize(k);
    for (int i = 0; i < k; ++i) {
        // jittered regular spacing keeps the polygon simple and star-shaped
        double phi = (kTau / k) * (i + 0.35 * (2.0 * rng.uniform() - 1.0));
        double r = r_base * rng.uniform(0.65, 1.35);
        poly.v[i] = {r * std::cos(phi), r * std::sin(phi)};
    }
    return poly;
}

void scale_polygon(Polygon& poly, double factor) {
    for (Vec2& p : poly.v) {
        p.x *= factor;
        p.y *= factor;
    }
}

int copper_index(const std::vector<MaterialSpec>& palette) {
    int idx = -1;
    for (size_t i = 0; i < palette.size(); ++i) {
        if (palette[i].is_copper) {
            check(idx < 0, "palette: more than one copper material");
            idx = static_cast<int>(i);
        }
    }
    check(idx >= 0, "palette: no copper material");
    return idx;
}

} // namespace

double Polygon::area() const {
    double acc = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % v.size()];
        acc += a.x * b.y - b.x * a.y;
    }
    return std::abs(acc) * 0.5;
}

std::vector<MaterialSpec> default_palette() {
    auto mat = [](const char* name, double density, bool copper, std::array<int, 3> mean,
                  std::array<int, 3> jitter) {
        MaterialSpec m;
        m.name = name;
        m.density = density;
        m.is_copper = copper;
        m.color.mean = mean;
        m.color.jitter = jitter;
        return m;
    };
    return {
        mat("copper", 8.96, true, {184, 115, 51}, {26, 22, 18}),
        mat("plastic_green", 0.95, false, {58, 142, 70}, {22, 24, 20}),
        mat("rubber_black", 1.20, false, {40, 38, 42}, {14, 14, 14}),
        mat("brick_red", 1.90, false, {166, 86, 62}, {20, 18, 16}),
        mat("stone_gray", 2.60, false, {150, 150, 148}, {24, 24, 24}),
        mat("aluminum_silver", 2.70, false, {206, 208, 212}, {18, 18, 18}),
        mat("steel_dark", 7.80, false, {96, 102, 112}, {16, 16, 16}),
    };
}

std::vector<double> default_group_targets() {
    // Group order follows the 8/2/1 split: eight training grades covering
    // all seven levels, two validation grades, one test grade.
    return {0.975, 0.945, 0.905, 0.875, 0.845, 0.815, 0.778, 0.725, 0.910, 0.716, 0.920};
}

void GeneratorConfig::validate() const {
    check(image_size >= 16, "generator: image_size must be >= 16");
    check(n_stirs >= 1, "generator: n_stirs must be >= 1");
    check(num_samples >= 1, "generator: num_samples must be >= 1");
    check(purity_lo > 0.0 && purity_hi <= 1.0 && purity_lo <= purity_hi,
          "generator: purity range must lie within (0, 1]");
    for (double t : group_targets)
        check(t > 0.0 && t <= 1.0, "generator: group target outside (0, 1]");
    check(granule_count_lo >= 4 && granule_count_hi >= granule_count_lo,
          "generator: bad granule count range");
    check(copper_radius_lo >= 2.0 && copper_radius_hi >= copper_radius_lo,
          "generator: bad copper radius range");
    check(impurity_radius_lo >= 2.0 && impurity_radius_hi >= impurity_radius_lo,
          "generator: bad impurity radius range");
    check(thickness_lo > 0.0 && thickness_hi >= thickness_lo,
          "generator: bad thickness range");
    check(shade_lo > 0.0 && shade_hi >= shade_lo, "generator: bad shade range");
    check(split_group_ratio[0] >= 1 && split_group_ratio[1] >= 1 && split_group_ratio[2] >= 1,
          "generator: split ratio parts must be >= 1");
    const std::vector<MaterialSpec>& pal = palette.empty() ? default_palette() : palette;
    check(!pal.empty(), "generator: empty palette");
    copper_index(pal);
    for (const MaterialSpec& m : pal)
        check(m.density > 0.0, "generator: material density must be positive");
}

SamplePopulation sample_population(const GeneratorConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);

    SamplePopulation pop;
    pop.sample_id = "pop_" + std::to_string(seed);
    pop.rng_seed = seed;
    pop.image_size = config.image_size;
    pop.n_stirs = config.n_stirs;
    pop.palette = config.palette.empty() ? default_palette() : config.palette;
    pop.shade_lo = config.shade_lo;
    pop.shade_hi = config.shade_hi;
    const int cu = copper_index(pop.palette);
    const double rho_cu = pop.palette[cu].density;

    int count = rng.uniform_int(config.granule_count_lo, config.granule_count_hi);
    double target_purity = rng.uniform(config.purity_lo, config.purity_hi);
    double thickness = rng.uniform(config.thickness_lo, config.thickness_hi);

    pop.granules.resize(count);
    double copper_area = 0.0;
    for (Granule& g : pop.granules) {
        g.material = cu;
        g.footprint = make_footprint(rng, config.copper_radius_lo, config.copper_radius_hi);
        g.thickness = thickness;
        copper_area += g.footprint.area();
    }

    // Convert granules to impurities until the density-weighted impurity
    // area reaches what the target purity requires, then scale the impurity
    // footprints to land on the target exactly.
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<int> impurity_mats;
    for (size_t i = 0; i < pop.palette.size(); ++i)
        if (static_cast<int>(i) != cu) impurity_mats.push_back(static_cast<int>(i));

    std::vector<int> rotation; // balanced composition: block-shuffled materials
    size_t rotation_pos = 0;
    auto next_material = [&]() {
        if (rotation_pos == rotation.size()) {
            rotation = impurity_mats;
            rng.shuffle(rotation);
            rotation_pos = 0;
        }
        return rotation[rotation_pos++];
    };

    double weighted_impurity_area = 0.0; // sum of rho_i * area_i
    std::vector<int> converted;
    const int max_impurities =
        impurity_mats.empty() ? 0 : static_cast<int>(0.75 * count);
    auto required = [&]() { return rho_cu * copper_area * (1.0 - target_purity) / target_purity; };

    for (int idx : order) {
        if (target_purity >= 1.0 || weighted_impurity_area >= required()) break;
        if (static_cast<int>(converted.size()) >= max_impurities) break;
        Granule& g = pop.granules[idx];
        copper_area -= g.footprint.area();
        g.material = next_material();
        g.footprint = make_footprint(rng, config.impurity_radius_lo, config.impurity_radius_hi);
        weighted_impurity_area += pop.palette[g.material].density * g.footprint.area();
        converted.push_back(idx);
    }

    if (target_purity < 1.0) {
        check(weighted_impurity_area > 0.0,
              "sample_population: no impurity capacity for target purity");
        double scale = std::sqrt(required() / weighted_impurity_area);
        check(scale <= 3.0,
              "sample_population: purity target unreachable with configured granule geometry");
        for (int idx : converted) scale_polygon(pop.granules[idx].footprint, scale);
    }

    pop.total_volume = 0.0;
    pop.total_mass = 0.0;
    for (const Granule& g : pop.granules) {
        pop.total_volume += g.volume();
        pop.total_mass += pop.palette[g.material].density * g.volume();
    }
    return pop;
}

StirredScene stir_and_render(const SamplePopulation& pop, int stir_index) {
    check(!pop.granules.empty(), "stir_and_render: empty population");
    check(stir_index >= 0 && stir_index < pop.n_stirs,
          "stir_and_render: stir_index out of [0, n)");
    const int size = pop.image_size;
    const int count = static_cast<int>(pop.granules.size());
    Rng rng = Rng(pop.rng_seed).derive(kTagStir, static_cast<uint64_t>(stir_index));

    StirredScene scene;
    scene.stir_index = stir_index;
    scene.layout.resize(count);
    for (GranulePlacement& pl : scene.layout) {
        pl.tx = rng.uniform(0.0, size);
        pl.ty = rng.uniform(0.0, size);
        pl.angle = rng.uniform(0.0, kTau);
        pl.shade = rng.uniform(pop.shade_lo, pop.shade_hi);
    }

    std::vector<int> initial_order(count);
    std::iota(initial_order.begin(), initial_order.end(), 0);
    rng.shuffle(initial_order);

    std::vector<int> owner(static_cast<size_t>(size) * size, -1);
    std::vector<int> visible(count, 0);
    auto paint = [&](int g) {
        rasterize(transform_polygon(pop.granules[g].footprint, scene.layout[g]), size, size,
                  [&](int y, int x) {
                      size_t i = static_cast<size_t>(y) * size + x;
                      if (owner[i] >= 0) visible[owner[i]]--;
                      owner[i] = g;
                      visible[g]++;
                  });
    };
    for (int g : initial_order) paint(g);

    // Coverage repair: fully occluded granules are relocated (bottom of the
    // stack) onto uncovered pixels. Moving a hidden granule changes nothing
    // else, so repair only ever adds coverage.
    std::vector<int> hidden;
    for (int g = 0; g < count; ++g)
        if (visible[g] == 0) hidden.push_back(g);
    std::sort(hidden.begin(), hidden.end(), [&](int a, int b) {
        double aa = pop.granules[a].footprint.area(), ab = pop.granules[b].footprint.area();
        return aa != ab ? aa < ab : a < b;
    });

    std::vector<int> repairs;
    size_t hidden_next = 0;
    for (size_t i = 0; i < owner.size(); ++i) {
        if (owner[i] >= 0) continue;
        check(hidden_next < hidden.size(),
              "stir_and_render: frame coverage repair exhausted; increase granule count");
        int g = hidden[hidden_next++];
        scene.layout[g].tx = static_cast<double>(i % size) + 0.5;
        scene.layout[g].ty = static_cast<double>(i / size) + 0.5;
        rasterize(transform_polygon(pop.granules[g].footprint, scene.layout[g]), size, size,
                  [&](int y, int x) {
                      size_t j = static_cast<size_t>(y) * size + x;
                      if (owner[j] < 0) owner[j] = g;
                  });
        repairs.push_back(g);
        check(owner[i] == g, "stir_and_render: repair failed to cover target pixel");
    }

    // Bottom-to-top paint order consistent with the final owner map: later
    // repairs sit lowest, untouched granules keep their shuffled order.
    scene.paint_order.assign(repairs.rbegin(), repairs.rend());
    std::vector<char> repaired(count, 0);
    for (int g : repairs) repaired[g] = 1;
    for (int g : initial_order)
        if (!repaired[g]) scene.paint_order.push_back(g);

    scene.image = ImageU8(size, size);
    scene.mask = Heatmap(size, size);
    Rng color_rng = rng.derive(kTagColor);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            size_t i = static_cast<size_t>(y) * size + x;
            const Granule& g = pop.granules[owner[i]];
            const MaterialSpec& mat = pop.palette[g.material];
            double shade = scene.layout[owner[i]].shade;
            uint8_t* px = scene.image.px(y, x);
            for (int c = 0; c < 3; ++c) {
                int jit = mat.color.jitter[c] > 0
                              ? static_cast<int>(color_rng.uniform_int(
                                    static_cast<uint64_t>(2 * mat.color.jitter[c] + 1))) -
                                    mat.color.jitter[c]
                              : 0;
                int val = static_cast<int>(std::lround(mat.color.mean[c] * shade)) + jit;
                px[c] = static_cast<uint8_t>(std::clamp(val, 0, 255));
            }
            scene.mask.labels[i] = mat.is_copper ? 0 : 1;
        }
    }
    return scene;
}

double true_mass_purity(const SamplePopulation& pop) {
    check(!pop.granules.empty(), "true_mass_purity: empty population");
    double total_volume = 0.0, total_mass = 0.0;
    std::map<int, double> impurity_volume; // material index -> summed volume
    for (const Granule& g : pop.granules) {
        double v = g.volume();
        total_volume += v;
        total_mass += pop.palette[g.material].density * v;
        if (!pop.palette[g.material].is_copper) impurity_volume[g.material] += v;
    }
    double removed = 0.0;
    for (const auto& [mat, vol] : impurity_volume) {
        double volume_proportion = vol / total_volume;
        removed += pop.palette[mat].density * volume_proportion * total_volume;
    }
    double copper_mass = total_mass - removed;
    return copper_mass / total_mass;
}

double copper_mass_ratio(const SamplePopulation& pop) {
    check(!pop.granules.empty(), "copper_mass_ratio: empty population");
    double copper_mass = 0.0, total_mass = 0.0;
    for (const Granule& g : pop.granules) {
        double m = pop.palette[g.material].density * g.volume();
        total_mass += m;
        if (pop.palette[g.material].is_copper) copper_mass += m;
    }
    return copper_mass / total_mass;
}

double true_area_purity(const StirredScene& scene) { return area_purity(scene.mask); }

std::vector<MaterialShare> material_breakdown(const SamplePopulation& pop) {
    std::vector<double> volume(pop.palette.size(), 0.0);
    double total = 0.0;
    for (const Granule& g : pop.granules) {
        volume[g.material] += g.volume();
        total += g.volume();
    }
    std::vector<MaterialShare> shares;
    for (size_t i = 0; i < pop.palette.size(); ++i) {
        if (volume[i] <= 0.0) continue;
        shares.push_back({pop.palette[i].name, pop.palette[i].density, volume[i] / total});
    }
    return shares;
}

} // namespace cugr
