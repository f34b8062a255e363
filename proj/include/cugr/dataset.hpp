#pragma once

#include "cugr/heatmap.hpp"
#include "cugr/image.hpp"
#include "cugr/ladder.hpp"
#include "cugr/scene_sim.hpp"

#include <string>
#include <vector>

namespace cugr {

// Per-sample ground truth as stored in annotation.json.
struct SampleAnnotation {
    std::vector<double> area_purity; // length n
    double mass_purity = 0.0;
    int rating_level = 1; // 1 = best
    std::vector<MaterialShare> material_breakdown;
};

struct DatasetManifest {
    int format_version = 1;
    int n = 0;
    int image_size = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> val_ids;
    std::vector<std::string> test_ids;
    int num_levels = 0;
    std::vector<double> level_thresholds;
    std::string generator_config_digest;

    std::vector<std::string> split_ids(const std::string& split) const;
    std::vector<std::string> all_ids() const;
};

// Assignment of population indices to splits; must cover every population
// exactly once.
struct SplitAssignment {
    std::vector<int> train, val, test;
    void validate(size_t population_count) const;
};

// Group-wise split: consecutive groups of num_samples/(r0+r1+r2) samples,
// first r0 groups to train, next r1 to val, last r2 to test.
SplitAssignment group_split(int num_samples, const std::array<int, 3>& ratio);

std::string sample_dir(const std::string& root, const std::string& id);
std::string image_path(const std::string& root, const std::string& id, int k, int n);
std::string mask_path(const std::string& root, const std::string& id, int k, int n);

// Write the full on-disk dataset. Fails on an existing non-empty output
// directory unless overwrite is set. Deterministic: the same populations
// always produce byte-identical files.
DatasetManifest export_dataset(const std::vector<SamplePopulation>& populations, int n,
                               const SplitAssignment& splits, const LevelLadder& ladder,
                               const std::string& out_dir,
                               const std::string& generator_config_digest, bool overwrite);

DatasetManifest load_manifest(const std::string& root);
void save_manifest(const std::string& root, const DatasetManifest& m);
SampleAnnotation load_annotation(const std::string& root, const std::string& id);
void save_annotation(const std::string& root, const std::string& id, const SampleAnnotation& a);

// Eagerly loaded dataset sample (images and masks for all n stirs).
struct LoadedSample {
    std::string id;
    std::string split;
    std::vector<ImageU8> images;
    std::vector<Heatmap> masks;
    SampleAnnotation annotation;
};

std::vector<LoadedSample> load_split(const std::string& root, const DatasetManifest& m,
                                     const std::string& split);

} // namespace cugr
