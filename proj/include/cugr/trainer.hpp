#pragma once

#include "cugr/augment.hpp"
#include "cugr/dataset.hpp"
#include "cugr/purity_net.hpp"
#include "cugr/seg_net.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cugr {

struct PhaseConfig {
    int epochs = 0;
    double lr = 0.01;
    double momentum = 0.9;
};

struct AugmentSettings {
    bool standard = true;
    bool cutpaste = true;
    double cutpaste_prob = 0.5;
    int k_min = 1;
    int k_max = 4;
    int min_patch_area = 16;
    int max_place_tries = 40;
};

// Single source of all training hyperparameters; its digest is embedded in
// every checkpoint and report.
struct TrainConfig {
    uint64_t seed = 7;
    bool deterministic = true; // zeroes wall-clock fields so records reproduce
    int batch_size = 8;        // phase-1 images per step
    int purity_batch = 4;      // phase-2/3 samples per step
    PhaseConfig phase1{12, 0.02, 0.9};
    PhaseConfig phase2{20, 0.05, 0.9};
    PhaseConfig phase3{30, 0.05, 0.9};
    double alpha = 0.5; // Loss3 mass/focal weight
    double gamma = 2.0; // focal exponent
    bool fuse_seg_features = false;
    bool teacher_forcing = false; // feed ground-truth masks to the purity net
    AugmentSettings augment;
    double divergence_factor = 10.0;
    int divergence_patience = 3;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
std::string train_config_digest(const TrainConfig& cfg);

// Append-only per-epoch log; one JSON object per epoch, written to
// record.jsonl next to the phase checkpoints.
struct TrainRecord {
    std::vector<nlohmann::json> epochs;

    void append(const nlohmann::json& e) { epochs.push_back(e); }
    bool empty() const { return epochs.empty(); }
};

struct TrainData {
    std::vector<LoadedSample> train;
    std::vector<LoadedSample> val;
    int n = 0;
    int image_size = 0;
    int num_levels = 0;
};

TrainData load_train_data(const std::string& root, const DatasetManifest& manifest);

// true iff the component's parameters are bit-identical to the digest taken
// before the phase.
bool verify_frozen(const std::vector<nn::Param*>& component, const std::string& before_digest);
inline bool verify_frozen(const std::string& before_digest, const std::string& after_digest) {
    return before_digest == after_digest;
}

struct Phase1Result {
    SegModel model;
    TrainRecord record;
    double final_val_miou = 0.0;
};

struct PhaseOptions {
    std::string ckpt_dir; // empty: no checkpoints written
    bool resume = false;  // continue from the latest epoch checkpoint
};

// Phase 1: segmentation network alone, Loss1, standard + cut-paste
// augmentation. Returns the model frozen.
Phase1Result train_phase1(const TrainData& data, const TrainConfig& cfg,
                          const PhaseOptions& opts = {});

struct PurityPhaseResult {
    PurityModel model;
    TrainRecord record;
    double final_val_area_mae = 0.0;
    double final_val_mass_mae = 0.0;
    double final_val_level_accuracy = 0.0;
};

// Phase 2: area branch only, Loss2, segmentation frozen. The purity network
// consumes heatmaps from the frozen model (or ground truth under
// teacher_forcing).
PurityPhaseResult train_phase2(SegModel& seg, const TrainData& data, const TrainConfig& cfg,
                               const PhaseOptions& opts = {});

// Phase 3: mass + rank branches jointly, Loss3; segmentation and area
// branch frozen.
PurityPhaseResult train_phase3(SegModel& seg, PurityModel purity, const TrainData& data,
                               const TrainConfig& cfg, const PhaseOptions& opts = {});

// Heatmaps (and optionally the mean feature grid) for one sample's images
// through a segmentation model; the shared inference path of training and
// rating.
struct SegSampleResult {
    std::vector<Heatmap> heatmaps;
    nn::Tensor mean_features; // {features,H,W} when requested, else empty
};
SegSampleResult run_seg_over_images(SegModel& seg, const std::vector<ImageU8>& images,
                                    bool want_features);

} // namespace cugr
