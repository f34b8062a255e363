#pragma once

#include "cugr/dataset.hpp"
#include "cugr/ladder.hpp"
#include "cugr/purity_net.hpp"
#include "cugr/seg_net.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace cugr {

// Model output for one sample. `level` comes from the rank branch (the
// network's own output); `ladder_level` is the ladder applied to the
// predicted mass purity and is recorded for audit.
struct RatingReport {
    std::string sample_id;
    int n = 0;
    std::vector<double> area_purities;
    double mass_purity = 0.0;
    int level = 1;
    int ladder_level = 1;
    std::string model_digest;
    LevelLadder ladder;
    double timing_ms = 0.0;

    nlohmann::json to_json() const;
    static RatingReport from_json(const nlohmann::json& j);
};

// n images -> heatmaps -> purity network -> report.
RatingReport rate_sample(SegModel& seg, PurityModel& purity, const std::vector<ImageU8>& images,
                         const LevelLadder& ladder, const std::string& sample_id = "");

// Threshold baseline: mean analytic area purity of the predicted heatmaps
// stands in for mass purity; the level is the ladder applied to that mean.
RatingReport rate_by_threshold(SegModel& seg, const std::vector<ImageU8>& images,
                               const LevelLadder& ladder, const std::string& sample_id = "");
// Same baseline on given heatmaps (ground-truth passthrough path).
RatingReport rate_by_threshold_from_heatmaps(const std::vector<Heatmap>& heatmaps,
                                             const LevelLadder& ladder,
                                             const std::string& sample_id = "");

// Level-count sweep: for each L, an equal-width ladder over
// [min true purity, 1.0] maps true and predicted purities to levels; the
// fraction of mismatches is reported per L.
std::vector<std::pair<int, double>> error_vs_levels(const std::vector<double>& true_purity,
                                                    const std::vector<double>& pred_purity,
                                                    const std::vector<int>& level_counts);

struct EvalSummary {
    struct CurveRow {
        int index;
        double truth;
        double prediction;
    };
    std::vector<CurveRow> curve; // per image of the eval split, sorted by truth

    struct GroupRow {
        std::string name;
        std::string split;
        double pred_mass = 0.0;
        double true_mass = 0.0;
        int pred_level = 1;
        int true_level = 1;
    };
    std::vector<GroupRow> groups; // per group over train+val (+ test)

    struct SampleRow {
        std::string id;
        std::string split;
        double pred_mass = 0.0;
        double true_mass = 0.0;
        int pred_level = 1; // rank branch
        int true_level = 1;
    };
    std::vector<SampleRow> samples;

    double area_mae = 0.0;          // eval split, per image
    double mass_mae = 0.0;          // eval split, per sample
    double level_exact_match = 0.0; // eval split, rank-branch level
    std::vector<std::pair<int, double>> errors_vs_levels; // eval split
    bool errors_monotone = true; // non-decreasing in L (empirical, flagged if violated)
    double order_sensitivity = 0.0; // max |mass delta| under one image-order shuffle

    std::string split;
    std::string model_digest;
};

struct EvalOptions {
    std::string split = "val";
    bool oracle = false; // ground-truth passthrough instead of the models
    std::vector<int> level_counts = {2, 3, 4, 5, 6, 7, 8, 9, 10};
    // group sizes per split for the group table; 0 = one group per split
    int groups_train = 0, groups_val = 0, groups_test = 0;
};

EvalSummary eval_dataset(SegModel* seg, PurityModel* purity, const std::string& data_root,
                         const DatasetManifest& manifest, const LevelLadder& ladder,
                         const EvalOptions& options);

// CSV/markdown emission of an EvalSummary (curve.csv, groups.csv,
// levels.csv, errors_vs_levels.csv, summary.md).
void write_eval_outputs(const EvalSummary& summary, const std::string& out_dir);

} // namespace cugr
