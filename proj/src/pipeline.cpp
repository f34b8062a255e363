#include "cugr/pipeline.hpp"

#include "cugr/checkpoint.hpp"
#include "cugr/common.hpp"
#include "cugr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

using nlohmann::json;

namespace cugr {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void validate_images(const std::vector<ImageU8>& images, int expected_n, int expected_size) {
    check(static_cast<int>(images.size()) == expected_n,
          "rate: got " + std::to_string(images.size()) + " images, the model needs exactly " +
              std::to_string(expected_n));
    for (const ImageU8& img : images)
        check(img.height == expected_size && img.width == expected_size,
              "rate: image size " + std::to_string(img.width) + "x" +
                  std::to_string(img.height) + " does not match the trained size " +
                  std::to_string(expected_size));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "cannot write " + path);
    out.precision(12);
    return out;
}

} // namespace

json RatingReport::to_json() const {
    return json{{"sample_id", sample_id},
                {"n", n},
                {"area_purities", area_purities},
                {"mass_purity", mass_purity},
                {"level", level},
                {"ladder_level", ladder_level},
                {"model_digest", model_digest},
                {"ladder",
                 {{"num_levels", ladder.num_levels}, {"thresholds", ladder.thresholds}}},
                {"timing_ms", timing_ms}};
}

RatingReport RatingReport::from_json(const json& j) {
    RatingReport r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.n = j.at("n").get<int>();
    r.area_purities = j.at("area_purities").get<std::vector<double>>();
    r.mass_purity = j.at("mass_purity").get<double>();
    r.level = j.at("level").get<int>();
    r.ladder_level = j.at("ladder_level").get<int>();
    r.model_digest = j.at("model_digest").get<std::string>();
    r.ladder.num_levels = j.at("ladder").at("num_levels").get<int>();
    r.ladder.thresholds = j.at("ladder").at("thresholds").get<std::vector<double>>();
    r.timing_ms = j.at("timing_ms").get<double>();
    return r;
}

RatingReport rate_sample(SegModel& seg, PurityModel& purity, const std::vector<ImageU8>& images,
                         const LevelLadder& ladder, const std::string& sample_id) {
    const PurityTopology& topo = purity.topology();
    validate_images(images, topo.n, topo.image_size);
    double t0 = now_ms();

    SegSampleResult r = run_seg_over_images(seg, images, topo.fuse_seg_features);
    HeatmapStack stack = stack_heatmaps(r.heatmaps);
    PurityOutput out =
        purity.forward(stack, topo.fuse_seg_features ? &r.mean_features : nullptr);

    RatingReport report;
    report.sample_id = sample_id;
    report.n = topo.n;
    report.area_purities = out.area_purities;
    report.mass_purity = out.mass_purity;
    report.level = out.level;
    report.ladder_level = purity_to_level(out.mass_purity, ladder);
    report.model_digest = params_digest(purity.params());
    report.ladder = ladder;
    report.timing_ms = now_ms() - t0;
    return report;
}

RatingReport rate_by_threshold_from_heatmaps(const std::vector<Heatmap>& heatmaps,
                                             const LevelLadder& ladder,
                                             const std::string& sample_id) {
    check(!heatmaps.empty(), "rate_by_threshold: no heatmaps");
    RatingReport report;
    report.sample_id = sample_id;
    report.n = static_cast<int>(heatmaps.size());
    double mean = 0.0;
    for (const Heatmap& h : heatmaps) {
        double a = area_purity(h);
        report.area_purities.push_back(a);
        mean += a;
    }
    mean /= static_cast<double>(heatmaps.size());
    report.mass_purity = mean;
    report.level = purity_to_level(mean, ladder);
    report.ladder_level = report.level;
    report.model_digest = "threshold-baseline";
    report.ladder = ladder;
    return report;
}

RatingReport rate_by_threshold(SegModel& seg, const std::vector<ImageU8>& images,
                               const LevelLadder& ladder, const std::string& sample_id) {
    check(!images.empty(), "rate_by_threshold: no images");
    double t0 = now_ms();
    SegSampleResult r = run_seg_over_images(seg, images, false);
    RatingReport report = rate_by_threshold_from_heatmaps(r.heatmaps, ladder, sample_id);
    report.timing_ms = now_ms() - t0;
    return report;
}

std::vector<std::pair<int, double>> error_vs_levels(const std::vector<double>& true_purity,
                                                    const std::vector<double>& pred_purity,
                                                    const std::vector<int>& level_counts) {
    check(!true_purity.empty() && true_purity.size() == pred_purity.size(),
          "error_vs_levels: need matching non-empty purity vectors");
    double min_true = *std::min_element(true_purity.begin(), true_purity.end());
    std::vector<std::pair<int, double>> rows;
    for (int L : level_counts) {
        check(L >= 2, "error_vs_levels: level count must be >= 2");
        LevelLadder ladder = equal_width_ladder(L, min_true);
        int mismatches = 0;
        for (size_t i = 0; i < true_purity.size(); ++i)
            if (purity_to_level(true_purity[i], ladder) !=
                purity_to_level(pred_purity[i], ladder))
                ++mismatches;
        rows.push_back({L, static_cast<double>(mismatches) /
                               static_cast<double>(true_purity.size())});
    }
    return rows;
}

EvalSummary eval_dataset(SegModel* seg, PurityModel* purity, const std::string& data_root,
                         const DatasetManifest& manifest, const LevelLadder& ladder,
                         const EvalOptions& options) {
    check(options.oracle || (seg != nullptr && purity != nullptr),
          "eval_dataset: models required unless oracle mode");
    if (!options.oracle)
        check(purity->topology().n == manifest.n,
              "eval_dataset: model n = " + std::to_string(purity->topology().n) +
                  " does not match dataset n = " + std::to_string(manifest.n));

    EvalSummary summary;
    summary.split = options.split;
    summary.model_digest = options.oracle ? "oracle" : params_digest(purity->params());

    struct PerSample {
        std::string id, split;
        double true_mass, pred_mass;
        int true_level, pred_level;
        std::vector<double> true_area, pred_area;
    };
    std::vector<PerSample> rows;

    auto eval_split = [&](const std::string& split) {
        for (const std::string& id : manifest.split_ids(split)) {
            LoadedSample s;
            s.annotation = load_annotation(data_root, id);
            PerSample row;
            row.id = id;
            row.split = split;
            row.true_mass = s.annotation.mass_purity;
            row.true_level = s.annotation.rating_level;
            row.true_area = s.annotation.area_purity;
            if (options.oracle) {
                row.pred_mass = row.true_mass;
                row.pred_level = row.true_level;
                row.pred_area = row.true_area;
            } else {
                std::vector<ImageU8> images;
                for (int k = 0; k < manifest.n; ++k)
                    images.push_back(read_png_rgb(image_path(data_root, id, k, manifest.n)));
                RatingReport rep = rate_sample(*seg, *purity, images, ladder, id);
                row.pred_mass = rep.mass_purity;
                row.pred_level = rep.level;
                row.pred_area = rep.area_purities;
            }
            rows.push_back(std::move(row));
        }
    };
    eval_split("train");
    eval_split("val");
    eval_split("test");

    // per-sample table and eval-split aggregates
    std::vector<double> split_true_mass, split_pred_mass;
    double area_err = 0.0;
    size_t area_count = 0;
    double mass_err = 0.0;
    int level_hits = 0, split_count = 0;
    struct CurvePoint {
        double truth, pred;
    };
    std::vector<CurvePoint> curve_points;
    for (const PerSample& r : rows) {
        summary.samples.push_back(
            {r.id, r.split, r.pred_mass, r.true_mass, r.pred_level, r.true_level});
        if (r.split != options.split) continue;
        ++split_count;
        split_true_mass.push_back(r.true_mass);
        split_pred_mass.push_back(r.pred_mass);
        mass_err += std::abs(r.pred_mass - r.true_mass);
        level_hits += (r.pred_level == r.true_level);
        for (size_t k = 0; k < r.true_area.size(); ++k) {
            area_err += std::abs(r.pred_area[k] - r.true_area[k]);
            ++area_count;
            curve_points.push_back({r.true_area[k], r.pred_area[k]});
        }
    }
    check(split_count > 0, "eval_dataset: split '" + options.split + "' is empty");
    summary.area_mae = area_err / static_cast<double>(area_count);
    summary.mass_mae = mass_err / static_cast<double>(split_count);
    summary.level_exact_match = static_cast<double>(level_hits) / split_count;

    std::sort(curve_points.begin(), curve_points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.truth < b.truth; });
    for (size_t i = 0; i < curve_points.size(); ++i)
        summary.curve.push_back(
            {static_cast<int>(i), curve_points[i].truth, curve_points[i].pred});

    // group table (paper-style): groups of consecutive samples within a split
    auto emit_groups = [&](const std::string& split, int group_count) {
        std::vector<const PerSample*> in_split;
        for (const PerSample& r : rows)
            if (r.split == split) in_split.push_back(&r);
        if (in_split.empty()) return;
        int gc = group_count > 0 ? group_count : 1;
        if (static_cast<int>(in_split.size()) % gc != 0) gc = 1;
        size_t group_size = in_split.size() / gc;
        for (int g = 0; g < gc; ++g) {
            double tm = 0.0, pm = 0.0;
            for (size_t i = 0; i < group_size; ++i) {
                tm += in_split[g * group_size + i]->true_mass;
                pm += in_split[g * group_size + i]->pred_mass;
            }
            tm /= static_cast<double>(group_size);
            pm /= static_cast<double>(group_size);
            EvalSummary::GroupRow row;
            row.name = split + "_group" + std::to_string(g + 1);
            row.split = split;
            row.true_mass = tm;
            row.pred_mass = pm;
            row.true_level = purity_to_level(tm, ladder);
            row.pred_level = purity_to_level(pm, ladder);
            summary.groups.push_back(row);
        }
    };
    emit_groups("train", options.groups_train);
    emit_groups("val", options.groups_val);
    emit_groups("test", options.groups_test);

    summary.errors_vs_levels =
        error_vs_levels(split_true_mass, split_pred_mass, options.level_counts);
    for (size_t i = 1; i < summary.errors_vs_levels.size(); ++i)
        if (summary.errors_vs_levels[i].second < summary.errors_vs_levels[i - 1].second)
            summary.errors_monotone = false;

    // order sensitivity of the mass branch: one deterministic shuffle of the
    // image order per eval-split sample
    if (!options.oracle) {
        double max_delta = 0.0;
        Rng rng(0x0d0e);
        for (const std::string& id : manifest.split_ids(options.split)) {
            std::vector<ImageU8> images;
            for (int k = 0; k < manifest.n; ++k)
                images.push_back(read_png_rgb(image_path(data_root, id, k, manifest.n)));
            RatingReport base = rate_sample(*seg, *purity, images, ladder, id);
            rng.shuffle(images);
            RatingReport shuffled = rate_sample(*seg, *purity, images, ladder, id);
            max_delta =
                std::max(max_delta, std::abs(base.mass_purity - shuffled.mass_purity));
        }
        summary.order_sensitivity = max_delta;
    }
    return summary;
}

void write_eval_outputs(const EvalSummary& summary, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out = open_out(out_dir + "/curve.csv");
        out << "index,truth,prediction\n";
        for (const auto& r : summary.curve)
            out << r.index << "," << r.truth << "," << r.prediction << "\n";
    }
    {
        std::ofstream out = open_out(out_dir + "/groups.csv");
        out << "group,split,pred_mass_purity,true_mass_purity,pred_level,true_level\n";
        for (const auto& g : summary.groups)
            out << g.name << "," << g.split << "," << g.pred_mass << "," << g.true_mass << ","
                << g.pred_level << "," << g.true_level << "\n";
    }
    {
        std::ofstream out = open_out(out_dir + "/levels.csv");
        out << "sample,split,pred_mass_purity,true_mass_purity,pred_level,true_level\n";
        for (const auto& s : summary.samples)
            out << s.id << "," << s.split << "," << s.pred_mass << "," << s.true_mass << ","
                << s.pred_level << "," << s.true_level << "\n";
    }
    {
        std::ofstream out = open_out(out_dir + "/errors_vs_levels.csv");
        out << "num_levels,error_rate\n";
        for (const auto& [L, err] : summary.errors_vs_levels) out << L << "," << err << "\n";
    }
    {
        std::ofstream out = open_out(out_dir + "/summary.md");
        out << "# Evaluation summary (" << summary.split << " split)\n\n";
        out << "- model digest: " << summary.model_digest << "\n";
        out << "- area purity MAE: " << summary.area_mae << "\n";
        out << "- mass purity MAE: " << summary.mass_mae << "\n";
        out << "- level exact match: " << summary.level_exact_match << "\n";
        out << "- order sensitivity (max mass delta under image shuffle): "
            << summary.order_sensitivity << "\n";
        if (!summary.errors_monotone)
            out << "- note: error rate is not monotone in the level count on this run\n";
        out << "\n## Mass purity per group\n\n";
        out << "| Group | Prediction | Ground Truth |\n|---|---|---|\n";
        for (const auto& g : summary.groups)
            out << "| " << g.name << " | " << g.pred_mass << " | " << g.true_mass << " |\n";
        out << "\n## Rating level per group\n\n";
        out << "| Group | Prediction | Ground Truth |\n|---|---|---|\n";
        for (const auto& g : summary.groups)
            out << "| " << g.name << " | " << g.pred_level << " | " << g.true_level << " |\n";
        out << "\n## Rating error vs number of levels\n\n";
        out << "| Levels | Error rate |\n|---|---|\n";
        for (const auto& [L, err] : summary.errors_vs_levels)
            out << "| " << L << " | " << err << " |\n";
    }
}

} // namespace cugr
