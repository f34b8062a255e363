#include "cugr/cli.hpp"

#include "cugr/checkpoint.hpp"
#include "cugr/common.hpp"
#include "cugr/config.hpp"
#include "cugr/dataset.hpp"
#include "cugr/digest.hpp"
#include "cugr/pipeline.hpp"
#include "cugr/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cugr {

namespace {

constexpr const char* kDataRootEnv = "CUGR_DATA_ROOT";

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    check(out.good(), "cannot write " + path);
    out << j.dump(2) << "\n";
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open " + path);
    return json::parse(in);
}

std::string resolve_data_root(std::string data) {
    if (!data.empty()) return data;
    const char* env = std::getenv(kDataRootEnv);
    check(env != nullptr && *env != '\0',
          "no dataset path given and " + std::string(kDataRootEnv) + " is not set");
    return env;
}

int find_latest_epoch_file(const std::string& dir, std::string& path_out) {
    int latest = -1;
    if (!fs::is_directory(dir)) return latest;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("epoch_", 0) != 0 || entry.path().extension() != ".bin") continue;
        int e = std::atoi(name.substr(6, name.size() - 10).c_str());
        if (e > latest) {
            latest = e;
            path_out = entry.path().string();
        }
    }
    return latest;
}

LevelLadder manifest_ladder(const DatasetManifest& m) {
    LevelLadder l;
    l.num_levels = m.num_levels;
    l.thresholds = m.level_thresholds;
    l.validate();
    return l;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    std::string out, config;
    std::vector<std::string> sets;
    int samples = -1, n = -1;
    int64_t seed = -1;
    bool overwrite = false;
};

int cmd_gen_data(const GenDataArgs& a) {
    std::vector<std::string> sets = a.sets;
    if (a.samples > 0) sets.push_back("generator.num_samples=" + std::to_string(a.samples));
    if (a.n > 0) sets.push_back("generator.n_stirs=" + std::to_string(a.n));
    if (a.seed >= 0) sets.push_back("generator.seed=" + std::to_string(a.seed));
    RunConfig cfg = load_run_config(a.config, sets);
    const GeneratorConfig& gen = cfg.generator;
    gen.validate();
    cfg.ladder.validate();

    int groups = gen.split_group_ratio[0] + gen.split_group_ratio[1] + gen.split_group_ratio[2];
    check(gen.num_samples % groups == 0,
          "gen-data: num_samples must be divisible by " + std::to_string(groups) + " groups");
    if (!gen.group_targets.empty())
        check(static_cast<int>(gen.group_targets.size()) == groups,
              "gen-data: need exactly " + std::to_string(groups) +
                  " group targets (one per split group), got " +
                  std::to_string(gen.group_targets.size()));
    int group_size = gen.num_samples / groups;

    std::vector<SamplePopulation> pops;
    for (int i = 0; i < gen.num_samples; ++i) {
        Rng srng = Rng(gen.seed).derive(0xda7a, static_cast<uint64_t>(i));
        GeneratorConfig per_sample = gen;
        if (!gen.group_targets.empty()) {
            double t = gen.group_targets[i / group_size] +
                       gen.group_jitter * (2.0 * srng.uniform() - 1.0);
            t = std::clamp(t, 1e-6, 1.0);
            per_sample.purity_lo = per_sample.purity_hi = t;
        }
        pops.push_back(sample_population(per_sample, srng.next_u64()));
    }

    SplitAssignment splits = group_split(gen.num_samples, gen.split_group_ratio);
    DatasetManifest manifest = export_dataset(pops, gen.n_stirs, splits, cfg.ladder, a.out,
                                              generator_config_digest(gen), a.overwrite);
    write_json_file(a.out + "/generator_config.json", generator_config_to_json(gen));

    // summary: counts and a 10-bin purity histogram
    std::vector<double> purities;
    for (const SamplePopulation& p : pops) purities.push_back(true_mass_purity(p));
    double lo = *std::min_element(purities.begin(), purities.end());
    double hi = *std::max_element(purities.begin(), purities.end());
    std::cout << "dataset written to " << a.out << "\n"
              << "  samples: " << gen.num_samples << " (train " << manifest.train_ids.size()
              << " / val " << manifest.val_ids.size() << " / test " << manifest.test_ids.size()
              << ")\n"
              << "  images:  " << gen.num_samples * gen.n_stirs << " (n = " << gen.n_stirs
              << ", " << gen.image_size << "x" << gen.image_size << ")\n"
              << "  config digest: " << manifest.generator_config_digest << "\n"
              << "  mass purity in [" << lo << ", " << hi << "]:\n";
    int bins[10] = {0};
    for (double p : purities) {
        int b = hi > lo ? std::min(9, static_cast<int>((p - lo) / (hi - lo) * 10.0)) : 0;
        bins[b]++;
    }
    for (int b = 0; b < 10; ++b) {
        std::cout << "    [" << (lo + (hi - lo) * b / 10.0) << ", "
                  << (lo + (hi - lo) * (b + 1) / 10.0) << ") ";
        for (int c = 0; c < bins[b]; ++c) std::cout << '#';
        std::cout << "\n";
    }
    std::cout << "manifest: " << a.out << "/manifest.json" << std::endl;
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data, ckpt, config, phases = "1,2,3";
    std::vector<std::string> sets;
    int64_t seed = -1;
    bool no_cutpaste = false;
    bool resume = false;
};

int cmd_train(const TrainArgs& a) {
    std::vector<std::string> sets = a.sets;
    if (a.seed >= 0) sets.push_back("train.seed=" + std::to_string(a.seed));
    if (a.no_cutpaste) sets.push_back("train.augment.cutpaste=false");
    RunConfig cfg = load_run_config(a.config, sets);

    std::string data_root = resolve_data_root(a.data);
    DatasetManifest manifest = load_manifest(data_root);
    TrainData data = load_train_data(data_root, manifest);
    fs::create_directories(a.ckpt);

    std::vector<int> phases;
    for (size_t start = 0; start < a.phases.size();) {
        size_t comma = a.phases.find(',', start);
        phases.push_back(std::atoi(a.phases.substr(start, comma - start).c_str()));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    for (int p : phases) check(p >= 1 && p <= 3, "train: phases must be within 1..3");
    check(!phases.empty(), "train: no phases selected");
    check(std::is_sorted(phases.begin(), phases.end()), "train: phases must be in order");

    auto want = [&](int p) { return std::find(phases.begin(), phases.end(), p) != phases.end(); };

    std::optional<SegModel> seg;
    std::optional<PurityModel> purity;
    double train_miou = 0.0, val_miou_final = 0.0, val_area_mae = 0.0, val_mass_mae = 0.0,
           val_level_acc = 0.0;

    auto require_seg = [&](int for_phase) {
        if (seg) return;
        std::string path;
        check(find_latest_epoch_file(a.ckpt + "/phase1", path) >= 0,
              "phase " + std::to_string(for_phase) +
                  " requires a phase-1 checkpoint under " + a.ckpt +
                  "/phase1; run with --phases 1 first");
        seg.emplace(load_seg_checkpoint(path));
        seg->frozen = true;
    };

    if (want(1)) {
        Phase1Result r = train_phase1(data, cfg.train, {a.ckpt, a.resume});
        val_miou_final = r.final_val_miou;
        std::cout << "phase 1 done: val mIoU = " << r.final_val_miou << std::endl;
        seg.emplace(std::move(r.model));
    }
    if (want(2)) {
        require_seg(2);
        PurityPhaseResult r = train_phase2(*seg, data, cfg.train, {a.ckpt, a.resume});
        val_area_mae = r.final_val_area_mae;
        std::cout << "phase 2 done: val area MAE = " << r.final_val_area_mae << std::endl;
        purity.emplace(std::move(r.model));
    }
    if (want(3)) {
        require_seg(3);
        if (!purity) {
            std::string path;
            check(find_latest_epoch_file(a.ckpt + "/phase2", path) >= 0,
                  "phase 3 requires a phase-2 checkpoint under " + a.ckpt +
                      "/phase2; run with --phases 2 first");
            purity.emplace(load_purity_checkpoint(path));
        }
        PurityPhaseResult r = train_phase3(*seg, std::move(*purity), data, cfg.train,
                                           {a.ckpt, a.resume});
        val_mass_mae = r.final_val_mass_mae;
        val_level_acc = r.final_val_level_accuracy;
        std::cout << "phase 3 done: val mass MAE = " << r.final_val_mass_mae
                  << ", val level accuracy = " << r.final_val_level_accuracy << std::endl;
        purity.emplace(std::move(r.model));
    }

    if (seg && purity) {
        // final train/val mIoU for the model card
        SegMetrics train_conf, val_conf;
        for (const LoadedSample& s : data.train)
            for (size_t k = 0; k < s.images.size(); ++k)
                train_conf.accumulate(
                    miou(predict_heatmap(seg->forward(s.images[k])), s.masks[k]));
        for (const LoadedSample& s : data.val)
            for (size_t k = 0; k < s.images.size(); ++k)
                val_conf.accumulate(
                    miou(predict_heatmap(seg->forward(s.images[k])), s.masks[k]));
        train_conf.finalize();
        val_conf.finalize();
        train_miou = train_conf.miou;
        val_miou_final = val_conf.miou;

        std::string bundle = a.ckpt + "/bundle";
        fs::create_directories(bundle);
        std::string cfg_digest = train_config_digest(cfg.train);
        save_seg_checkpoint(bundle + "/seg.ckpt", *seg, "final", 0, cfg_digest);
        save_purity_checkpoint(bundle + "/purity.ckpt", *purity, "final", 0, cfg_digest);
        write_json_file(bundle + "/run_config.json", run_config_to_json(cfg));
        json card{{"train_miou", train_miou},
                  {"val_miou", val_miou_final},
                  {"val_area_mae", val_area_mae},
                  {"val_mass_mae", val_mass_mae},
                  {"val_level_accuracy", val_level_acc},
                  {"seg_digest", params_digest(seg->params())},
                  {"purity_digest", params_digest(purity->params())},
                  {"train_config_digest", cfg_digest},
                  {"n", manifest.n},
                  {"image_size", manifest.image_size},
                  {"num_levels", manifest.num_levels}};
        write_json_file(bundle + "/model_card.json", card);
        std::cout << "bundle written to " << bundle << " (train mIoU = " << train_miou
                  << ", val mIoU = " << val_miou_final << ")" << std::endl;
    }
    return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string data, bundle, out, split = "val";
    bool oracle = false;
    bool verify = false;
    std::vector<std::string> sets;
};

int verify_dataset(const std::string& root);
int verify_bundle(const std::string& dir);

int cmd_eval(const EvalArgs& a) {
    std::string data_root = resolve_data_root(a.data);
    DatasetManifest manifest = load_manifest(data_root);
    LevelLadder ladder = manifest_ladder(manifest);

    if (a.verify) {
        check(verify_dataset(data_root) == 0, "eval: dataset verification failed");
        if (!a.oracle)
            check(verify_bundle(a.bundle) == 0, "eval: bundle verification failed");
    }

    EvalOptions options;
    options.split = a.split;
    options.oracle = a.oracle;
    if (fs::exists(data_root + "/generator_config.json")) {
        GeneratorConfig gen =
            generator_config_from_json(read_json_file(data_root + "/generator_config.json"));
        options.groups_train = gen.split_group_ratio[0];
        options.groups_val = gen.split_group_ratio[1];
        options.groups_test = gen.split_group_ratio[2];
    }

    std::optional<SegModel> seg;
    std::optional<PurityModel> purity;
    if (!a.oracle) {
        check(!a.bundle.empty(), "eval: --bundle required unless --oracle");
        seg.emplace(load_seg_checkpoint(a.bundle + "/seg.ckpt"));
        seg->frozen = true;
        purity.emplace(load_purity_checkpoint(a.bundle + "/purity.ckpt"));
    }

    EvalSummary summary = eval_dataset(seg ? &*seg : nullptr, purity ? &*purity : nullptr,
                                       data_root, manifest, ladder, options);
    write_eval_outputs(summary, a.out);
    std::cout << "eval (" << summary.split << "): area MAE = " << summary.area_mae
              << ", mass MAE = " << summary.mass_mae
              << ", level exact match = " << summary.level_exact_match << "\n"
              << "outputs in " << a.out << std::endl;
    return 0;
}

// -------------------------------------------------------------------- rate

struct RateArgs {
    std::string bundle, sample, images, out, baseline = "none";
};

int cmd_rate(const RateArgs& a) {
    check(!a.sample.empty() || !a.images.empty(), "rate: give --sample or --images");
    check(a.sample.empty() || a.images.empty(), "rate: --sample and --images are exclusive");

    std::string dir = a.sample.empty() ? a.images : a.sample + "/images";
    std::vector<std::string> files;
    check(fs::is_directory(dir), "rate: not a directory: " + dir);
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".png") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    check(!files.empty(), "rate: no PNG images found in " + dir);

    std::vector<ImageU8> images;
    for (const std::string& f : files) images.push_back(read_png_rgb(f));

    SegModel seg = load_seg_checkpoint(a.bundle + "/seg.ckpt");
    seg.frozen = true;
    RunConfig cfg = run_config_from_json(read_json_file(a.bundle + "/run_config.json"));
    std::string sample_id = fs::path(a.sample.empty() ? a.images : a.sample).filename().string();

    RatingReport report;
    if (a.baseline == "threshold") {
        report = rate_by_threshold(seg, images, cfg.ladder, sample_id);
    } else {
        check(a.baseline == "none", "rate: unknown baseline '" + a.baseline + "'");
        PurityModel purity = load_purity_checkpoint(a.bundle + "/purity.ckpt");
        report = rate_sample(seg, purity, images, cfg.ladder, sample_id);
    }
    if (!a.out.empty()) write_json_file(a.out, report.to_json());
    std::cout << "sample " << report.sample_id << ": mass purity = " << report.mass_purity
              << ", level = " << report.level << " (ladder audit: " << report.ladder_level
              << ")" << std::endl;
    return 0;
}

// ------------------------------------------------------------------ verify

int verify_dataset(const std::string& root) {
    DatasetManifest manifest = load_manifest(root);
    check(fs::exists(root + "/generator_config.json"),
          "verify: missing generator_config.json in " + root);
    GeneratorConfig gen =
        generator_config_from_json(read_json_file(root + "/generator_config.json"));
    std::string digest = generator_config_digest(gen);
    if (digest != manifest.generator_config_digest) {
        std::cerr << "verify: generator config digest mismatch\n  manifest: "
                  << manifest.generator_config_digest << "\n  recomputed: " << digest
                  << std::endl;
        return 1;
    }
    LevelLadder ladder = manifest_ladder(manifest);
    int checked = 0;
    for (const std::string& id : manifest.all_ids()) {
        SampleAnnotation ann = load_annotation(root, id);
        check(static_cast<int>(ann.area_purity.size()) == manifest.n,
              "verify: area purity vector length mismatch for " + id);
        check(ann.rating_level == purity_to_level(ann.mass_purity, ladder),
              "verify: rating level inconsistent with thresholds for " + id);
        for (int k = 0; k < manifest.n; ++k) {
            check(fs::exists(image_path(root, id, k, manifest.n)),
                  "verify: missing image " + image_path(root, id, k, manifest.n));
            check(fs::exists(mask_path(root, id, k, manifest.n)),
                  "verify: missing mask " + mask_path(root, id, k, manifest.n));
        }
        ++checked;
    }
    std::cout << "dataset OK: " << checked << " samples, config digest matches" << std::endl;
    return 0;
}

int verify_bundle(const std::string& dir) {
    CheckpointMeta seg_meta = verify_checkpoint_file(dir + "/seg.ckpt");
    CheckpointMeta purity_meta = verify_checkpoint_file(dir + "/purity.ckpt");
    RunConfig cfg = run_config_from_json(read_json_file(dir + "/run_config.json"));
    std::string digest = train_config_digest(cfg.train);
    if (seg_meta.train_config_digest != digest || purity_meta.train_config_digest != digest) {
        std::cerr << "verify: bundle config digest mismatch" << std::endl;
        return 1;
    }
    json card = read_json_file(dir + "/model_card.json");
    if (card.at("seg_digest").get<std::string>() != seg_meta.params_digest ||
        card.at("purity_digest").get<std::string>() != purity_meta.params_digest) {
        std::cerr << "verify: model card digests do not match checkpoints" << std::endl;
        return 1;
    }
    std::cout << "bundle OK: seg " << seg_meta.params_digest.substr(0, 12) << "..., purity "
              << purity_meta.params_digest.substr(0, 12) << "..." << std::endl;
    return 0;
}

int cmd_verify(const std::string& path) {
    if (fs::is_directory(path)) {
        if (fs::exists(path + "/manifest.json")) return verify_dataset(path);
        if (fs::exists(path + "/seg.ckpt")) return verify_bundle(path);
        throw Error("verify: unrecognized directory artifact: " + path);
    }
    if (path.size() > 4 && (path.ends_with(".bin") || path.ends_with(".ckpt"))) {
        CheckpointMeta meta = verify_checkpoint_file(path);
        std::cout << "checkpoint OK: kind " << meta.kind << ", " << meta.phase_tag << " epoch "
                  << meta.epoch << ", digest " << meta.params_digest.substr(0, 12) << "..."
                  << std::endl;
        return 0;
    }
    if (path.ends_with(".json")) {
        RatingReport report = RatingReport::from_json(read_json_file(path));
        report.ladder.validate();
        check(report.ladder_level == purity_to_level(report.mass_purity, report.ladder),
              "verify: report ladder_level inconsistent with mass purity");
        std::cout << "report OK: sample " << report.sample_id << ", level " << report.level
                  << std::endl;
        return 0;
    }
    throw Error("verify: unrecognized artifact: " + path);
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"waste-copper granule rating: synthetic data, training, evaluation"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* cgen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    cgen->add_option("--out", gen.out, "output dataset directory")->required();
    cgen->add_option("--config", gen.config, "JSON config file");
    cgen->add_option("--set", gen.sets, "override, e.g. generator.n_stirs=32");
    cgen->add_option("--samples", gen.samples, "number of samples");
    cgen->add_option("--n", gen.n, "stirs (images) per sample");
    cgen->add_option("--seed", gen.seed, "generator seed");
    cgen->add_flag("--overwrite", gen.overwrite, "replace an existing dataset");

    TrainArgs train;
    CLI::App* ctrain = app.add_subcommand("train", "run the three-phase training");
    ctrain->add_option("--data", train.data, "dataset root (or $CUGR_DATA_ROOT)");
    ctrain->add_option("--ckpt", train.ckpt, "checkpoint directory")->required();
    ctrain->add_option("--phases", train.phases, "comma list, default 1,2,3");
    ctrain->add_option("--config", train.config, "JSON config file");
    ctrain->add_option("--set", train.sets, "override, e.g. train.phase1.epochs=4");
    ctrain->add_option("--seed", train.seed, "training seed");
    ctrain->add_flag("--no-cutpaste", train.no_cutpaste, "disable cut-paste augmentation");
    ctrain->add_flag("--resume", train.resume, "resume from the latest epoch checkpoints");

    EvalArgs eval;
    CLI::App* ceval = app.add_subcommand("eval", "evaluate a model bundle on a dataset");
    ceval->add_option("--data", eval.data, "dataset root (or $CUGR_DATA_ROOT)");
    ceval->add_option("--bundle", eval.bundle, "model bundle directory");
    ceval->add_option("--out", eval.out, "output directory for CSV/markdown")->required();
    ceval->add_option("--split", eval.split, "train|val|test (default val)");
    ceval->add_flag("--oracle", eval.oracle, "ground-truth passthrough instead of models");
    ceval->add_flag("--verify", eval.verify, "verify artifact digests first");
    ceval->add_option("--set", eval.sets, "config override");

    RateArgs rate;
    CLI::App* crate = app.add_subcommand("rate", "rate one sample (n images)");
    crate->add_option("--bundle", rate.bundle, "model bundle directory")->required();
    crate->add_option("--sample", rate.sample, "dataset sample directory");
    crate->add_option("--images", rate.images, "directory with n PNG images");
    crate->add_option("--out", rate.out, "write the rating report JSON here");
    crate->add_option("--baseline", rate.baseline, "none|threshold");

    std::string verify_path;
    CLI::App* cverify = app.add_subcommand("verify", "recompute and check artifact digests");
    cverify->add_option("--path", verify_path, "dataset dir, bundle dir, checkpoint or report")
        ->required();

    try {
        app.parse(argc, argv);
        if (cgen->parsed()) return cmd_gen_data(gen);
        if (ctrain->parsed()) return cmd_train(train);
        if (ceval->parsed()) return cmd_eval(eval);
        if (crate->parsed()) return cmd_rate(rate);
        if (cverify->parsed()) return cmd_verify(verify_path);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 1;
}

} // namespace cugr
