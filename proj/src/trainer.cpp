#include "cugr/trainer.hpp"

#include "cugr/checkpoint.hpp"
#include "cugr/common.hpp"
#include "cugr/digest.hpp"
#include "cugr/nn/loss_math.hpp"
#include "cugr/nn/optim.hpp"
#include "cugr/rng.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cugr {

namespace {

constexpr uint64_t kTagPhase1 = 0x9411;
constexpr uint64_t kTagPhase3 = 0x9413;
constexpr uint64_t kTagSegInit = 0x51;
constexpr uint64_t kTagPurityInit = 0x52;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string epoch_path(const std::string& dir, int epoch) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "epoch_%03d.bin", epoch);
    return dir + "/" + buf;
}

int find_latest_epoch(const std::string& dir, int max_epochs) {
    int latest = -1;
    for (int e = 0; e < max_epochs; ++e)
        if (fs::exists(epoch_path(dir, e))) latest = e;
    return latest;
}

void append_record_line(const std::string& dir, const json& line) {
    std::ofstream out(dir + "/record.jsonl", std::ios::app);
    check(out.good(), "trainer: cannot append to " + dir + "/record.jsonl");
    out << line.dump() << "\n";
}

// Divergence detector: non-finite loss aborts immediately; a sustained blow
// up past divergence_factor x the initial epoch loss aborts after
// divergence_patience epochs.
class DivergenceGuard {
public:
    DivergenceGuard(const TrainConfig& cfg, std::string phase)
        : factor_(cfg.divergence_factor), patience_(cfg.divergence_patience),
          phase_(std::move(phase)) {}

    void check_step(double loss, int epoch, int step) const {
        if (!std::isfinite(loss))
            throw Error("divergence in " + phase_ + ": non-finite loss at epoch " +
                        std::to_string(epoch) + " step " + std::to_string(step));
    }

    void check_epoch(double loss, int epoch) {
        if (initial_ < 0.0) initial_ = loss;
        if (loss > factor_ * initial_)
            ++streak_;
        else
            streak_ = 0;
        if (streak_ >= patience_)
            throw Error("divergence in " + phase_ + ": loss " + std::to_string(loss) +
                        " exceeded " + std::to_string(factor_) + "x initial for " +
                        std::to_string(streak_) + " consecutive epochs (epoch " +
                        std::to_string(epoch) + ")");
    }

private:
    double factor_;
    int patience_;
    std::string phase_;
    double initial_ = -1.0;
    int streak_ = 0;
};

double val_miou(SegModel& model, const std::vector<LoadedSample>& val) {
    SegMetrics total;
    for (const LoadedSample& s : val)
        for (size_t k = 0; k < s.images.size(); ++k) {
            Heatmap pred = predict_heatmap(model.forward(s.images[k]));
            total.accumulate(miou(pred, s.masks[k]));
        }
    total.finalize();
    return total.miou;
}

// Stacks (and fusion features) for the purity phases; the segmentation
// model is frozen, so these are computed once per phase.
struct PurityInputs {
    std::vector<HeatmapStack> stacks;
    std::vector<nn::Tensor> features; // empty when not fusing
};

PurityInputs build_purity_inputs(SegModel& seg, const std::vector<LoadedSample>& samples,
                                 const TrainConfig& cfg) {
    PurityInputs in;
    for (const LoadedSample& s : samples) {
        if (cfg.teacher_forcing) {
            in.stacks.push_back(stack_heatmaps(s.masks));
            if (cfg.fuse_seg_features) {
                SegSampleResult r = run_seg_over_images(seg, s.images, true);
                in.features.push_back(std::move(r.mean_features));
            }
        } else {
            SegSampleResult r = run_seg_over_images(seg, s.images, cfg.fuse_seg_features);
            in.stacks.push_back(stack_heatmaps(r.heatmaps));
            if (cfg.fuse_seg_features) in.features.push_back(std::move(r.mean_features));
        }
    }
    return in;
}

double val_area_mae(PurityModel& model, const PurityInputs& in,
                    const std::vector<LoadedSample>& val) {
    double total = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < val.size(); ++i) {
        PurityOutput out =
            model.forward(in.stacks[i], in.features.empty() ? nullptr : &in.features[i]);
        for (size_t k = 0; k < out.area_purities.size(); ++k) {
            total += std::abs(out.area_purities[k] - val[i].annotation.area_purity[k]);
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

} // namespace

json train_config_to_json(const TrainConfig& cfg) {
    return json{
        {"seed", cfg.seed},
        {"deterministic", cfg.deterministic},
        {"batch_size", cfg.batch_size},
        {"purity_batch", cfg.purity_batch},
        {"phase1", {{"epochs", cfg.phase1.epochs}, {"lr", cfg.phase1.lr}, {"momentum", cfg.phase1.momentum}}},
        {"phase2", {{"epochs", cfg.phase2.epochs}, {"lr", cfg.phase2.lr}, {"momentum", cfg.phase2.momentum}}},
        {"phase3", {{"epochs", cfg.phase3.epochs}, {"lr", cfg.phase3.lr}, {"momentum", cfg.phase3.momentum}}},
        {"alpha", cfg.alpha},
        {"gamma", cfg.gamma},
        {"fuse_seg_features", cfg.fuse_seg_features},
        {"teacher_forcing", cfg.teacher_forcing},
        {"augment",
         {{"standard", cfg.augment.standard},
          {"cutpaste", cfg.augment.cutpaste},
          {"cutpaste_prob", cfg.augment.cutpaste_prob},
          {"k_min", cfg.augment.k_min},
          {"k_max", cfg.augment.k_max},
          {"min_patch_area", cfg.augment.min_patch_area},
          {"max_place_tries", cfg.augment.max_place_tries}}},
        {"divergence_factor", cfg.divergence_factor},
        {"divergence_patience", cfg.divergence_patience}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.purity_batch = j.value("purity_batch", cfg.purity_batch);
    auto phase = [&](const char* key, PhaseConfig& p) {
        if (!j.contains(key)) return;
        const json& v = j.at(key);
        p.epochs = v.value("epochs", p.epochs);
        p.lr = v.value("lr", p.lr);
        p.momentum = v.value("momentum", p.momentum);
    };
    phase("phase1", cfg.phase1);
    phase("phase2", cfg.phase2);
    phase("phase3", cfg.phase3);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.fuse_seg_features = j.value("fuse_seg_features", cfg.fuse_seg_features);
    cfg.teacher_forcing = j.value("teacher_forcing", cfg.teacher_forcing);
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        cfg.augment.standard = a.value("standard", cfg.augment.standard);
        cfg.augment.cutpaste = a.value("cutpaste", cfg.augment.cutpaste);
        cfg.augment.cutpaste_prob = a.value("cutpaste_prob", cfg.augment.cutpaste_prob);
        cfg.augment.k_min = a.value("k_min", cfg.augment.k_min);
        cfg.augment.k_max = a.value("k_max", cfg.augment.k_max);
        cfg.augment.min_patch_area = a.value("min_patch_area", cfg.augment.min_patch_area);
        cfg.augment.max_place_tries = a.value("max_place_tries", cfg.augment.max_place_tries);
    }
    cfg.divergence_factor = j.value("divergence_factor", cfg.divergence_factor);
    cfg.divergence_patience = j.value("divergence_patience", cfg.divergence_patience);
    return cfg;
}

std::string train_config_digest(const TrainConfig& cfg) {
    return sha256_hex(train_config_to_json(cfg).dump());
}

TrainData load_train_data(const std::string& root, const DatasetManifest& manifest) {
    TrainData d;
    d.train = load_split(root, manifest, "train");
    d.val = load_split(root, manifest, "val");
    d.n = manifest.n;
    d.image_size = manifest.image_size;
    d.num_levels = manifest.num_levels;
    return d;
}

bool verify_frozen(const std::vector<nn::Param*>& component, const std::string& before_digest) {
    return params_digest(component) == before_digest;
}

SegSampleResult run_seg_over_images(SegModel& seg, const std::vector<ImageU8>& images,
                                    bool want_features) {
    check(!images.empty(), "run_seg_over_images: no images");
    SegSampleResult result;
    nn::Tensor sum;
    for (const ImageU8& img : images) {
        SegOutput out = seg.forward(img);
        result.heatmaps.push_back(predict_heatmap(out));
        if (want_features) {
            if (sum.size() == 0)
                sum = out.features;
            else
                for (size_t i = 0; i < sum.size(); ++i) sum.data[i] += out.features.data[i];
        }
    }
    if (want_features) {
        float inv = 1.0f / static_cast<float>(images.size());
        for (float& v : sum.data) v *= inv;
        result.mean_features = std::move(sum);
    }
    return result;
}

Phase1Result train_phase1(const TrainData& data, const TrainConfig& cfg,
                          const PhaseOptions& opts) {
    check(!data.train.empty() && !data.val.empty(), "phase1: empty split");
    const std::string cfg_digest = train_config_digest(cfg);
    std::string dir;
    if (!opts.ckpt_dir.empty()) {
        dir = opts.ckpt_dir + "/phase1";
        fs::create_directories(dir);
    }

    SegModel model(SegTopology{}, Rng(cfg.seed).derive(kTagSegInit).next_u64());
    int start_epoch = 0;
    if (opts.resume && !dir.empty()) {
        int latest = find_latest_epoch(dir, cfg.phase1.epochs);
        if (latest >= 0) {
            load_checkpoint_params(epoch_path(dir, latest), model.params());
            start_epoch = latest + 1;
        }
    }

    // flatten to (sample, stir) items
    struct Item {
        int sample, stir;
    };
    std::vector<Item> items;
    for (size_t s = 0; s < data.train.size(); ++s)
        for (int k = 0; k < data.n; ++k) items.push_back({static_cast<int>(s), k});

    PatchBank bank;
    if (cfg.augment.cutpaste) {
        std::vector<const ImageU8*> imgs;
        std::vector<const Heatmap*> masks;
        std::vector<std::string> ids;
        for (const LoadedSample& s : data.train)
            for (int k = 0; k < data.n; ++k) {
                imgs.push_back(&s.images[k]);
                masks.push_back(&s.masks[k]);
                ids.push_back(s.id);
            }
        bank = extract_impurity_regions(imgs, masks, ids, cfg.augment.min_patch_area,
                                        Rng(cfg.seed).derive(0xba7).next_u64());
    }

    std::vector<nn::Param*> params = model.params();
    nn::SgdMomentum opt(cfg.phase1.lr, cfg.phase1.momentum);
    DivergenceGuard guard(cfg, "phase1");
    TrainRecord record;
    StandardAugmentOptions std_ops;

    const size_t plane_k =
        static_cast<size_t>(data.image_size) * static_cast<size_t>(data.image_size);
    nn::Tensor dlogits({2, data.image_size, data.image_size});

    for (int epoch = start_epoch; epoch < cfg.phase1.epochs; ++epoch) {
        double t0 = now_ms();
        Rng erng = Rng(cfg.seed).derive(kTagPhase1, static_cast<uint64_t>(epoch));
        std::vector<int> order(items.size());
        std::iota(order.begin(), order.end(), 0);
        erng.shuffle(order);
        double lr_scale = nn::cosine_scale(epoch, cfg.phase1.epochs);

        double epoch_loss = 0.0;
        int steps = 0;
        for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
            size_t batch_n = std::min<size_t>(cfg.batch_size, order.size() - pos);
            nn::zero_grads(params);
            double batch_loss = 0.0;
            for (size_t bi = 0; bi < batch_n; ++bi) {
                const Item& item = items[order[pos + bi]];
                ImageU8 image = data.train[item.sample].images[item.stir];
                Heatmap mask = data.train[item.sample].masks[item.stir];
                Rng irng = erng.derive(0xa06, pos + bi);
                if (cfg.augment.standard)
                    standard_augment(image, mask, std_ops, irng.next_u64());
                if (cfg.augment.cutpaste && !bank.empty() &&
                    irng.bernoulli(cfg.augment.cutpaste_prob)) {
                    int k = irng.uniform_int(cfg.augment.k_min, cfg.augment.k_max);
                    paste_impurities(image, mask, bank, k, irng.next_u64(),
                                     cfg.augment.max_place_tries);
                }
                nn::Tensor logits = model.forward_train(image_to_tensor(image));
                double loss = nn::softmax_ce_mean(logits.ptr(), mask.labels.data(), plane_k,
                                                  dlogits.ptr());
                guard.check_step(loss, epoch, static_cast<int>(pos / cfg.batch_size));
                float inv = 1.0f / static_cast<float>(batch_n);
                for (float& v : dlogits.data) v *= inv;
                model.backward(dlogits);
                batch_loss += loss;
            }
            opt.step(params, lr_scale);
            epoch_loss += batch_loss / static_cast<double>(batch_n);
            ++steps;
        }
        epoch_loss /= std::max(1, steps);
        guard.check_epoch(epoch_loss, epoch);

        double miou_now = val_miou(model, data.val);
        json line{{"phase", 1},
                  {"epoch", epoch},
                  {"train_loss1", epoch_loss},
                  {"val_miou", miou_now},
                  {"lr_scale", lr_scale},
                  {"seed", cfg.seed},
                  {"config_digest", cfg_digest},
                  {"wall_ms", cfg.deterministic ? 0.0 : now_ms() - t0}};
        record.append(line);
        if (!dir.empty()) {
            save_seg_checkpoint(epoch_path(dir, epoch), model, "phase1", epoch, cfg_digest);
            append_record_line(dir, line);
        }
    }

    model.frozen = true;
    Phase1Result result{std::move(model), std::move(record), 0.0};
    result.final_val_miou =
        result.record.empty() ? val_miou(result.model, data.val)
                              : result.record.epochs.back().at("val_miou").get<double>();
    return result;
}

PurityPhaseResult train_phase2(SegModel& seg, const TrainData& data, const TrainConfig& cfg,
                               const PhaseOptions& opts) {
    check(seg.frozen, "phase2: segmentation model must be frozen");
    check(!data.train.empty() && !data.val.empty(), "phase2: empty split");
    const std::string cfg_digest = train_config_digest(cfg);
    std::string dir;
    if (!opts.ckpt_dir.empty()) {
        dir = opts.ckpt_dir + "/phase2";
        fs::create_directories(dir);
    }

    const std::string seg_before = params_digest(seg.params());

    PurityTopology topo;
    topo.n = data.n;
    topo.image_size = data.image_size;
    topo.num_levels = data.num_levels;
    topo.fuse_seg_features = cfg.fuse_seg_features;
    PurityModel model(topo, Rng(cfg.seed).derive(kTagPurityInit).next_u64());
    model.area_trainable = true;
    model.mass_trainable = false;
    model.rank_trainable = false;

    int start_epoch = 0;
    if (opts.resume && !dir.empty()) {
        int latest = find_latest_epoch(dir, cfg.phase2.epochs);
        if (latest >= 0) {
            load_checkpoint_params(epoch_path(dir, latest), model.params());
            start_epoch = latest + 1;
        }
    }

    const std::string mass_before = params_digest(model.mass_params());
    const std::string rank_before = params_digest(model.rank_params());

    PurityInputs train_in = build_purity_inputs(seg, data.train, cfg);
    PurityInputs val_in = build_purity_inputs(seg, data.val, cfg);

    std::vector<nn::Param*> params = model.area_params();
    nn::SgdMomentum opt(cfg.phase2.lr, cfg.phase2.momentum);
    DivergenceGuard guard(cfg, "phase2");
    TrainRecord record;

    for (int epoch = start_epoch; epoch < cfg.phase2.epochs; ++epoch) {
        double t0 = now_ms();
        Rng erng = Rng(cfg.seed).derive(0x9412, static_cast<uint64_t>(epoch));
        std::vector<int> order(data.train.size());
        std::iota(order.begin(), order.end(), 0);
        erng.shuffle(order);
        double lr_scale = nn::cosine_scale(epoch, cfg.phase2.epochs);

        double epoch_loss = 0.0;
        int steps = 0;
        for (size_t pos = 0; pos < order.size(); pos += cfg.purity_batch) {
            size_t batch_n = std::min<size_t>(cfg.purity_batch, order.size() - pos);
            nn::zero_grads(params);
            double batch_loss = 0.0;
            for (size_t bi = 0; bi < batch_n; ++bi) {
                int si = order[pos + bi];
                const nn::Tensor* feat =
                    train_in.features.empty() ? nullptr : &train_in.features[si];
                PurityOutput out = model.forward(train_in.stacks[si], feat);
                const std::vector<double>& truth = data.train[si].annotation.area_purity;
                std::vector<double> dpred(out.area_purities.size());
                double loss = nn::l1_mean(out.area_purities.data(), truth.data(),
                                          truth.size(), dpred.data());
                guard.check_step(loss, epoch, static_cast<int>(pos / cfg.purity_batch));
                for (double& g : dpred) g /= static_cast<double>(batch_n);
                model.backward_area(dpred);
                batch_loss += loss;
            }
            opt.step(params, lr_scale);
            epoch_loss += batch_loss / static_cast<double>(batch_n);
            ++steps;
        }
        epoch_loss /= std::max(1, steps);
        guard.check_epoch(epoch_loss, epoch);

        double mae = val_area_mae(model, val_in, data.val);
        json line{{"phase", 2},
                  {"epoch", epoch},
                  {"train_loss2", epoch_loss},
                  {"val_area_mae", mae},
                  {"lr_scale", lr_scale},
                  {"seed", cfg.seed},
                  {"config_digest", cfg_digest},
                  {"wall_ms", cfg.deterministic ? 0.0 : now_ms() - t0}};
        record.append(line);
        if (!dir.empty()) {
            save_purity_checkpoint(epoch_path(dir, epoch), model, "phase2", epoch, cfg_digest);
            append_record_line(dir, line);
        }
    }

    check(verify_frozen(seg.params(), seg_before), "phase2: segmentation parameters changed");
    check(verify_frozen(model.mass_params(), mass_before), "phase2: mass branch changed");
    check(verify_frozen(model.rank_params(), rank_before), "phase2: rank branch changed");

    PurityPhaseResult result{std::move(model), std::move(record), 0.0, 0.0, 0.0};
    result.final_val_area_mae = result.record.empty()
                                    ? val_area_mae(result.model, val_in, data.val)
                                    : result.record.epochs.back().at("val_area_mae").get<double>();
    return result;
}

PurityPhaseResult train_phase3(SegModel& seg, PurityModel purity, const TrainData& data,
                               const TrainConfig& cfg, const PhaseOptions& opts) {
    check(seg.frozen, "phase3: segmentation model must be frozen");
    check(!data.train.empty() && !data.val.empty(), "phase3: empty split");
    const std::string cfg_digest = train_config_digest(cfg);
    std::string dir;
    if (!opts.ckpt_dir.empty()) {
        dir = opts.ckpt_dir + "/phase3";
        fs::create_directories(dir);
    }

    const std::string seg_before = params_digest(seg.params());
    const std::string area_before = params_digest(purity.area_params());
    purity.area_trainable = false;
    purity.mass_trainable = true;
    purity.rank_trainable = true;

    int start_epoch = 0;
    if (opts.resume && !dir.empty()) {
        int latest = find_latest_epoch(dir, cfg.phase3.epochs);
        if (latest >= 0) {
            load_checkpoint_params(epoch_path(dir, latest), purity.params());
            start_epoch = latest + 1;
        }
    }

    PurityInputs train_in = build_purity_inputs(seg, data.train, cfg);
    PurityInputs val_in = build_purity_inputs(seg, data.val, cfg);

    std::vector<nn::Param*> params = purity.mass_params();
    for (nn::Param* p : purity.rank_params()) params.push_back(p);
    nn::SgdMomentum opt(cfg.phase3.lr, cfg.phase3.momentum);
    DivergenceGuard guard(cfg, "phase3");
    TrainRecord record;
    const int L = purity.topology().num_levels;

    auto val_metrics = [&](PurityModel& m, double& mass_mae, double& level_acc) {
        double total = 0.0;
        int correct = 0;
        for (size_t i = 0; i < data.val.size(); ++i) {
            const nn::Tensor* feat = val_in.features.empty() ? nullptr : &val_in.features[i];
            PurityOutput out = m.forward(val_in.stacks[i], feat);
            total += std::abs(out.mass_purity - data.val[i].annotation.mass_purity);
            correct += (out.level == data.val[i].annotation.rating_level);
        }
        mass_mae = total / static_cast<double>(data.val.size());
        level_acc = static_cast<double>(correct) / static_cast<double>(data.val.size());
    };

    for (int epoch = start_epoch; epoch < cfg.phase3.epochs; ++epoch) {
        double t0 = now_ms();
        Rng erng = Rng(cfg.seed).derive(kTagPhase3, static_cast<uint64_t>(epoch));
        std::vector<int> order(data.train.size());
        std::iota(order.begin(), order.end(), 0);
        erng.shuffle(order);
        double lr_scale = nn::cosine_scale(epoch, cfg.phase3.epochs);

        double epoch_loss = 0.0;
        int steps = 0;
        for (size_t pos = 0; pos < order.size(); pos += cfg.purity_batch) {
            size_t batch_n = std::min<size_t>(cfg.purity_batch, order.size() - pos);
            nn::zero_grads(params);
            double batch_loss = 0.0;
            for (size_t bi = 0; bi < batch_n; ++bi) {
                int si = order[pos + bi];
                const nn::Tensor* feat =
                    train_in.features.empty() ? nullptr : &train_in.features[si];
                PurityOutput out = purity.forward(train_in.stacks[si], feat);
                const SampleAnnotation& ann = data.train[si].annotation;
                double dmass = 0.0;
                std::vector<double> dlogits(L, 0.0);
                double loss = nn::loss3(out.mass_purity, ann.mass_purity,
                                        out.level_logits.data(), L, ann.rating_level,
                                        cfg.alpha, cfg.gamma, &dmass, dlogits.data());
                guard.check_step(loss, epoch, static_cast<int>(pos / cfg.purity_batch));
                dmass /= static_cast<double>(batch_n);
                for (double& g : dlogits) g /= static_cast<double>(batch_n);
                purity.backward_mass_rank(dmass, dlogits);
                batch_loss += loss;
            }
            opt.step(params, lr_scale);
            epoch_loss += batch_loss / static_cast<double>(batch_n);
            ++steps;
        }
        epoch_loss /= std::max(1, steps);
        guard.check_epoch(epoch_loss, epoch);

        double mass_mae = 0.0, level_acc = 0.0;
        val_metrics(purity, mass_mae, level_acc);
        json line{{"phase", 3},
                  {"epoch", epoch},
                  {"train_loss3", epoch_loss},
                  {"val_mass_mae", mass_mae},
                  {"val_level_accuracy", level_acc},
                  {"lr_scale", lr_scale},
                  {"seed", cfg.seed},
                  {"config_digest", cfg_digest},
                  {"wall_ms", cfg.deterministic ? 0.0 : now_ms() - t0}};
        record.append(line);
        if (!dir.empty()) {
            save_purity_checkpoint(epoch_path(dir, epoch), purity, "phase3", epoch, cfg_digest);
            append_record_line(dir, line);
        }
    }

    check(verify_frozen(seg.params(), seg_before), "phase3: segmentation parameters changed");
    check(verify_frozen(purity.area_params(), area_before), "phase3: area branch changed");

    PurityPhaseResult result{std::move(purity), std::move(record), 0.0, 0.0, 0.0};
    double mass_mae = 0.0, level_acc = 0.0;
    val_metrics(result.model, mass_mae, level_acc);
    result.final_val_mass_mae = mass_mae;
    result.final_val_level_accuracy = level_acc;
    return result;
}

} // namespace cugr
