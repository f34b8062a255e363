#include "cugr/dataset.hpp"

#include "cugr/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cugr {

namespace {

std::string pad_index(int k, int n) {
    int width = 2;
    for (int v = n - 1; v >= 100; v /= 10) ++width;
    std::string s = std::to_string(k);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "cannot open for write: " + path);
    out << text;
    check(out.good(), "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "cannot open: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json annotation_to_json(const SampleAnnotation& a) {
    json breakdown = json::array();
    for (const MaterialShare& s : a.material_breakdown)
        breakdown.push_back(
            {{"name", s.name}, {"density", s.density}, {"volume_fraction", s.volume_fraction}});
    return json{{"area_purity", a.area_purity},
                {"mass_purity", a.mass_purity},
                {"rating_level", a.rating_level},
                {"material_breakdown", breakdown}};
}

SampleAnnotation annotation_from_json(const json& j) {
    SampleAnnotation a;
    a.area_purity = j.at("area_purity").get<std::vector<double>>();
    a.mass_purity = j.at("mass_purity").get<double>();
    a.rating_level = j.at("rating_level").get<int>();
    for (const json& s : j.at("material_breakdown"))
        a.material_breakdown.push_back({s.at("name").get<std::string>(),
                                        s.at("density").get<double>(),
                                        s.at("volume_fraction").get<double>()});
    return a;
}

} // namespace

std::vector<std::string> DatasetManifest::split_ids(const std::string& split) const {
    if (split == "train") return train_ids;
    if (split == "val") return val_ids;
    if (split == "test") return test_ids;
    throw Error("unknown split: " + split);
}

std::vector<std::string> DatasetManifest::all_ids() const {
    std::vector<std::string> ids = train_ids;
    ids.insert(ids.end(), val_ids.begin(), val_ids.end());
    ids.insert(ids.end(), test_ids.begin(), test_ids.end());
    return ids;
}

void SplitAssignment::validate(size_t population_count) const {
    std::vector<int> seen(population_count, 0);
    auto mark = [&](const std::vector<int>& v) {
        for (int i : v) {
            check(i >= 0 && i < static_cast<int>(population_count),
                  "split assignment: index out of range");
            seen[i]++;
        }
    };
    mark(train);
    mark(val);
    mark(test);
    for (int c : seen)
        check(c == 1, "split assignment must cover every sample exactly once");
}

SplitAssignment group_split(int num_samples, const std::array<int, 3>& ratio) {
    int groups = ratio[0] + ratio[1] + ratio[2];
    check(groups >= 3, "group_split: bad ratio");
    check(num_samples % groups == 0,
          "group_split: num_samples must be divisible by " + std::to_string(groups));
    int group_size = num_samples / groups;
    SplitAssignment s;
    for (int i = 0; i < num_samples; ++i) {
        int group = i / group_size;
        if (group < ratio[0])
            s.train.push_back(i);
        else if (group < ratio[0] + ratio[1])
            s.val.push_back(i);
        else
            s.test.push_back(i);
    }
    return s;
}

std::string sample_dir(const std::string& root, const std::string& id) {
    return root + "/samples/" + id;
}

std::string image_path(const std::string& root, const std::string& id, int k, int n) {
    return sample_dir(root, id) + "/images/img_" + pad_index(k, n) + ".png";
}

std::string mask_path(const std::string& root, const std::string& id, int k, int n) {
    return sample_dir(root, id) + "/masks/mask_" + pad_index(k, n) + ".png";
}

DatasetManifest export_dataset(const std::vector<SamplePopulation>& populations, int n,
                               const SplitAssignment& splits, const LevelLadder& ladder,
                               const std::string& out_dir,
                               const std::string& generator_config_digest, bool overwrite) {
    check(!populations.empty(), "export_dataset: no populations");
    check(n >= 1, "export_dataset: n must be >= 1");
    splits.validate(populations.size());
    ladder.validate();
    for (const SamplePopulation& pop : populations)
        check(pop.n_stirs >= n, "export_dataset: population has fewer stirs than n");

    fs::path root(out_dir);
    if (fs::exists(root) && !fs::is_empty(root)) {
        check(overwrite, "export_dataset: output directory not empty (use overwrite): " + out_dir);
        fs::remove_all(root);
    }
    fs::create_directories(root);

    DatasetManifest m;
    m.n = n;
    m.image_size = populations[0].image_size;
    m.num_levels = ladder.num_levels;
    m.level_thresholds = ladder.thresholds;
    m.generator_config_digest = generator_config_digest;

    auto id_of = [&](int index) {
        std::string s = std::to_string(index);
        while (s.size() < 4) s.insert(s.begin(), '0');
        return "sample_" + s;
    };
    auto export_one = [&](int index) {
        const SamplePopulation& pop = populations[index];
        check(pop.image_size == m.image_size, "export_dataset: mixed image sizes");
        std::string id = id_of(index);
        fs::create_directories(sample_dir(out_dir, id) + "/images");
        fs::create_directories(sample_dir(out_dir, id) + "/masks");

        SampleAnnotation ann;
        ann.mass_purity = true_mass_purity(pop);
        ann.rating_level = purity_to_level(ann.mass_purity, ladder);
        ann.material_breakdown = material_breakdown(pop);
        for (int k = 0; k < n; ++k) {
            StirredScene scene = stir_and_render(pop, k);
            write_png_rgb(image_path(out_dir, id, k, n), scene.image);
            write_heatmap_png(mask_path(out_dir, id, k, n), scene.mask);
            ann.area_purity.push_back(true_area_purity(scene));
        }
        save_annotation(out_dir, id, ann);
        return id;
    };

    for (int i : splits.train) m.train_ids.push_back(export_one(i));
    for (int i : splits.val) m.val_ids.push_back(export_one(i));
    for (int i : splits.test) m.test_ids.push_back(export_one(i));

    save_manifest(out_dir, m);
    return m;
}

void save_manifest(const std::string& root, const DatasetManifest& m) {
    json j{{"format_version", m.format_version},
           {"n", m.n},
           {"image_size", m.image_size},
           {"splits", {{"train", m.train_ids}, {"val", m.val_ids}, {"test", m.test_ids}}},
           {"num_levels", m.num_levels},
           {"level_thresholds", m.level_thresholds},
           {"generator_config_digest", m.generator_config_digest}};
    write_text_file(root + "/manifest.json", j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::string& root) {
    json j = json::parse(read_text_file(root + "/manifest.json"));
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    m.n = j.at("n").get<int>();
    m.image_size = j.at("image_size").get<int>();
    m.train_ids = j.at("splits").at("train").get<std::vector<std::string>>();
    m.val_ids = j.at("splits").at("val").get<std::vector<std::string>>();
    m.test_ids = j.at("splits").at("test").get<std::vector<std::string>>();
    m.num_levels = j.at("num_levels").get<int>();
    m.level_thresholds = j.at("level_thresholds").get<std::vector<double>>();
    m.generator_config_digest = j.at("generator_config_digest").get<std::string>();
    return m;
}

void save_annotation(const std::string& root, const std::string& id, const SampleAnnotation& a) {
    write_text_file(sample_dir(root, id) + "/annotation.json",
                    annotation_to_json(a).dump(2) + "\n");
}

SampleAnnotation load_annotation(const std::string& root, const std::string& id) {
    return annotation_from_json(
        json::parse(read_text_file(sample_dir(root, id) + "/annotation.json")));
}

std::vector<LoadedSample> load_split(const std::string& root, const DatasetManifest& m,
                                     const std::string& split) {
    std::vector<LoadedSample> samples;
    for (const std::string& id : m.split_ids(split)) {
        LoadedSample s;
        s.id = id;
        s.split = split;
        s.annotation = load_annotation(root, id);
        for (int k = 0; k < m.n; ++k) {
            s.images.push_back(read_png_rgb(image_path(root, id, k, m.n)));
            s.masks.push_back(read_heatmap_png(mask_path(root, id, k, m.n)));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

} // namespace cugr
