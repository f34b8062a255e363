#include "cugr/config.hpp"

#include "cugr/common.hpp"
#include "cugr/digest.hpp"

#include <fstream>

using nlohmann::json;

namespace cugr {

namespace {

json material_to_json(const MaterialSpec& m) {
    return json{{"name", m.name},
                {"density", m.density},
                {"is_copper", m.is_copper},
                {"color_mean", m.color.mean},
                {"color_jitter", m.color.jitter}};
}

MaterialSpec material_from_json(const json& j) {
    MaterialSpec m;
    m.name = j.at("name").get<std::string>();
    m.density = j.at("density").get<double>();
    m.is_copper = j.at("is_copper").get<bool>();
    m.color.mean = j.at("color_mean").get<std::array<int, 3>>();
    m.color.jitter = j.at("color_jitter").get<std::array<int, 3>>();
    return m;
}

// Deep merge: object values merge recursively, everything else overwrites.
void merge_json(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (base.contains(it.key()))
            merge_json(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

json parse_override_value(const std::string& text) {
    json v = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (v.is_discarded()) return json(text); // fall back to string
    return v;
}

} // namespace

RunConfig RunConfig::desk_defaults() {
    RunConfig c;
    c.generator.palette = default_palette();
    c.generator.group_targets = default_group_targets();
    c.ladder = LevelLadder::defaults();
    return c;
}

json generator_config_to_json(const GeneratorConfig& g) {
    json palette = json::array();
    for (const MaterialSpec& m : (g.palette.empty() ? default_palette() : g.palette))
        palette.push_back(material_to_json(m));
    return json{{"image_size", g.image_size},
                {"n_stirs", g.n_stirs},
                {"num_samples", g.num_samples},
                {"purity_lo", g.purity_lo},
                {"purity_hi", g.purity_hi},
                {"group_targets", g.group_targets},
                {"group_jitter", g.group_jitter},
                {"granule_count_lo", g.granule_count_lo},
                {"granule_count_hi", g.granule_count_hi},
                {"copper_radius_lo", g.copper_radius_lo},
                {"copper_radius_hi", g.copper_radius_hi},
                {"impurity_radius_lo", g.impurity_radius_lo},
                {"impurity_radius_hi", g.impurity_radius_hi},
                {"thickness_lo", g.thickness_lo},
                {"thickness_hi", g.thickness_hi},
                {"shade_lo", g.shade_lo},
                {"shade_hi", g.shade_hi},
                {"palette", palette},
                {"split_group_ratio", g.split_group_ratio},
                {"seed", g.seed}};
}

GeneratorConfig generator_config_from_json(const json& j) {
    GeneratorConfig g;
    g.image_size = j.value("image_size", g.image_size);
    g.n_stirs = j.value("n_stirs", g.n_stirs);
    g.num_samples = j.value("num_samples", g.num_samples);
    g.purity_lo = j.value("purity_lo", g.purity_lo);
    g.purity_hi = j.value("purity_hi", g.purity_hi);
    g.group_targets = j.value("group_targets", g.group_targets);
    g.group_jitter = j.value("group_jitter", g.group_jitter);
    g.granule_count_lo = j.value("granule_count_lo", g.granule_count_lo);
    g.granule_count_hi = j.value("granule_count_hi", g.granule_count_hi);
    g.copper_radius_lo = j.value("copper_radius_lo", g.copper_radius_lo);
    g.copper_radius_hi = j.value("copper_radius_hi", g.copper_radius_hi);
    g.impurity_radius_lo = j.value("impurity_radius_lo", g.impurity_radius_lo);
    g.impurity_radius_hi = j.value("impurity_radius_hi", g.impurity_radius_hi);
    g.thickness_lo = j.value("thickness_lo", g.thickness_lo);
    g.thickness_hi = j.value("thickness_hi", g.thickness_hi);
    g.shade_lo = j.value("shade_lo", g.shade_lo);
    g.shade_hi = j.value("shade_hi", g.shade_hi);
    if (j.contains("palette")) {
        g.palette.clear();
        for (const json& m : j.at("palette")) g.palette.push_back(material_from_json(m));
    }
    g.split_group_ratio = j.value("split_group_ratio", g.split_group_ratio);
    g.seed = j.value("seed", g.seed);
    return g;
}

std::string generator_config_digest(const GeneratorConfig& g) {
    return sha256_hex(generator_config_to_json(g).dump());
}

json ladder_to_json(const LevelLadder& l) {
    return json{{"num_levels", l.num_levels}, {"thresholds", l.thresholds}};
}

LevelLadder ladder_from_json(const json& j) {
    LevelLadder l;
    l.num_levels = j.at("num_levels").get<int>();
    l.thresholds = j.at("thresholds").get<std::vector<double>>();
    return l;
}

json run_config_to_json(const RunConfig& c) {
    return json{{"generator", generator_config_to_json(c.generator)},
                {"train", train_config_to_json(c.train)},
                {"ladder", ladder_to_json(c.ladder)}};
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c = RunConfig::desk_defaults();
    if (j.contains("generator")) c.generator = generator_config_from_json(j.at("generator"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("ladder")) c.ladder = ladder_from_json(j.at("ladder"));
    return c;
}

std::string run_config_digest(const RunConfig& c) {
    return sha256_hex(run_config_to_json(c).dump());
}

RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides) {
    json effective = run_config_to_json(RunConfig::desk_defaults());
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        check(in.good(), "config: cannot open " + config_path);
        json file = json::parse(in, nullptr, /*allow_exceptions=*/false);
        check(!file.is_discarded(), "config: invalid JSON in " + config_path);
        merge_json(effective, file);
    }
    for (const std::string& ov : overrides) {
        size_t eq = ov.find('=');
        check(eq != std::string::npos && eq > 0, "override must look like path.key=value: " + ov);
        std::string path = ov.substr(0, eq);
        json value = parse_override_value(ov.substr(eq + 1));
        json* node = &effective;
        size_t start = 0;
        while (true) {
            size_t dot = path.find('.', start);
            std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
            check(!key.empty(), "override has an empty path segment: " + ov);
            if (dot == std::string::npos) {
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
    return run_config_from_json(effective);
}

} // namespace cugr
