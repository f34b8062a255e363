#pragma once

#include "cugr/ladder.hpp"
#include "cugr/scene_sim.hpp"
#include "cugr/trainer.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cugr {

// Merged view of everything a run needs. Serialized with every artifact;
// the digest of the effective config identifies what produced what.
struct RunConfig {
    GeneratorConfig generator;
    TrainConfig train;
    LevelLadder ladder;

    // Desk-scale defaults: 128x128 frames, n = 16 stirs, 66 samples in
    // eleven grade groups split 8:2:1.
    static RunConfig desk_defaults();
};

nlohmann::json generator_config_to_json(const GeneratorConfig& g);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
std::string generator_config_digest(const GeneratorConfig& g);

nlohmann::json ladder_to_json(const LevelLadder& l);
LevelLadder ladder_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
std::string run_config_digest(const RunConfig& c);

// Load desk defaults, then optionally merge a JSON config file, then apply
// dotted-path overrides of the form "generator.n_stirs=32".
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides);

} // namespace cugr
