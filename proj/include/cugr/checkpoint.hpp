#pragma once

#include "cugr/nn/tensor.hpp"
#include "cugr/purity_net.hpp"
#include "cugr/seg_net.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace cugr {

struct CheckpointMeta {
    std::string kind;       // "seg" or "purity"
    std::string phase_tag;  // e.g. "phase1"
    int epoch = 0;
    std::string train_config_digest;
    nlohmann::json topology;
    bool has_velocity = true;
    int param_count = 0;
    std::string params_digest; // digest of the parameter values
};

// SHA-256 over the raw float bytes of all parameter values, in registry
// order. This is the identity used by the freeze audits and model cards.
std::string params_digest(const std::vector<nn::Param*>& params);

// Bit-exact binary checkpoints (parameters + momentum buffers), written
// atomically (temp file + rename).
void save_checkpoint(const std::string& path, CheckpointMeta meta,
                     const std::vector<nn::Param*>& params);
CheckpointMeta load_checkpoint_meta(const std::string& path);
void load_checkpoint_params(const std::string& path, const std::vector<nn::Param*>& params);

nlohmann::json seg_topology_to_json(const SegTopology& t);
SegTopology seg_topology_from_json(const nlohmann::json& j);
nlohmann::json purity_topology_to_json(const PurityTopology& t);
PurityTopology purity_topology_from_json(const nlohmann::json& j);

void save_seg_checkpoint(const std::string& path, SegModel& model, const std::string& phase_tag,
                         int epoch, const std::string& train_config_digest);
SegModel load_seg_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr);

void save_purity_checkpoint(const std::string& path, PurityModel& model,
                            const std::string& phase_tag, int epoch,
                            const std::string& train_config_digest);
PurityModel load_purity_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr);

// Re-reads the file and checks the recorded parameter digest against the
// stored blobs without constructing a model. Throws on any mismatch.
CheckpointMeta verify_checkpoint_file(const std::string& path);

} // namespace cugr
