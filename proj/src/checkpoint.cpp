#include "cugr/checkpoint.hpp"

#include "cugr/common.hpp"
#include "cugr/digest.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

using nlohmann::json;

namespace cugr {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'G', 'R', 'C', 'K', 'P', '1'};

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_tensor_block(std::ostream& out, const nn::Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

void read_tensor_block(std::istream& in, nn::Tensor& t) {
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

json meta_to_json(const CheckpointMeta& m) {
    return json{{"kind", m.kind},
                {"phase_tag", m.phase_tag},
                {"epoch", m.epoch},
                {"train_config_digest", m.train_config_digest},
                {"topology", m.topology},
                {"has_velocity", m.has_velocity},
                {"param_count", m.param_count},
                {"params_digest", m.params_digest}};
}

CheckpointMeta meta_from_json(const json& j) {
    CheckpointMeta m;
    m.kind = j.at("kind").get<std::string>();
    m.phase_tag = j.at("phase_tag").get<std::string>();
    m.epoch = j.at("epoch").get<int>();
    m.train_config_digest = j.at("train_config_digest").get<std::string>();
    m.topology = j.at("topology");
    m.has_velocity = j.at("has_velocity").get<bool>();
    m.param_count = j.at("param_count").get<int>();
    m.params_digest = j.at("params_digest").get<std::string>();
    return m;
}

} // namespace

std::string params_digest(const std::vector<nn::Param*>& params) {
    Digest d;
    for (const nn::Param* p : params)
        d.update(p->value.data.data(), p->value.data.size() * sizeof(float));
    return d.hex();
}

void save_checkpoint(const std::string& path, CheckpointMeta meta,
                     const std::vector<nn::Param*>& params) {
    meta.params_digest = params_digest(params);
    meta.param_count = static_cast<int>(params.size());
    std::string header = meta_to_json(meta).dump();

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        check(out.good(), "checkpoint: cannot open " + tmp);
        out.write(kMagic, sizeof(kMagic));
        write_u32(out, static_cast<uint32_t>(header.size()));
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (const nn::Param* p : params) {
            write_u32(out, static_cast<uint32_t>(p->name.size()));
            out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
            write_u32(out, static_cast<uint32_t>(p->value.shape.size()));
            for (int d : p->value.shape) write_u32(out, static_cast<uint32_t>(d));
            write_tensor_block(out, p->value);
        }
        if (meta.has_velocity)
            for (const nn::Param* p : params) write_tensor_block(out, p->vel);
        check(out.good(), "checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

namespace {

CheckpointMeta open_checkpoint(std::ifstream& in, const std::string& path) {
    check(in.good(), "checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    check(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
          "checkpoint: bad magic in " + path);
    uint32_t hlen = read_u32(in);
    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    check(in.good(), "checkpoint: truncated header in " + path);
    return meta_from_json(json::parse(header));
}

} // namespace

CheckpointMeta load_checkpoint_meta(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return open_checkpoint(in, path);
}

void load_checkpoint_params(const std::string& path, const std::vector<nn::Param*>& params) {
    std::ifstream in(path, std::ios::binary);
    CheckpointMeta meta = open_checkpoint(in, path);
    for (nn::Param* p : params) {
        uint32_t nlen = read_u32(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        check(name == p->name, "checkpoint: parameter order mismatch, expected " + p->name +
                                   " got " + name + " in " + path);
        uint32_t ndim = read_u32(in);
        std::vector<int> shape(ndim);
        for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(read_u32(in));
        check(shape == p->value.shape, "checkpoint: shape mismatch for " + p->name);
        read_tensor_block(in, p->value);
    }
    if (meta.has_velocity)
        for (nn::Param* p : params) read_tensor_block(in, p->vel);
    check(in.good(), "checkpoint: truncated data in " + path);
    check(params_digest(params) == meta.params_digest,
          "checkpoint: parameter digest mismatch in " + path);
}

json seg_topology_to_json(const SegTopology& t) {
    return json{{"stem", t.stem},         {"enc1", t.enc1},
                {"enc2", t.enc2},         {"enc3", t.enc3},
                {"ctx1", t.ctx1},         {"ctx2", t.ctx2},
                {"ctx3", t.ctx3},         {"skip", t.skip},
                {"dec", t.dec},           {"features", t.features},
                {"classes", t.classes},   {"downsample_factor", t.downsample_factor}};
}

SegTopology seg_topology_from_json(const json& j) {
    SegTopology t;
    t.stem = j.at("stem").get<int>();
    t.enc1 = j.at("enc1").get<int>();
    t.enc2 = j.at("enc2").get<int>();
    t.enc3 = j.at("enc3").get<int>();
    t.ctx1 = j.at("ctx1").get<int>();
    t.ctx2 = j.at("ctx2").get<int>();
    t.ctx3 = j.at("ctx3").get<int>();
    t.skip = j.at("skip").get<int>();
    t.dec = j.at("dec").get<int>();
    t.features = j.at("features").get<int>();
    t.classes = j.at("classes").get<int>();
    t.downsample_factor = j.at("downsample_factor").get<int>();
    return t;
}

json purity_topology_to_json(const PurityTopology& t) {
    return json{{"n", t.n},
                {"image_size", t.image_size},
                {"num_levels", t.num_levels},
                {"fuse_seg_features", t.fuse_seg_features},
                {"seg_feature_channels", t.seg_feature_channels},
                {"area_hidden", t.area_hidden},
                {"trunk1", t.trunk1},
                {"trunk2", t.trunk2},
                {"trunk3", t.trunk3}};
}

PurityTopology purity_topology_from_json(const json& j) {
    PurityTopology t;
    t.n = j.at("n").get<int>();
    t.image_size = j.at("image_size").get<int>();
    t.num_levels = j.at("num_levels").get<int>();
    t.fuse_seg_features = j.at("fuse_seg_features").get<bool>();
    t.seg_feature_channels = j.at("seg_feature_channels").get<int>();
    t.area_hidden = j.at("area_hidden").get<int>();
    t.trunk1 = j.at("trunk1").get<int>();
    t.trunk2 = j.at("trunk2").get<int>();
    t.trunk3 = j.at("trunk3").get<int>();
    return t;
}

void save_seg_checkpoint(const std::string& path, SegModel& model, const std::string& phase_tag,
                         int epoch, const std::string& train_config_digest) {
    CheckpointMeta meta;
    meta.kind = "seg";
    meta.phase_tag = phase_tag;
    meta.epoch = epoch;
    meta.train_config_digest = train_config_digest;
    meta.topology = seg_topology_to_json(model.topology());
    save_checkpoint(path, meta, model.params());
}

SegModel load_seg_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
    CheckpointMeta meta = load_checkpoint_meta(path);
    check(meta.kind == "seg", "checkpoint: expected kind seg in " + path);
    SegModel model(seg_topology_from_json(meta.topology), /*init_seed=*/0);
    load_checkpoint_params(path, model.params());
    if (meta_out) *meta_out = meta;
    return model;
}

CheckpointMeta verify_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    CheckpointMeta meta = open_checkpoint(in, path);
    Digest digest;
    for (int i = 0; i < meta.param_count; ++i) {
        uint32_t nlen = read_u32(in);
        check(in.good() && nlen < 4096, "checkpoint: corrupt parameter name in " + path);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        uint32_t ndim = read_u32(in);
        check(in.good() && ndim <= 8, "checkpoint: corrupt shape in " + path);
        size_t elems = 1;
        for (uint32_t d = 0; d < ndim; ++d) elems *= read_u32(in);
        std::vector<float> block(elems);
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(elems * sizeof(float)));
        check(in.good(), "checkpoint: truncated data for " + name + " in " + path);
        digest.update(block.data(), elems * sizeof(float));
    }
    check(digest.hex() == meta.params_digest,
          "checkpoint: parameter digest mismatch in " + path);
    return meta;
}

void save_purity_checkpoint(const std::string& path, PurityModel& model,
                            const std::string& phase_tag, int epoch,
                            const std::string& train_config_digest) {
    CheckpointMeta meta;
    meta.kind = "purity";
    meta.phase_tag = phase_tag;
    meta.epoch = epoch;
    meta.train_config_digest = train_config_digest;
    meta.topology = purity_topology_to_json(model.topology());
    save_checkpoint(path, meta, model.params());
}

PurityModel load_purity_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
    CheckpointMeta meta = load_checkpoint_meta(path);
    check(meta.kind == "purity", "checkpoint: expected kind purity in " + path);
    PurityModel model(purity_topology_from_json(meta.topology), /*init_seed=*/0);
    load_checkpoint_params(path, model.params());
    if (meta_out) *meta_out = meta;
    return model;
}

} // namespace cugr
