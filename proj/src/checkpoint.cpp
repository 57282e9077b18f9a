#include "gpd/checkpoint.hpp"

#include <unordered_set>

#include "gpd/common.hpp"
#include "gpd/container.hpp"

namespace gpd {

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::spatial: return "spatial";
        case LayerKind::temporal: return "temporal";
        case LayerKind::other: return "other";
    }
    throw ValidationError("bad LayerKind");
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "spatial") return LayerKind::spatial;
    if (s == "temporal") return LayerKind::temporal;
    if (s == "other") return LayerKind::other;
    throw ParseError("unknown layer kind '" + s + "'");
}

long LayerDescriptor::numel() const {
    long n = 1;
    for (int d : shape) n *= d;
    return n;
}

long LayerDescriptor::total_numel() const { return count * numel(); }

long total_param_count(const std::vector<LayerDescriptor>& descriptors) {
    long total = 0;
    for (const auto& d : descriptors) total += d.total_numel();
    return total;
}

void validate_descriptors(const std::vector<LayerDescriptor>& descriptors) {
    if (descriptors.empty()) throw ValidationError("descriptor list is empty");
    std::unordered_set<std::string> names;
    for (const auto& d : descriptors) {
        if (d.name.empty()) throw ValidationError("descriptor with empty name");
        if (!names.insert(d.name).second)
            throw ValidationError("duplicate descriptor name '" + d.name + "'");
        if (d.count < 1) throw ValidationError("descriptor '" + d.name + "' has count < 1");
        if (d.shape.empty()) throw ValidationError("descriptor '" + d.name + "' has empty shape");
        for (int dim : d.shape)
            if (dim < 1) throw ValidationError("descriptor '" + d.name + "' has non-positive dim");
    }
}

void CheckpointRecord::validate() const {
    validate_descriptors(descriptors);
    const long want = total_param_count(descriptors);
    if (static_cast<long>(flat_params.size()) != want)
        throw ValidationError("checkpoint '" + region_id + "' has " +
                              std::to_string(flat_params.size()) + " params, descriptors say " +
                              std::to_string(want));
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointRecord& ckpt) {
    ckpt.validate();
    Container c;
    c.header["kind"] = "checkpoint";
    c.header["region_id"] = ckpt.region_id;
    c.header["train_loss"] = ckpt.train_loss;
    c.header["metadata"] = ckpt.metadata;
    auto& descs = c.header["descriptors"] = nlohmann::json::array();
    for (const auto& d : ckpt.descriptors)
        descs.push_back({{"name", d.name},
                         {"shape", d.shape},
                         {"count", d.count},
                         {"kind", to_string(d.kind)}});
    c.blocks.emplace_back("flat_params", ckpt.flat_params);
    write_container(path, c);
}

CheckpointRecord load_checkpoint(const std::filesystem::path& path) {
    Container c = read_container(path);
    CheckpointRecord ckpt;
    try {
        if (c.header.at("kind").get<std::string>() != "checkpoint")
            throw ParseError("wrong container kind (field 'kind') in " + path.string());
        ckpt.region_id = c.header.at("region_id").get<std::string>();
        ckpt.train_loss = c.header.at("train_loss").get<double>();
        if (c.header.contains("metadata"))
            ckpt.metadata = c.header.at("metadata").get<std::map<std::string, std::string>>();
        for (const auto& j : c.header.at("descriptors")) {
            LayerDescriptor d;
            d.name = j.at("name").get<std::string>();
            d.shape = j.at("shape").get<std::vector<int>>();
            d.count = j.at("count").get<int>();
            d.kind = layer_kind_from_string(j.at("kind").get<std::string>());
            ckpt.descriptors.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad checkpoint header in " + path.string() + ": " + e.what());
    }
    ckpt.flat_params = c.block("flat_params");
    ckpt.validate();
    return ckpt;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& root, const std::string& city,
                                      const std::string& region) {
    return root / city / (region + ".ckpt");
}

}  // namespace gpd
