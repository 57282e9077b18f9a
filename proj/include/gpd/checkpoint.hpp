#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gpd {

enum class LayerKind { spatial, temporal, other };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

// Shape and role of one group of identically-shaped tensors in a model.
struct LayerDescriptor {
    std::string name;
    std::vector<int> shape;
    int count = 1;  // how many layers share this shape
    LayerKind kind = LayerKind::other;

    long numel() const;        // product of shape
    long total_numel() const;  // count * numel()
    bool operator==(const LayerDescriptor&) const = default;
};

long total_param_count(const std::vector<LayerDescriptor>& descriptors);
void validate_descriptors(const std::vector<LayerDescriptor>& descriptors);

// A trained per-region model, flattened in descriptor order (row-major within
// each tensor).
struct CheckpointRecord {
    std::string region_id;
    std::vector<LayerDescriptor> descriptors;
    std::vector<double> flat_params;
    double train_loss = 0.0;
    std::map<std::string, std::string> metadata;

    void validate() const;
    bool operator==(const CheckpointRecord&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointRecord& ckpt);
CheckpointRecord load_checkpoint(const std::filesystem::path& path);

// Directory layout: <root>/<city>/<region>.ckpt
std::filesystem::path checkpoint_path(const std::filesystem::path& root, const std::string& city,
                                      const std::string& region);

}  // namespace gpd
