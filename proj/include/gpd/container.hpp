#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace gpd {

// On-disk container: magic, length-prefixed JSON header, then named blocks of
// little-endian float64. Used for cities, checkpoints, prompt encoders and
// the diffusion model itself.
struct Container {
    nlohmann::json header;
    std::vector<std::pair<std::string, std::vector<double>>> blocks;

    const std::vector<double>& block(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

}  // namespace gpd
