#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpd/matrix.hpp"

namespace gpd {

// The condition handed to the diffusion model: one spatial and one temporal
// embedding per region, equal length E.
struct RegionPrompt {
    std::string region_id;
    std::vector<double> spatial;
    std::vector<double> temporal;

    int dim() const { return static_cast<int>(spatial.size()); }
    bool operator==(const RegionPrompt&) const = default;
};

RegionPrompt assemble_prompt(const std::string& region_id, std::vector<double> spatial,
                             std::vector<double> temporal);

// 2 x E: row 0 spatial, row 1 temporal.
Matrix prompt_matrix(const RegionPrompt& p);

// JSON store, one file per city: region -> {"spatial": [...], "temporal": [...]}.
void save_prompts(const std::filesystem::path& path, const std::vector<RegionPrompt>& prompts);
std::vector<RegionPrompt> load_prompts(const std::filesystem::path& path);

}  // namespace gpd
