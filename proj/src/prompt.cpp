#include "gpd/prompt.hpp"

#include <cmath>
#include <fstream>

#include "gpd/common.hpp"

#include <nlohmann/json.hpp>

namespace gpd {

RegionPrompt assemble_prompt(const std::string& region_id, std::vector<double> spatial,
                             std::vector<double> temporal) {
    if (spatial.empty() || spatial.size() != temporal.size())
        throw ValidationError("prompt halves for '" + region_id + "' have lengths " +
                              std::to_string(spatial.size()) + " and " +
                              std::to_string(temporal.size()));
    for (double v : spatial)
        if (!std::isfinite(v)) throw ValidationError("non-finite spatial prompt for '" + region_id + "'");
    for (double v : temporal)
        if (!std::isfinite(v)) throw ValidationError("non-finite temporal prompt for '" + region_id + "'");
    return RegionPrompt{region_id, std::move(spatial), std::move(temporal)};
}

Matrix prompt_matrix(const RegionPrompt& p) {
    Matrix m(2, p.dim());
    std::copy(p.spatial.begin(), p.spatial.end(), m.row(0));
    std::copy(p.temporal.begin(), p.temporal.end(), m.row(1));
    return m;
}

void save_prompts(const std::filesystem::path& path, const std::vector<RegionPrompt>& prompts) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& p : prompts)
        j[p.region_id] = {{"spatial", p.spatial}, {"temporal", p.temporal}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(1) << "\n";
}

std::vector<RegionPrompt> load_prompts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad prompt file " + path.string() + ": " + e.what());
    }
    std::vector<RegionPrompt> out;
    try {
        for (const auto& [region, val] : j.items())
            out.push_back(assemble_prompt(region, val.at("spatial").get<std::vector<double>>(),
                                          val.at("temporal").get<std::vector<double>>()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad prompt entry in " + path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace gpd
