#include "gpd/container.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "gpd/common.hpp"

namespace gpd {

namespace {
constexpr char kMagic[4] = {'G', 'P', 'D', 'C'};
}

const std::vector<double>& Container::block(const std::string& name) const {
    for (const auto& [n, b] : blocks)
        if (n == name) return b;
    throw ParseError("container: missing block '" + name + "'");
}

void write_container(const std::filesystem::path& path, const Container& c) {
    nlohmann::json header = c.header;
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& [name, data] : c.blocks)
        blocks.push_back({{"name", name}, {"len", data.size()}});
    header["blocks"] = blocks;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path.string());
    const std::string hs = header.dump();
    const uint64_t hlen = hs.size();
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, data] : c.blocks)
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw ParseError("short write: " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(path.string() + ": bad magic (field 'magic')");
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!in || hlen == 0 || hlen > (1ull << 30))
        throw ParseError(path.string() + ": bad header length (field 'header_len')");
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw ParseError(path.string() + ": truncated header (field 'header')");

    Container c;
    try {
        c.header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": header is not valid JSON: " + e.what());
    }
    if (!c.header.contains("blocks") || !c.header["blocks"].is_array())
        throw ParseError(path.string() + ": missing or invalid field 'blocks'");
    for (const auto& b : c.header["blocks"]) {
        if (!b.contains("name") || !b.contains("len"))
            throw ParseError(path.string() + ": block entry missing 'name' or 'len'");
        const std::string name = b["name"].get<std::string>();
        const uint64_t len = b["len"].get<uint64_t>();
        std::vector<double> data(len);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(len * sizeof(double)));
        if (!in) throw ParseError(path.string() + ": truncated block '" + name + "'");
        c.blocks.emplace_back(name, std::move(data));
    }
    return c;
}

}  // namespace gpd
