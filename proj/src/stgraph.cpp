#include "gpd/stgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "gpd/common.hpp"
#include "gpd/container.hpp"
#include "gpd/rng.hpp"

namespace gpd {

SpatioTemporalGraph::SpatioTemporalGraph(std::vector<std::string> node_ids,
                                         std::vector<uint8_t> adjacency, Matrix series,
                                         int interval_minutes)
    : node_ids_(std::move(node_ids)),
      adjacency_(std::move(adjacency)),
      series_(std::make_shared<Matrix>(std::move(series))),
      interval_minutes_(interval_minutes) {
    const size_t n = node_ids_.size();
    if (n < 2) throw ValidationError("graph needs at least 2 nodes, got " + std::to_string(n));
    if (adjacency_.size() != n * n)
        throw ValidationError("adjacency size " + std::to_string(adjacency_.size()) +
                              " does not match " + std::to_string(n) + " nodes");
    if (series_->rows != static_cast<int>(n))
        throw ValidationError("series has " + std::to_string(series_->rows) + " rows for " +
                              std::to_string(n) + " nodes");
    if (series_->cols < 1) throw ValidationError("series has no timesteps");
    if (interval_minutes_ <= 0 || 1440 % interval_minutes_ != 0)
        throw ValidationError("interval_minutes must be positive and divide 1440, got " +
                              std::to_string(interval_minutes_));
    if (!series_->all_finite()) throw ValidationError("series contains non-finite values");
    std::unordered_set<std::string> seen;
    for (const auto& id : node_ids_)
        if (!seen.insert(id).second) throw ValidationError("duplicate node id '" + id + "'");
    for (size_t i = 0; i < n; ++i) {
        if (adjacency_[i * n + i] != 0)
            throw ValidationError("adjacency diagonal must be zero (node " + std::to_string(i) + ")");
        for (size_t j = i + 1; j < n; ++j)
            if (adjacency_[i * n + j] != adjacency_[j * n + i])
                throw ValidationError("adjacency not symmetric at (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
    }
}

int SpatioTemporalGraph::node_index(const std::string& id) const {
    auto it = std::find(node_ids_.begin(), node_ids_.end(), id);
    if (it == node_ids_.end()) throw ValidationError("unknown region id '" + id + "'");
    return static_cast<int>(it - node_ids_.begin());
}

bool SpatioTemporalGraph::has_node(const std::string& id) const {
    return std::find(node_ids_.begin(), node_ids_.end(), id) != node_ids_.end();
}

void SpatioTemporalGraph::check_guard(long t) const {
    if (guard_ >= 0 && t >= guard_)
        throw TripwireError("read of timestep " + std::to_string(t) +
                            " blocked by guard at " + std::to_string(guard_));
}

double SpatioTemporalGraph::value(int node, long t) const {
    if (node < 0 || node >= node_count()) throw ValidationError("node index out of range");
    if (t < 0 || t >= timesteps()) throw ValidationError("timestep out of range");
    check_guard(t);
    return (*series_)(node, static_cast<int>(t));
}

std::vector<double> SpatioTemporalGraph::series_window(int node, long t0, long t1) const {
    if (node < 0 || node >= node_count()) throw ValidationError("node index out of range");
    if (t0 < 0 || t1 > timesteps() || t0 >= t1) throw ValidationError("bad window [" +
        std::to_string(t0) + "," + std::to_string(t1) + ")");
    check_guard(t1 - 1);
    const double* row = series_->row(node);
    return std::vector<double>(row + t0, row + t1);
}

const Matrix& SpatioTemporalGraph::series() const {
    if (guard_ >= 0) throw TripwireError("whole-series access blocked while a guard is set");
    return *series_;
}

SpatioTemporalGraph SpatioTemporalGraph::with_guard(long first_blocked_timestep) const {
    if (first_blocked_timestep < 0 || first_blocked_timestep > timesteps())
        throw ValidationError("guard outside series range");
    SpatioTemporalGraph g = *this;
    g.guard_ = first_blocked_timestep;
    return g;
}

bool SpatioTemporalGraph::operator==(const SpatioTemporalGraph& o) const {
    return node_ids_ == o.node_ids_ && adjacency_ == o.adjacency_ &&
           interval_minutes_ == o.interval_minutes_ && *series_ == *o.series_;
}

void SyntheticCitySpec::validate() const {
    if (region_count < 2) throw ValidationError("region_count must be >= 2");
    if (pattern_count < 1) throw ValidationError("pattern_count must be >= 1");
    if (pattern_count > region_count) throw ValidationError("pattern_count exceeds region_count");
    if (noise_sigma < 0) throw ValidationError("noise_sigma must be non-negative");
    if (edge_probability < 0 || edge_probability > 1)
        throw ValidationError("edge_probability must lie in [0,1]");
    if (period < 1) throw ValidationError("period must be >= 1");
    if (total_timesteps < 18)  // default history 12 + horizon 6
        throw ValidationError("total_timesteps must cover history + horizon (>= 18)");
    if (interval_minutes <= 0 || 1440 % interval_minutes != 0)
        throw ValidationError("interval_minutes must be positive and divide 1440");
}

namespace {

struct PatternCoef {
    double a, phi, b, psi;
};

// One draw order, one stream: the library depends only on seed and
// pattern_count, never on the city consuming it.
std::vector<PatternCoef> pattern_library(const SyntheticCitySpec& spec) {
    Rng rng(derive_seed(spec.seed, "pattern-lib"));
    std::vector<PatternCoef> lib(spec.pattern_count);
    for (auto& c : lib) {
        c.a = rng.uniform(0.8, 1.6);
        c.phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        c.b = rng.uniform(0.2, 0.6);
        c.psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return lib;
}

std::string region_name(const std::string& tag, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d", tag.c_str(), index);
    return buf;
}

}  // namespace

SpatioTemporalGraph generate_synthetic_city(const SyntheticCitySpec& spec,
                                            const std::string& city_tag,
                                            std::map<std::string, int>* pattern_assignment) {
    spec.validate();
    const auto lib = pattern_library(spec);
    const int n = spec.region_count;
    const long t_total = spec.total_timesteps;

    // Pattern waveforms are computed once so zero-noise regions sharing a
    // pattern get bit-identical series.
    Matrix base(spec.pattern_count, static_cast<int>(t_total));
    const double w1 = 2.0 * std::numbers::pi / spec.period;
    for (int p = 0; p < spec.pattern_count; ++p)
        for (long t = 0; t < t_total; ++t)
            base(p, static_cast<int>(t)) =
                lib[p].a * std::sin(w1 * t + lib[p].phi) + lib[p].b * std::sin(2.0 * w1 * t + lib[p].psi);

    std::vector<std::string> ids(n);
    Matrix series(n, static_cast<int>(t_total));
    Rng noise(derive_seed(spec.seed, "noise-" + city_tag));
    for (int r = 0; r < n; ++r) {
        ids[r] = region_name(city_tag, r);
        const int p = r % spec.pattern_count;
        if (pattern_assignment) (*pattern_assignment)[ids[r]] = p;
        for (long t = 0; t < t_total; ++t) {
            double v = base(p, static_cast<int>(t));
            if (spec.noise_sigma > 0) v += spec.noise_sigma * noise.gauss();
            series(r, static_cast<int>(t)) = v;
        }
    }

    std::vector<uint8_t> adj(static_cast<size_t>(n) * n, 0);
    Rng edges(derive_seed(spec.seed, "edges-" + city_tag));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (edges.uniform() < spec.edge_probability) {
                adj[static_cast<size_t>(i) * n + j] = 1;
                adj[static_cast<size_t>(j) * n + i] = 1;
            }

    return SpatioTemporalGraph(std::move(ids), std::move(adj), std::move(series),
                               spec.interval_minutes);
}

SyntheticPair generate_synthetic_pair(const SyntheticCitySpec& spec) {
    std::map<std::string, int> assignment;
    auto source = generate_synthetic_city(spec, "src", &assignment);
    auto target = generate_synthetic_city(spec, "tgt", &assignment);
    return SyntheticPair{std::move(source), std::move(target), std::move(assignment)};
}

std::vector<WindowedSample> window_dataset(const SpatioTemporalGraph& g, const std::string& region,
                                           int l_hist, int horizon, TimeSpan span) {
    if (l_hist < 1 || horizon < 1) throw ValidationError("window lengths must be >= 1");
    if (span.begin < 0 || span.end > g.timesteps() || span.begin >= span.end)
        throw ValidationError("span [" + std::to_string(span.begin) + "," +
                              std::to_string(span.end) + ") outside series");
    const long count = span.length() - l_hist - horizon + 1;
    if (count < 1)
        throw ValidationError("span of " + std::to_string(span.length()) +
                              " steps admits no window of " + std::to_string(l_hist) + "+" +
                              std::to_string(horizon));
    const int node = g.node_index(region);
    std::vector<WindowedSample> out;
    out.reserve(count);
    for (long t0 = span.begin; t0 + l_hist + horizon <= span.end; ++t0) {
        WindowedSample s;
        s.region_id = region;
        s.history = g.series_window(node, t0, t0 + l_hist);
        s.target = g.series_window(node, t0 + l_hist, t0 + l_hist + horizon);
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<TimeSpan, TimeSpan> split_few_shot(const SpatioTemporalGraph& g, int few_shot_days) {
    if (few_shot_days < 1) throw ValidationError("few_shot_days must be >= 1");
    const long cut = static_cast<long>(few_shot_days) * g.steps_per_day();
    if (cut >= g.timesteps())
        throw ValidationError("few-shot split of " + std::to_string(cut) +
                              " steps leaves no evaluation span (series has " +
                              std::to_string(g.timesteps()) + ")");
    return {TimeSpan{0, cut}, TimeSpan{cut, g.timesteps()}};
}

void save_graph(const std::filesystem::path& path, const SpatioTemporalGraph& g) {
    Container c;
    c.header["kind"] = "city";
    c.header["node_ids"] = g.node_ids();
    c.header["interval_minutes"] = g.interval_minutes();
    c.header["timesteps"] = g.timesteps();
    std::vector<std::array<int, 2>> edges;
    const int n = g.node_count();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (g.edge(i, j)) edges.push_back({i, j});
    c.header["edges"] = edges;
    // Guards are session state, not data; refuse to persist a guarded view.
    c.blocks.emplace_back("series", g.series().a);
    write_container(path, c);
}

SpatioTemporalGraph load_graph(const std::filesystem::path& path) {
    Container c = read_container(path);
    auto need = [&](const char* field) -> const nlohmann::json& {
        if (!c.header.contains(field))
            throw ParseError("missing field '" + std::string(field) + "' in " + path.string());
        return c.header.at(field);
    };
    if (need("kind").get<std::string>() != "city")
        throw ParseError("wrong container kind (field 'kind') in " + path.string());
    std::vector<std::string> ids;
    long timesteps = 0;
    int interval = 0;
    try {
        ids = need("node_ids").get<std::vector<std::string>>();
        timesteps = need("timesteps").get<long>();
        interval = need("interval_minutes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad header field in " + path.string() + ": " + e.what());
    }
    const size_t n = ids.size();
    std::vector<uint8_t> adj(n * n, 0);
    for (const auto& e : need("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw ParseError("bad entry in field 'edges' in " + path.string());
        const long i = e[0].get<long>(), j = e[1].get<long>();
        if (i < 0 || j < 0 || i >= static_cast<long>(n) || j >= static_cast<long>(n))
            throw ParseError("edge index out of range (field 'edges') in " + path.string());
        adj[static_cast<size_t>(i) * n + j] = 1;
    }
    const auto& flat = c.block("series");
    if (flat.size() != n * static_cast<size_t>(timesteps))
        throw ParseError("series block length " + std::to_string(flat.size()) +
                         " does not match header shape in " + path.string());
    Matrix series(static_cast<int>(n), static_cast<int>(timesteps));
    series.a = flat;
    return SpatioTemporalGraph(std::move(ids), std::move(adj), std::move(series), interval);
}

SpatioTemporalGraph load_graph_csv(const std::filesystem::path& path, int interval_minutes) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV " + path.string());
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    const auto ids = split(line);
    const size_t n = ids.size();
    std::vector<std::vector<double>> rows;  // one entry per timestep
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != n)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(n) + " columns, got " + std::to_string(cells.size()));
        std::vector<double> row(n);
        for (size_t j = 0; j < n; ++j) {
            try {
                size_t used = 0;
                row[j] = std::stod(cells[j], &used);
                if (used != cells[j].size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": bad numeric cell '" + cells[j] + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("CSV has no data rows: " + path.string());
    Matrix series(static_cast<int>(n), static_cast<int>(rows.size()));
    for (size_t t = 0; t < rows.size(); ++t)
        for (size_t j = 0; j < n; ++j) series(static_cast<int>(j), static_cast<int>(t)) = rows[t][j];
    std::vector<uint8_t> adj(n * n, 0);
    return SpatioTemporalGraph(ids, std::move(adj), std::move(series), interval_minutes);
}

}  // namespace gpd
