#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gpd/matrix.hpp"

namespace gpd {

// Half-open range of timesteps.
struct TimeSpan {
    long begin = 0;
    long end = 0;
    long length() const { return end - begin; }
};

// Immutable graph of regions, each carrying a time series. An optional access
// guard blocks reads at or past a timestep; the evaluation split of a target
// city is guarded while prompts and the diffusion model are built.
class SpatioTemporalGraph {
  public:
    SpatioTemporalGraph(std::vector<std::string> node_ids, std::vector<uint8_t> adjacency,
                        Matrix series, int interval_minutes);

    int node_count() const { return static_cast<int>(node_ids_.size()); }
    long timesteps() const { return series_->cols; }
    int interval_minutes() const { return interval_minutes_; }
    int steps_per_day() const { return 1440 / interval_minutes_; }

    const std::vector<std::string>& node_ids() const { return node_ids_; }
    int node_index(const std::string& id) const;  // throws on unknown id
    bool has_node(const std::string& id) const;

    bool edge(int i, int j) const { return adjacency_[static_cast<size_t>(i) * node_count() + j] != 0; }
    const std::vector<uint8_t>& adjacency() const { return adjacency_; }

    double value(int node, long t) const;
    std::vector<double> series_window(int node, long t0, long t1) const;
    // Whole-matrix access; refuses when a guard is set.
    const Matrix& series() const;

    // Returns a copy whose accessors throw TripwireError for t >= limit.
    SpatioTemporalGraph with_guard(long first_blocked_timestep) const;
    bool guarded() const { return guard_ >= 0; }
    long guard_limit() const { return guard_; }

    bool operator==(const SpatioTemporalGraph& o) const;

  private:
    void check_guard(long t) const;

    std::vector<std::string> node_ids_;
    std::vector<uint8_t> adjacency_;  // row-major node_count x node_count
    std::shared_ptr<const Matrix> series_;
    int interval_minutes_;
    long guard_ = -1;
};

struct WindowedSample {
    std::string region_id;
    std::vector<double> history;  // length L_hist
    std::vector<double> target;   // length n
};

struct SyntheticCitySpec {
    int region_count = 0;
    int pattern_count = 0;
    double noise_sigma = 0.0;
    double edge_probability = 0.0;
    int period = 0;            // timesteps per pattern cycle
    long total_timesteps = 0;
    uint64_t seed = 0;
    int interval_minutes = 60;

    void validate() const;
};

struct SyntheticPair {
    SpatioTemporalGraph source;
    SpatioTemporalGraph target;
    std::map<std::string, int> pattern_assignment;  // covers both cities
};

// One city drawn from the pattern library of `spec.seed`. Cities generated
// from the same seed, pattern_count and period share their library, so a
// source/target pair with different region counts stays comparable.
SpatioTemporalGraph generate_synthetic_city(const SyntheticCitySpec& spec,
                                            const std::string& city_tag,
                                            std::map<std::string, int>* pattern_assignment);

SyntheticPair generate_synthetic_pair(const SyntheticCitySpec& spec);

// Sliding windows of stride 1 inside [span.begin, span.end). Errors when the
// span admits no window.
std::vector<WindowedSample> window_dataset(const SpatioTemporalGraph& g, const std::string& region,
                                           int l_hist, int horizon, TimeSpan span);

// First `few_shot_days` of the series vs. the remainder.
std::pair<TimeSpan, TimeSpan> split_few_shot(const SpatioTemporalGraph& g, int few_shot_days);

void save_graph(const std::filesystem::path& path, const SpatioTemporalGraph& g);
SpatioTemporalGraph load_graph(const std::filesystem::path& path);

// Plain CSV (rows = timesteps, columns = regions, header row = region ids).
// Produces a graph with no edges.
SpatioTemporalGraph load_graph_csv(const std::filesystem::path& path, int interval_minutes);

}  // namespace gpd
