#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpd/checkpoint.hpp"
#include "gpd/params.hpp"
#include "gpd/stgraph.hpp"
#include "gpd/tape.hpp"

namespace gpd {

struct PredictorConfig {
    int hidden_dim = 32;
    int num_blocks = 2;
    int l_hist = 12;
    int horizon = 6;
    double learning_rate = 1e-2;
    int epochs = 300;
    uint64_t seed = 1;

    void validate() const;
};

// Per-region forecaster: an MLP over the region's own recent history with a
// learned region-identity embedding added to the hidden state, residual tanh
// blocks, and a linear head. Layer roles: the input projection reads the
// history (temporal), the identity embedding marks the region (spatial), the
// trunk and head are shared machinery (other).
class Predictor {
  public:
    explicit Predictor(const PredictorConfig& cfg);

    static std::vector<LayerDescriptor> layer_descriptors(const PredictorConfig& cfg);

    // Batched training-mode forward: histories (batch x l_hist) -> (batch x horizon).
    Tape::NodeId forward(Tape& tape, Tape::NodeId histories);

    std::vector<double> predict(const std::vector<double>& history) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const PredictorConfig& config() const { return cfg_; }

    std::vector<double> flat_params() const { return store_.flatten_values(); }
    void load_flat_params(const std::vector<double>& flat) { store_.load_values(flat); }

  private:
    PredictorConfig cfg_;
    ParamStore store_;
};

// Fits one region by full-batch MSE over every training window in `span`
// (whole series when span is empty) and returns the final-epoch parameters.
CheckpointRecord train_region(const SpatioTemporalGraph& g, const std::string& region,
                              const PredictorConfig& cfg, TimeSpan span = {0, 0});

// One record per region across all cities, all sharing one architecture.
std::vector<CheckpointRecord> prepare_source_checkpoints(
    const std::vector<SpatioTemporalGraph>& cities, const PredictorConfig& cfg);

void ensure_uniform_descriptors(const std::vector<CheckpointRecord>& checkpoints);

// Rebuilds the predictor a checkpoint was trained with (uses metadata).
PredictorConfig config_from_checkpoint(const CheckpointRecord& ckpt);

// Time-of-day mean profile over a few-shot prefix of a series.
class HistoricalAverage {
  public:
    HistoricalAverage(const std::vector<double>& few_shot_series, int steps_per_day);

    // Forecast for absolute timesteps [t_start, t_start + horizon).
    std::vector<double> forecast(long t_start, int horizon) const;
    const std::vector<double>& profile() const { return profile_; }

  private:
    std::vector<double> profile_;
};

struct ForecastMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::vector<double> mae_per_step;
    std::vector<double> rmse_per_step;
};

ForecastMetrics evaluate_forecasts(const Matrix& pred, const Matrix& truth);

// Runs a parameter vector through the architecture of `cfg` on each sample.
Matrix predict_windows(const PredictorConfig& cfg, const std::vector<double>& flat_params,
                       const std::vector<WindowedSample>& samples);
Matrix target_matrix(const std::vector<WindowedSample>& samples);

// Mean squared error of a candidate parameter vector on a sample set.
double mse_on_windows(const PredictorConfig& cfg, const std::vector<double>& flat_params,
                      const std::vector<WindowedSample>& samples);

}  // namespace gpd
