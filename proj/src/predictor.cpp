#include "gpd/predictor.hpp"

#include <cmath>
#include <cstdio>

#include "gpd/common.hpp"
#include "gpd/rng.hpp"

namespace gpd {

void PredictorConfig::validate() const {
    if (hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1");
    if (num_blocks < 1) throw ValidationError("num_blocks must be >= 1");
    if (l_hist < 1 || horizon < 1) throw ValidationError("l_hist and horizon must be >= 1");
    if (learning_rate <= 0) throw ValidationError("learning_rate must be positive");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
}

std::vector<LayerDescriptor> Predictor::layer_descriptors(const PredictorConfig& cfg) {
    cfg.validate();
    const int h = cfg.hidden_dim;
    std::vector<LayerDescriptor> d;
    d.push_back({"input_proj.weight", {h, cfg.l_hist}, 1, LayerKind::temporal});
    d.push_back({"input_proj.bias", {h}, 1, LayerKind::temporal});
    d.push_back({"node_embedding", {h}, 1, LayerKind::spatial});
    for (int b = 0; b < cfg.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        d.push_back({p + "fc1.weight", {h, h}, 1, LayerKind::other});
        d.push_back({p + "fc1.bias", {h}, 1, LayerKind::other});
        d.push_back({p + "fc2.weight", {h, h}, 1, LayerKind::other});
        d.push_back({p + "fc2.bias", {h}, 1, LayerKind::other});
    }
    d.push_back({"head.weight", {cfg.horizon, h}, 1, LayerKind::other});
    d.push_back({"head.bias", {cfg.horizon}, 1, LayerKind::other});
    return d;
}

Predictor::Predictor(const PredictorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(derive_seed(cfg.seed, "predictor-init"));
    for (const auto& d : layer_descriptors(cfg_)) {
        Matrix m;
        if (d.shape.size() == 2) {
            // fan-in scaled uniform init, matching common Linear defaults
            m = Matrix(d.shape[0], d.shape[1]);
            const double bound = 1.0 / std::sqrt(static_cast<double>(d.shape[1]));
            for (double& v : m.a) v = rng.uniform(-bound, bound);
        } else {
            m = Matrix(1, d.shape[0]);
            if (d.name == "node_embedding")
                for (double& v : m.a) v = 0.02 * rng.gauss();
            // biases stay zero
        }
        store_.add(d.name, std::move(m));
    }
}

Tape::NodeId Predictor::forward(Tape& tape, Tape::NodeId histories) {
    auto X = histories;
    auto w_in = tape.leaf(store_.at("input_proj.weight"));
    auto b_in = tape.leaf(store_.at("input_proj.bias"));
    auto emb = tape.leaf(store_.at("node_embedding"));
    auto h = tape.add_rowvec(tape.add_rowvec(tape.matmul_nt(X, w_in), b_in), emb);
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        auto w1 = tape.leaf(store_.at(p + "fc1.weight"));
        auto b1 = tape.leaf(store_.at(p + "fc1.bias"));
        auto w2 = tape.leaf(store_.at(p + "fc2.weight"));
        auto b2 = tape.leaf(store_.at(p + "fc2.bias"));
        auto z = tape.tanh_act(tape.add_rowvec(tape.matmul_nt(h, w1), b1));
        h = tape.add(h, tape.add_rowvec(tape.matmul_nt(z, w2), b2));
    }
    auto w_head = tape.leaf(store_.at("head.weight"));
    auto b_head = tape.leaf(store_.at("head.bias"));
    return tape.add_rowvec(tape.matmul_nt(h, w_head), b_head);
}

std::vector<double> Predictor::predict(const std::vector<double>& history) const {
    if (static_cast<int>(history.size()) != cfg_.l_hist)
        throw ValidationError("history length " + std::to_string(history.size()) +
                              " != l_hist " + std::to_string(cfg_.l_hist));
    Matrix x(1, cfg_.l_hist);
    x.a = history;
    Tape tape(false);
    auto out = const_cast<Predictor*>(this)->forward(tape, tape.input(std::move(x)));
    return tape.value(out).a;
}

namespace {

// Shared by training and the window evaluators.
void window_matrices(const std::vector<WindowedSample>& samples, int l_hist, int horizon,
                     Matrix& X, Matrix& Y) {
    if (samples.empty()) throw ValidationError("no samples");
    X = Matrix(static_cast<int>(samples.size()), l_hist);
    Y = Matrix(static_cast<int>(samples.size()), horizon);
    for (size_t i = 0; i < samples.size(); ++i) {
        if (static_cast<int>(samples[i].history.size()) != l_hist ||
            static_cast<int>(samples[i].target.size()) != horizon)
            throw ValidationError("sample " + std::to_string(i) + " has wrong window lengths");
        std::copy(samples[i].history.begin(), samples[i].history.end(), X.row(static_cast<int>(i)));
        std::copy(samples[i].target.begin(), samples[i].target.end(), Y.row(static_cast<int>(i)));
    }
}

}  // namespace

CheckpointRecord train_region(const SpatioTemporalGraph& g, const std::string& region,
                              const PredictorConfig& cfg, TimeSpan span) {
    cfg.validate();
    if (span.length() == 0) span = TimeSpan{0, g.timesteps()};
    const auto samples = window_dataset(g, region, cfg.l_hist, cfg.horizon, span);
    Matrix X, Y;
    window_matrices(samples, cfg.l_hist, cfg.horizon, X, Y);

    Predictor model(cfg);
    AdamOptimizer opt(cfg.learning_rate);
    double loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape tape;
        auto pred = model.forward(tape, tape.input(X));
        auto l = tape.mse(pred, Y);
        loss = tape.value(l)(0, 0);
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                               " training region '" + region + "' (lr=" +
                               std::to_string(cfg.learning_rate) + ")");
        model.params().zero_grad();
        tape.backward(l);
        opt.step(model.params());
    }

    CheckpointRecord ckpt;
    ckpt.region_id = region;
    ckpt.descriptors = Predictor::layer_descriptors(cfg);
    ckpt.flat_params = model.flat_params();
    ckpt.train_loss = loss;
    ckpt.metadata = {{"model", "stid-mlp"},
                     {"seed", std::to_string(cfg.seed)},
                     {"epochs", std::to_string(cfg.epochs)},
                     {"learning_rate", std::to_string(cfg.learning_rate)},
                     {"hidden_dim", std::to_string(cfg.hidden_dim)},
                     {"num_blocks", std::to_string(cfg.num_blocks)},
                     {"l_hist", std::to_string(cfg.l_hist)},
                     {"horizon", std::to_string(cfg.horizon)}};
    ckpt.validate();
    return ckpt;
}

std::vector<CheckpointRecord> prepare_source_checkpoints(
    const std::vector<SpatioTemporalGraph>& cities, const PredictorConfig& cfg) {
    if (cities.empty()) throw ValidationError("no source cities");
    std::vector<CheckpointRecord> out;
    for (const auto& city : cities)
        for (const auto& region : city.node_ids()) {
            try {
                out.push_back(train_region(city, region, cfg));
            } catch (const std::exception& e) {
                throw NumericError("region '" + region + "': " + e.what());
            }
        }
    ensure_uniform_descriptors(out);
    return out;
}

void ensure_uniform_descriptors(const std::vector<CheckpointRecord>& checkpoints) {
    if (checkpoints.empty()) throw ValidationError("no checkpoints");
    const auto& first = checkpoints.front().descriptors;
    for (const auto& c : checkpoints)
        if (c.descriptors != first)
            throw ValidationError("checkpoint '" + c.region_id +
                                  "' has a different architecture than '" +
                                  checkpoints.front().region_id + "'");
}

PredictorConfig config_from_checkpoint(const CheckpointRecord& ckpt) {
    PredictorConfig cfg;
    auto get = [&](const char* key) {
        auto it = ckpt.metadata.find(key);
        if (it == ckpt.metadata.end())
            throw ValidationError("checkpoint '" + ckpt.region_id + "' lacks metadata key '" +
                                  std::string(key) + "'");
        return std::stol(it->second);
    };
    cfg.hidden_dim = static_cast<int>(get("hidden_dim"));
    cfg.num_blocks = static_cast<int>(get("num_blocks"));
    cfg.l_hist = static_cast<int>(get("l_hist"));
    cfg.horizon = static_cast<int>(get("horizon"));
    return cfg;
}

HistoricalAverage::HistoricalAverage(const std::vector<double>& few_shot_series,
                                     int steps_per_day) {
    if (steps_per_day < 1) throw ValidationError("steps_per_day must be >= 1");
    if (static_cast<int>(few_shot_series.size()) < steps_per_day)
        throw ValidationError("historical average needs at least one full day (" +
                              std::to_string(steps_per_day) + " steps), got " +
                              std::to_string(few_shot_series.size()));
    profile_.assign(steps_per_day, 0.0);
    std::vector<long> counts(steps_per_day, 0);
    for (size_t t = 0; t < few_shot_series.size(); ++t) {
        profile_[t % steps_per_day] += few_shot_series[t];
        counts[t % steps_per_day]++;
    }
    for (int tau = 0; tau < steps_per_day; ++tau) profile_[tau] /= counts[tau];
}

std::vector<double> HistoricalAverage::forecast(long t_start, int horizon) const {
    std::vector<double> out(horizon);
    const long spd = static_cast<long>(profile_.size());
    for (int i = 0; i < horizon; ++i) out[i] = profile_[(t_start + i) % spd];
    return out;
}

ForecastMetrics evaluate_forecasts(const Matrix& pred, const Matrix& truth) {
    if (!pred.same_shape(truth)) throw ValidationError("forecast/truth shape mismatch");
    if (pred.rows == 0 || pred.cols == 0) throw ValidationError("empty forecast matrices");
    ForecastMetrics m;
    m.mae_per_step.assign(pred.cols, 0.0);
    m.rmse_per_step.assign(pred.cols, 0.0);
    for (int i = 0; i < pred.rows; ++i)
        for (int j = 0; j < pred.cols; ++j) {
            const double d = pred(i, j) - truth(i, j);
            m.mae_per_step[j] += std::abs(d);
            m.rmse_per_step[j] += d * d;
        }
    double abs_sum = 0.0, sq_sum = 0.0;
    for (int j = 0; j < pred.cols; ++j) {
        abs_sum += m.mae_per_step[j];
        sq_sum += m.rmse_per_step[j];
        m.mae_per_step[j] /= pred.rows;
        m.rmse_per_step[j] = std::sqrt(m.rmse_per_step[j] / pred.rows);
    }
    const double count = static_cast<double>(pred.rows) * pred.cols;
    m.mae = abs_sum / count;
    m.rmse = std::sqrt(sq_sum / count);
    return m;
}

Matrix predict_windows(const PredictorConfig& cfg, const std::vector<double>& flat_params,
                       const std::vector<WindowedSample>& samples) {
    Matrix X, Y;
    window_matrices(samples, cfg.l_hist, cfg.horizon, X, Y);
    Predictor model(cfg);
    model.load_flat_params(flat_params);
    Tape tape(false);
    auto out = model.forward(tape, tape.input(std::move(X)));
    return tape.value(out);
}

Matrix target_matrix(const std::vector<WindowedSample>& samples) {
    Matrix X, Y;
    if (samples.empty()) throw ValidationError("no samples");
    window_matrices(samples, static_cast<int>(samples.front().history.size()),
                    static_cast<int>(samples.front().target.size()), X, Y);
    return Y;
}

double mse_on_windows(const PredictorConfig& cfg, const std::vector<double>& flat_params,
                      const std::vector<WindowedSample>& samples) {
    const Matrix pred = predict_windows(cfg, flat_params, samples);
    const Matrix truth = target_matrix(samples);
    double s = 0.0;
    for (size_t i = 0; i < pred.a.size(); ++i) {
        const double d = pred.a[i] - truth.a[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.a.size());
}

}  // namespace gpd
