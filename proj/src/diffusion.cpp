#include "gpd/diffusion.hpp"

#include <cmath>

#include "gpd/common.hpp"
#include "gpd/container.hpp"

namespace gpd {

void NoiseSchedule::validate() const {
    if (steps < 1) throw ValidationError("schedule needs at least one step");
    if (beta.size() != static_cast<size_t>(steps) || alpha.size() != beta.size() ||
        alpha_bar.size() != beta.size())
        throw ValidationError("schedule arrays disagree with step count");
    for (int i = 0; i < steps; ++i) {
        if (!(beta[i] > 0.0 && beta[i] < 1.0))
            throw ValidationError("beta out of (0,1) at step " + std::to_string(i + 1));
        if (i > 0 && beta[i] < beta[i - 1])
            throw ValidationError("beta must be non-decreasing");
        if (i > 0 && !(alpha_bar[i] < alpha_bar[i - 1]))
            throw ValidationError("alpha_bar must be strictly decreasing");
    }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ValidationError("schedule needs at least one step");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ValidationError("need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        s.beta[i] = steps == 1
                        ? beta_start
                        : beta_start + (beta_end - beta_start) * i / static_cast<double>(steps - 1);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    s.validate();
    return s;
}

Matrix q_sample(const Matrix& x0, int k, const Matrix& eps, const NoiseSchedule& s) {
    s.validate();
    if (k < 1 || k > s.steps) throw ValidationError("timestep k=" + std::to_string(k) +
                                                    " outside [1," + std::to_string(s.steps) + "]");
    if (!eps.same_shape(x0)) throw ValidationError("noise shape differs from x0");
    const double a = std::sqrt(s.alpha_bar[k - 1]);
    const double b = std::sqrt(1.0 - s.alpha_bar[k - 1]);
    Matrix xk(x0.rows, x0.cols);
    for (size_t i = 0; i < x0.a.size(); ++i) xk.a[i] = a * x0.a[i] + b * eps.a[i];
    return xk;
}

Matrix GaussianNoise::draw(int rows, int cols) { return Matrix::gaussian(rows, cols, rng_); }

Matrix reverse_diffusion(const NoiseSchedule& s, int rows, int cols, const DenoiseFn& eps_fn,
                         NoiseSource& noise) {
    s.validate();
    Matrix x = noise.draw(rows, cols);
    for (int k = s.steps; k >= 1; --k) {
        const Matrix eps_hat = eps_fn(x, k);
        if (!eps_hat.same_shape(x))
            throw ValidationError("denoiser output shape differs from state");
        const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha[k - 1]);
        const double eps_coef = s.beta[k - 1] / std::sqrt(1.0 - s.alpha_bar[k - 1]);
        const double sigma = std::sqrt(s.beta[k - 1]);
        if (k > 1) {
            const Matrix z = noise.draw(rows, cols);
            for (size_t i = 0; i < x.a.size(); ++i)
                x.a[i] = inv_sqrt_alpha * (x.a[i] - eps_coef * eps_hat.a[i]) + sigma * z.a[i];
        } else {
            // z = 0 on the final step
            for (size_t i = 0; i < x.a.size(); ++i)
                x.a[i] = inv_sqrt_alpha * (x.a[i] - eps_coef * eps_hat.a[i]);
        }
        if (!x.all_finite())
            throw NumericError("non-finite sample state at reverse step k=" + std::to_string(k));
    }
    return x;
}

DiffusionModel::DiffusionModel(NoiseSchedule schedule, Denoiser denoiser, NormStats stats,
                               std::vector<LayerDescriptor> descriptors, double lr)
    : schedule_(std::move(schedule)),
      denoiser_(std::move(denoiser)),
      stats_(std::move(stats)),
      descriptors_(std::move(descriptors)),
      lr_(lr),
      opt_(lr) {
    schedule_.validate();
    validate_descriptors(descriptors_);
    if (lr_ <= 0) throw ValidationError("lr must be positive");
    const long total = total_param_count(descriptors_);
    const long expect = static_cast<long>(denoiser_.seq_len()) * denoiser_.token_width();
    if (total != expect)
        throw ValidationError("denoiser covers " + std::to_string(expect) +
                              " parameters, descriptors have " + std::to_string(total));
    if (stats_.mean.size() != static_cast<size_t>(total) || stats_.stdev.size() != stats_.mean.size())
        throw ValidationError("normalization stats do not match parameter count");
}

double DiffusionModel::training_step(const std::vector<DiffusionTrainItem>& batch, Rng& rng) {
    if (batch.empty()) throw ValidationError("empty diffusion batch");
    const int L = denoiser_.seq_len();
    const int g = denoiser_.token_width();
    denoiser_.params().zero_grad();
    double loss_sum = 0.0;
    for (const auto& item : batch) {
        if (!item.tokens || !item.prompt) throw ValidationError("null batch item");
        if (item.tokens->rows != L || item.tokens->cols != g)
            throw ValidationError("batch tokens have wrong shape");
        const int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(schedule_.steps)));
        Matrix eps = Matrix::gaussian(L, g, rng);
        Matrix xk = q_sample(*item.tokens, k, eps, schedule_);
        Tape tape;
        auto eps_hat = denoiser_.predict_noise(tape, tape.input(std::move(xk)), *item.prompt, k);
        auto loss = tape.mse(eps_hat, eps);
        loss_sum += tape.value(loss)(0, 0);
        tape.backward(loss);
    }
    const double mean_loss = loss_sum / static_cast<double>(batch.size());
    if (!std::isfinite(mean_loss))
        throw NumericError("non-finite diffusion loss at optimizer step " +
                           std::to_string(opt_.step_count() + 1));
    denoiser_.params().scale_grads(1.0 / static_cast<double>(batch.size()));
    opt_.step(denoiser_.params());
    return mean_loss;
}

Matrix DiffusionModel::sample(const Matrix& prompt, NoiseSource& noise) const {
    return reverse_diffusion(
        schedule_, denoiser_.seq_len(), denoiser_.token_width(),
        [&](const Matrix& xk, int k) { return denoiser_.predict_noise(xk, prompt, k); }, noise);
}

Matrix DiffusionModel::sample(const Matrix& prompt, uint64_t seed) const {
    GaussianNoise noise(seed);
    return sample(prompt, noise);
}

std::vector<double> train_diffusion(DiffusionModel& model, const std::vector<Matrix>& token_corpus,
                                    const std::vector<Matrix>& prompt_corpus, int steps,
                                    int batch_size, uint64_t seed) {
    if (token_corpus.empty() || token_corpus.size() != prompt_corpus.size())
        throw ValidationError("token/prompt corpus size mismatch");
    if (steps < 1 || batch_size < 1) throw ValidationError("steps and batch_size must be >= 1");
    Rng rng(derive_seed(seed, "diffusion-train"));
    std::vector<double> losses;
    losses.reserve(steps);
    const size_t n = token_corpus.size();
    for (int step = 0; step < steps; ++step) {
        std::vector<DiffusionTrainItem> batch;
        batch.reserve(batch_size);
        for (int b = 0; b < batch_size; ++b) {
            const size_t i = static_cast<size_t>(rng.below(n));
            batch.push_back({&token_corpus[i], &prompt_corpus[i]});
        }
        losses.push_back(model.training_step(batch, rng));
    }
    return losses;
}

CheckpointRecord generate_checkpoint(const DiffusionModel& model, const RegionPrompt& prompt,
                                     const std::vector<LayerDescriptor>& descriptors,
                                     uint64_t seed, int ensemble, const CandidateScorer& scorer) {
    if (descriptors != model.descriptors())
        throw ValidationError("descriptor list does not match the trained model");
    if (ensemble < 1) throw ValidationError("ensemble must be >= 1");
    if (ensemble > 1 && !scorer)
        throw ValidationError("ensemble > 1 needs a candidate scorer");

    std::vector<double> best_flat;
    double best_score = 0.0;
    for (int i = 0; i < ensemble; ++i) {
        Matrix tokens = model.sample(prompt_matrix(prompt), derive_seed(seed, "candidate", i));
        TokenSequence seq = token_sequence_from_matrix(descriptors, std::move(tokens));
        denormalize(seq, model.stats());
        std::vector<double> flat = detokenize(seq, descriptors);
        const double score = scorer ? scorer(flat) : 0.0;
        if (i == 0 || score < best_score) {
            best_score = score;
            best_flat = std::move(flat);
        }
    }

    CheckpointRecord ckpt;
    ckpt.region_id = prompt.region_id;
    ckpt.descriptors = descriptors;
    ckpt.flat_params = std::move(best_flat);
    ckpt.train_loss = best_score;
    ckpt.metadata = {{"generated", "true"},
                     {"seed", std::to_string(seed)},
                     {"ensemble", std::to_string(ensemble)},
                     {"model", "gpd-diffusion"}};
    ckpt.validate();
    return ckpt;
}

void save_diffusion_model(const std::filesystem::path& path, const DiffusionModel& model) {
    Container c;
    c.header["kind"] = "diffusion-model";
    c.header["steps"] = model.schedule().steps;
    c.header["lr"] = model.learning_rate();
    const auto& dcfg = model.denoiser().config();
    c.header["denoiser"] = {{"layers", dcfg.layers},
                            {"heads", dcfg.heads},
                            {"model_dim", dcfg.model_dim},
                            {"strategy", to_string(dcfg.strategy)},
                            {"timestep_embed_dim", dcfg.timestep_embed_dim},
                            {"seed", dcfg.seed},
                            {"seq_len", model.denoiser().seq_len()},
                            {"token_width", model.denoiser().token_width()},
                            {"prompt_dim", model.denoiser().prompt_dim()}};
    auto& descs = c.header["descriptors"] = nlohmann::json::array();
    for (const auto& d : model.descriptors())
        descs.push_back({{"name", d.name},
                         {"shape", d.shape},
                         {"count", d.count},
                         {"kind", to_string(d.kind)}});
    c.blocks.emplace_back("beta", model.schedule().beta);
    c.blocks.emplace_back("stats.mean", model.stats().mean);
    c.blocks.emplace_back("stats.stdev", model.stats().stdev);
    for (const auto& p : model.denoiser().params().entries())
        c.blocks.emplace_back("param." + p->name, p->value.a);
    write_container(path, c);
}

DiffusionModel load_diffusion_model(const std::filesystem::path& path) {
    Container c = read_container(path);
    try {
        if (c.header.at("kind").get<std::string>() != "diffusion-model")
            throw ParseError("wrong container kind (field 'kind') in " + path.string());
        const auto& j = c.header.at("denoiser");
        DenoiserConfig dcfg;
        dcfg.layers = j.at("layers").get<int>();
        dcfg.heads = j.at("heads").get<int>();
        dcfg.model_dim = j.at("model_dim").get<int>();
        dcfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        dcfg.timestep_embed_dim = j.at("timestep_embed_dim").get<int>();
        dcfg.seed = j.at("seed").get<uint64_t>();

        std::vector<LayerDescriptor> descriptors;
        for (const auto& dj : c.header.at("descriptors")) {
            LayerDescriptor d;
            d.name = dj.at("name").get<std::string>();
            d.shape = dj.at("shape").get<std::vector<int>>();
            d.count = dj.at("count").get<int>();
            d.kind = layer_kind_from_string(dj.at("kind").get<std::string>());
            descriptors.push_back(std::move(d));
        }

        const int steps = c.header.at("steps").get<int>();
        NoiseSchedule s;
        s.steps = steps;
        s.beta = c.block("beta");
        s.alpha.resize(s.beta.size());
        s.alpha_bar.resize(s.beta.size());
        double prod = 1.0;
        for (size_t i = 0; i < s.beta.size(); ++i) {
            s.alpha[i] = 1.0 - s.beta[i];
            prod *= s.alpha[i];
            s.alpha_bar[i] = prod;
        }

        const long g = token_width(descriptors);
        Denoiser den(dcfg, j.at("seq_len").get<int>(), j.at("token_width").get<int>(),
                     j.at("prompt_dim").get<int>(), token_kinds_for(descriptors, g));
        for (auto& p : den.params().entries()) {
            const auto& block = c.block("param." + p->name);
            if (block.size() != p->value.a.size())
                throw ParseError("block 'param." + p->name + "' has wrong length in " +
                                 path.string());
            p->value.a = block;
        }

        NormStats stats;
        stats.mean = c.block("stats.mean");
        stats.stdev = c.block("stats.stdev");
        return DiffusionModel(std::move(s), std::move(den), std::move(stats),
                              std::move(descriptors), c.header.at("lr").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad diffusion model header in " + path.string() + ": " + e.what());
    }
}

}  // namespace gpd
