#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "gpd/checkpoint.hpp"
#include "gpd/denoiser.hpp"
#include "gpd/prompt.hpp"
#include "gpd/rng.hpp"
#include "gpd/tokenizer.hpp"

namespace gpd {

struct NoiseSchedule {
    int steps = 0;  // K
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;

    void validate() const;
};

// Linear beta interpolation from beta_start to beta_end over K steps.
NoiseSchedule make_schedule(int steps = 500, double beta_start = 1e-4, double beta_end = 0.02);

// Forward corruption: xk = sqrt(abar_k) x0 + sqrt(1 - abar_k) eps; k is 1-based.
Matrix q_sample(const Matrix& x0, int k, const Matrix& eps, const NoiseSchedule& s);

// Anything that hands the sampler Gaussian draws. Injectable so tests can
// count draws or pin them.
class NoiseSource {
  public:
    virtual ~NoiseSource() = default;
    virtual Matrix draw(int rows, int cols) = 0;
};

class GaussianNoise : public NoiseSource {
  public:
    explicit GaussianNoise(uint64_t seed) : rng_(seed) {}
    Matrix draw(int rows, int cols) override;

  private:
    Rng rng_;
};

// Ancestral sampling loop, generic in the noise predictor. Draws exactly one
// initial state plus one z per step k>1; z=0 at k=1.
using DenoiseFn = std::function<Matrix(const Matrix& xk, int k)>;
Matrix reverse_diffusion(const NoiseSchedule& s, int rows, int cols, const DenoiseFn& eps_fn,
                         NoiseSource& noise);

struct DiffusionTrainItem {
    const Matrix* tokens = nullptr;  // normalized L x g
    const Matrix* prompt = nullptr;  // 2 x E
};

class DiffusionModel {
  public:
    DiffusionModel(NoiseSchedule schedule, Denoiser denoiser, NormStats stats,
                   std::vector<LayerDescriptor> descriptors, double lr = 8e-5);

    // One optimizer update on a uniformly drawn timestep per item; returns the
    // batch loss (per-coordinate mean).
    double training_step(const std::vector<DiffusionTrainItem>& batch, Rng& rng);

    Matrix sample(const Matrix& prompt, NoiseSource& noise) const;  // normalized tokens
    Matrix sample(const Matrix& prompt, uint64_t seed) const;

    const NoiseSchedule& schedule() const { return schedule_; }
    Denoiser& denoiser() { return denoiser_; }
    const Denoiser& denoiser() const { return denoiser_; }
    const NormStats& stats() const { return stats_; }
    const std::vector<LayerDescriptor>& descriptors() const { return descriptors_; }
    long optimizer_steps() const { return opt_.step_count(); }
    double learning_rate() const { return lr_; }

  private:
    NoiseSchedule schedule_;
    Denoiser denoiser_;
    NormStats stats_;
    std::vector<LayerDescriptor> descriptors_;
    double lr_;
    AdamOptimizer opt_;
};

// Uniform mini-batches over the corpus for `steps` optimizer updates;
// returns the per-step loss curve.
std::vector<double> train_diffusion(DiffusionModel& model, const std::vector<Matrix>& token_corpus,
                                    const std::vector<Matrix>& prompt_corpus, int steps,
                                    int batch_size, uint64_t seed);

// Score candidates by (lower is better), e.g. few-shot MSE of the decoded
// parameters. Required when ensemble > 1.
using CandidateScorer = std::function<double(const std::vector<double>& flat_params)>;

CheckpointRecord generate_checkpoint(const DiffusionModel& model, const RegionPrompt& prompt,
                                     const std::vector<LayerDescriptor>& descriptors,
                                     uint64_t seed, int ensemble = 1,
                                     const CandidateScorer& scorer = nullptr);

void save_diffusion_model(const std::filesystem::path& path, const DiffusionModel& model);
DiffusionModel load_diffusion_model(const std::filesystem::path& path);

}  // namespace gpd
