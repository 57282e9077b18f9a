#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gpd/params.hpp"
#include "gpd/rng.hpp"
#include "gpd/tape.hpp"

namespace gpd {

struct MaskedAEConfig {
    int patch_len = 12;
    double mask_ratio = 0.75;
    int enc_dim = 128;
    int layers = 2;
    int heads = 4;
    int epochs = 300;
    double lr = 1e-3;
    uint64_t seed = 3;

    void validate() const;
};

// Picks ceil(mask_ratio * num_patches) distinct patch indices, uniformly.
// The trainer's only source of masks, so tests can pin the count here.
std::vector<int> choose_masked(int num_patches, double mask_ratio, Rng& rng);

// Transformer over series patches trained to reconstruct masked patches
// (masked inputs are replaced by a learned token). The reconstruction head
// plays decoder; prompts use only the encoder output.
class MaskedAutoencoder {
  public:
    MaskedAutoencoder(const MaskedAEConfig& cfg, int max_patches);

    Matrix patchify(const std::vector<double>& series) const;  // P x patch_len, truncates tail

    // Training-mode forward; loss is MSE over the masked rows only.
    Tape::NodeId reconstruction_loss(Tape& tape, const Matrix& patches,
                                     const std::vector<int>& masked);

    // Mean-pooled encoder output over all patches, no masking.
    std::vector<double> encode(const std::vector<double>& series) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const MaskedAEConfig& config() const { return cfg_; }
    int max_patches() const { return max_patches_; }

  private:
    Tape::NodeId encoder(Tape& tape, Tape::NodeId embedded);

    MaskedAEConfig cfg_;
    int max_patches_;
    ParamStore store_;
};

MaskedAutoencoder train_masked_ae(const std::vector<std::vector<double>>& corpus,
                                  const MaskedAEConfig& cfg,
                                  std::vector<double>* epoch_losses = nullptr);

std::vector<double> temporal_prompt(const MaskedAutoencoder& encoder,
                                    const std::vector<double>& series);

void save_masked_ae(const std::filesystem::path& path, const MaskedAutoencoder& model);
MaskedAutoencoder load_masked_ae(const std::filesystem::path& path);

}  // namespace gpd
