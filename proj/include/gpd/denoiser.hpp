#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpd/checkpoint.hpp"
#include "gpd/params.hpp"
#include "gpd/tape.hpp"

namespace gpd {

// How the region prompt and timestep enter the transformer.
enum class Strategy { pre, pre_inductive, pre_adaptive, post_adaptive, adaptive_norm };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct DenoiserConfig {
    int layers = 4;
    int heads = 4;
    int model_dim = 128;
    Strategy strategy = Strategy::pre_inductive;
    int timestep_embed_dim = 128;
    uint64_t seed = 4;

    void validate() const;
};

// Conditional noise predictor over token sequences. Tokens are projected
// g -> model_dim, positions are learned per token slot, the sinusoidal
// timestep embedding is added to every token, and the prompt enters per the
// configured strategy. The prompt projection has no bias so a zero prompt
// contributes exactly nothing.
class Denoiser {
  public:
    Denoiser(const DenoiserConfig& cfg, int seq_len, int token_width, int prompt_dim,
             std::vector<LayerKind> token_kinds);

    // prompt is 2 x prompt_dim (row 0 spatial, row 1 temporal); k is 1-based.
    Tape::NodeId predict_noise(Tape& tape, Tape::NodeId noisy_tokens, const Matrix& prompt,
                               int k);
    Matrix predict_noise(const Matrix& noisy_tokens, const Matrix& prompt, int k) const;

    // Attention of each query row over the two projected prompt rows; used by
    // the adaptive strategies. Rows are softmax-normalized.
    Matrix adaptive_attention_weights(const Matrix& queries, const Matrix& prompt) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    const DenoiserConfig& config() const { return cfg_; }
    int seq_len() const { return seq_len_; }
    int token_width() const { return g_; }
    int prompt_dim() const { return prompt_dim_; }
    const std::vector<LayerKind>& token_kinds() const { return kinds_; }

    static Matrix timestep_embedding(int k, int dim);  // 1 x dim sinusoid

  private:
    Tape::NodeId aggregate_prompt(Tape& tape, Tape::NodeId projected_prompt, Tape::NodeId query);
    Tape::NodeId maybe_modulated_norm(Tape& tape, Tape::NodeId h, Tape::NodeId projected_prompt,
                                      int layer);

    DenoiserConfig cfg_;
    int seq_len_;
    int g_;
    int prompt_dim_;
    std::vector<LayerKind> kinds_;
    ParamStore store_;
};

}  // namespace gpd
