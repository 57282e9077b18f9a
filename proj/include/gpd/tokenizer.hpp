#pragma once

#include <filesystem>
#include <vector>

#include "gpd/checkpoint.hpp"
#include "gpd/matrix.hpp"

namespace gpd {

struct TokenLayerSpan {
    int descriptor_index = 0;
    long token_start = 0;
    long token_count = 0;
    bool operator==(const TokenLayerSpan&) const = default;
};

// Fixed-width view of a flat parameter vector: row t holds elements
// [t*g, (t+1)*g), layers in descriptor order so network adjacency survives.
struct TokenSequence {
    Matrix tokens;  // L x g
    std::vector<LayerKind> token_kinds;
    std::vector<TokenLayerSpan> layer_map;
    long g = 0;

    long length() const { return tokens.rows; }
};

// GCD of the distinct per-layer element counts; layer multiplicity scales
// sequence length, not the width. g=1 is accepted with a warning.
long token_width(const std::vector<LayerDescriptor>& descriptors);

TokenSequence tokenize(const CheckpointRecord& ckpt);
std::vector<double> detokenize(const TokenSequence& seq,
                               const std::vector<LayerDescriptor>& descriptors);

// Per-token kinds implied by the descriptors alone.
std::vector<LayerKind> token_kinds_for(const std::vector<LayerDescriptor>& descriptors, long g);

// Wraps a raw L x g matrix (e.g. a diffusion sample) as a token sequence of
// the given architecture.
TokenSequence token_sequence_from_matrix(const std::vector<LayerDescriptor>& descriptors,
                                         Matrix tokens);

// Per-coordinate standardization stats over a checkpoint corpus.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stdev;  // population std, clamped at use time

    bool operator==(const NormStats&) const = default;
};

inline constexpr double kSigmaFloor = 1e-6;

NormStats compute_norm_stats(const std::vector<CheckpointRecord>& corpus);

void normalize_flat(std::vector<double>& flat, const NormStats& stats);
void denormalize_flat(std::vector<double>& flat, const NormStats& stats);
void normalize(TokenSequence& seq, const NormStats& stats);
void denormalize(TokenSequence& seq, const NormStats& stats);

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

}  // namespace gpd
