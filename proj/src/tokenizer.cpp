#include "gpd/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpd/common.hpp"
#include "gpd/container.hpp"

namespace gpd {

long token_width(const std::vector<LayerDescriptor>& descriptors) {
    validate_descriptors(descriptors);
    long g = 0;
    for (const auto& d : descriptors) g = std::gcd(g, d.numel());
    if (g == 1) warn("token width degenerated to 1 (coprime layer sizes)");
    return g;
}

std::vector<LayerKind> token_kinds_for(const std::vector<LayerDescriptor>& descriptors, long g) {
    std::vector<LayerKind> kinds;
    for (const auto& d : descriptors) {
        const long n_tokens = d.total_numel() / g;
        for (long k = 0; k < n_tokens; ++k) kinds.push_back(d.kind);
    }
    return kinds;
}

TokenSequence token_sequence_from_matrix(const std::vector<LayerDescriptor>& descriptors,
                                         Matrix tokens) {
    TokenSequence seq;
    seq.g = token_width(descriptors);
    const long total = total_param_count(descriptors);
    const long L = total / seq.g;
    if (tokens.rows != static_cast<int>(L) || tokens.cols != static_cast<int>(seq.g))
        throw ValidationError("token matrix is " + std::to_string(tokens.rows) + "x" +
                              std::to_string(tokens.cols) + ", architecture wants " +
                              std::to_string(L) + "x" + std::to_string(seq.g));
    seq.tokens = std::move(tokens);
    seq.token_kinds = token_kinds_for(descriptors, seq.g);
    long t = 0;
    for (size_t i = 0; i < descriptors.size(); ++i) {
        const long n_tokens = descriptors[i].total_numel() / seq.g;
        seq.layer_map.push_back({static_cast<int>(i), t, n_tokens});
        t += n_tokens;
    }
    return seq;
}

TokenSequence tokenize(const CheckpointRecord& ckpt) {
    ckpt.validate();
    const long g = token_width(ckpt.descriptors);
    const long total = total_param_count(ckpt.descriptors);
    Matrix tokens(static_cast<int>(total / g), static_cast<int>(g));
    std::copy(ckpt.flat_params.begin(), ckpt.flat_params.end(), tokens.a.begin());
    return token_sequence_from_matrix(ckpt.descriptors, std::move(tokens));
}

std::vector<double> detokenize(const TokenSequence& seq,
                               const std::vector<LayerDescriptor>& descriptors) {
    validate_descriptors(descriptors);
    const long g = token_width(descriptors);
    if (g != seq.g)
        throw ValidationError("token width " + std::to_string(seq.g) +
                              " does not match descriptors (want " + std::to_string(g) + ")");
    if (seq.layer_map.size() != descriptors.size())
        throw ValidationError("layer_map has " + std::to_string(seq.layer_map.size()) +
                              " entries for " + std::to_string(descriptors.size()) + " descriptors");
    long t = 0;
    for (size_t i = 0; i < descriptors.size(); ++i) {
        const auto& span = seq.layer_map[i];
        const long want = descriptors[i].total_numel() / g;
        if (span.descriptor_index != static_cast<int>(i) || span.token_start != t ||
            span.token_count != want)
            throw ValidationError("layer_map entry " + std::to_string(i) +
                                  " does not partition the sequence in descriptor order");
        t += want;
    }
    if (t != seq.length())
        throw ValidationError("layer_map covers " + std::to_string(t) + " of " +
                              std::to_string(seq.length()) + " tokens");
    return seq.tokens.a;
}

NormStats compute_norm_stats(const std::vector<CheckpointRecord>& corpus) {
    if (corpus.empty()) throw ValidationError("empty corpus");
    const size_t dim = corpus.front().flat_params.size();
    NormStats s;
    s.mean.assign(dim, 0.0);
    s.stdev.assign(dim, 0.0);
    for (const auto& c : corpus) {
        if (c.flat_params.size() != dim)
            throw ValidationError("checkpoint '" + c.region_id + "' has mismatched length");
        for (size_t i = 0; i < dim; ++i) s.mean[i] += c.flat_params[i];
    }
    const double n = static_cast<double>(corpus.size());
    for (size_t i = 0; i < dim; ++i) s.mean[i] /= n;
    for (const auto& c : corpus)
        for (size_t i = 0; i < dim; ++i) {
            const double d = c.flat_params[i] - s.mean[i];
            s.stdev[i] += d * d;
        }
    for (size_t i = 0; i < dim; ++i) s.stdev[i] = std::sqrt(s.stdev[i] / n);
    return s;
}

namespace {

void check_stats(size_t dim, const NormStats& stats) {
    if (stats.mean.size() != dim || stats.stdev.size() != dim)
        throw ValidationError("normalization stats of length " + std::to_string(stats.mean.size()) +
                              " applied to vector of length " + std::to_string(dim));
}

}  // namespace

void normalize_flat(std::vector<double>& flat, const NormStats& stats) {
    check_stats(flat.size(), stats);
    for (size_t i = 0; i < flat.size(); ++i)
        flat[i] = (flat[i] - stats.mean[i]) / std::max(stats.stdev[i], kSigmaFloor);
}

void denormalize_flat(std::vector<double>& flat, const NormStats& stats) {
    check_stats(flat.size(), stats);
    for (size_t i = 0; i < flat.size(); ++i)
        flat[i] = flat[i] * std::max(stats.stdev[i], kSigmaFloor) + stats.mean[i];
}

void normalize(TokenSequence& seq, const NormStats& stats) { normalize_flat(seq.tokens.a, stats); }

void denormalize(TokenSequence& seq, const NormStats& stats) {
    denormalize_flat(seq.tokens.a, stats);
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
    Container c;
    c.header["kind"] = "token-stats";
    c.blocks.emplace_back("mean", stats.mean);
    c.blocks.emplace_back("stdev", stats.stdev);
    write_container(path, c);
}

NormStats load_norm_stats(const std::filesystem::path& path) {
    Container c = read_container(path);
    if (!c.header.contains("kind") || c.header["kind"] != "token-stats")
        throw ParseError("wrong container kind (field 'kind') in " + path.string());
    NormStats s;
    s.mean = c.block("mean");
    s.stdev = c.block("stdev");
    if (s.mean.size() != s.stdev.size())
        throw ParseError("mean/stdev length mismatch in " + path.string());
    return s;
}

}  // namespace gpd
