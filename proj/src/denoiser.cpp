#include "gpd/denoiser.hpp"

#include <cmath>

#include "gpd/common.hpp"
#include "gpd/rng.hpp"

namespace gpd {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::pre: return "pre";
        case Strategy::pre_inductive: return "pre_inductive";
        case Strategy::pre_adaptive: return "pre_adaptive";
        case Strategy::post_adaptive: return "post_adaptive";
        case Strategy::adaptive_norm: return "adaptive_norm";
    }
    throw ValidationError("bad Strategy");
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "pre") return Strategy::pre;
    if (s == "pre_inductive") return Strategy::pre_inductive;
    if (s == "pre_adaptive") return Strategy::pre_adaptive;
    if (s == "post_adaptive") return Strategy::post_adaptive;
    if (s == "adaptive_norm") return Strategy::adaptive_norm;
    throw ParseError("unknown conditioning strategy '" + s + "'");
}

void DenoiserConfig::validate() const {
    if (layers < 1 || heads < 1 || model_dim < 1)
        throw ValidationError("layers, heads, model_dim must be >= 1");
    if (model_dim % heads != 0) throw ValidationError("model_dim must be divisible by heads");
    if (timestep_embed_dim < 2 || timestep_embed_dim % 2 != 0)
        throw ValidationError("timestep_embed_dim must be a positive even number");
}

Matrix Denoiser::timestep_embedding(int k, int dim) {
    Matrix e(1, dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e(0, 2 * i) = std::sin(k * freq);
        e(0, 2 * i + 1) = std::cos(k * freq);
    }
    return e;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, int seq_len, int token_width, int prompt_dim,
                   std::vector<LayerKind> token_kinds)
    : cfg_(cfg), seq_len_(seq_len), g_(token_width), prompt_dim_(prompt_dim),
      kinds_(std::move(token_kinds)) {
    cfg_.validate();
    if (seq_len_ < 1 || g_ < 1 || prompt_dim_ < 1)
        throw ValidationError("seq_len, token_width, prompt_dim must be >= 1");
    if (static_cast<int>(kinds_.size()) != seq_len_)
        throw ValidationError("token_kinds length " + std::to_string(kinds_.size()) +
                              " != seq_len " + std::to_string(seq_len_));
    Rng rng(derive_seed(cfg_.seed, "denoiser-init"));
    const int d = cfg_.model_dim;
    auto linear = [&](const std::string& name, int out, int in, bool bias = true) {
        Matrix w(out, in);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : w.a) v = rng.uniform(-bound, bound);
        store_.add(name + ".weight", std::move(w));
        if (bias) store_.add(name + ".bias", Matrix(1, out));
    };
    linear("token_proj", d, g_);
    store_.add("pos_embedding", Matrix::gaussian(seq_len_, d, rng, 0.02));
    linear("time_proj", d, cfg_.timestep_embed_dim);
    linear("prompt_proj", d, prompt_dim_, /*bias=*/false);
    linear("cond_attn", d, d);  // W_w, b_w of the adaptive aggregation
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        linear(p + "wq", d, d);
        linear(p + "wk", d, d);
        linear(p + "wv", d, d);
        linear(p + "wo", d, d);
        linear(p + "fc1", 2 * d, d);
        linear(p + "fc2", d, 2 * d);
        // zero-initialized so adaptive_norm starts as the identity
        store_.add(p + "mod.weight", Matrix(2 * d, d));
        store_.add(p + "mod.bias", Matrix(1, 2 * d));
    }
    linear("out_proj", g_, d);
}

Tape::NodeId Denoiser::aggregate_prompt(Tape& tape, Tape::NodeId projected_prompt,
                                        Tape::NodeId query) {
    auto u = tape.tanh_act(
        tape.add_rowvec(tape.matmul_nt(projected_prompt, tape.leaf(store_.at("cond_attn.weight"))),
                        tape.leaf(store_.at("cond_attn.bias"))));
    auto alpha = tape.softmax_rows(tape.matmul_nt(query, u));  // L x 2
    return tape.matmul(alpha, projected_prompt);               // L x D
}

Tape::NodeId Denoiser::maybe_modulated_norm(Tape& tape, Tape::NodeId h,
                                            Tape::NodeId projected_prompt, int layer) {
    auto y = tape.layer_norm_rows(h);
    if (cfg_.strategy != Strategy::adaptive_norm) return y;
    // query is the pre-norm activation
    auto agg = aggregate_prompt(tape, projected_prompt, h);
    const std::string p = "layer" + std::to_string(layer) + ".mod";
    auto mod = tape.add_rowvec(tape.matmul_nt(agg, tape.leaf(store_.at(p + ".weight"))),
                               tape.leaf(store_.at(p + ".bias")));
    const int d = cfg_.model_dim;
    auto scale = tape.slice_cols(mod, 0, d);
    auto shift = tape.slice_cols(mod, d, d);
    return tape.add(tape.add(y, tape.mul(y, scale)), shift);
}

Tape::NodeId Denoiser::predict_noise(Tape& tape, Tape::NodeId noisy_tokens, const Matrix& prompt,
                                     int k) {
    if (tape.rows(noisy_tokens) != seq_len_ || tape.cols(noisy_tokens) != g_)
        throw ValidationError("denoiser input is " + std::to_string(tape.rows(noisy_tokens)) +
                              "x" + std::to_string(tape.cols(noisy_tokens)) + ", model expects " +
                              std::to_string(seq_len_) + "x" + std::to_string(g_));
    if (prompt.rows != 2 || prompt.cols != prompt_dim_)
        throw ValidationError("prompt must be 2x" + std::to_string(prompt_dim_));
    if (k < 1) throw ValidationError("timestep k must be >= 1");
    const int d = cfg_.model_dim;

    auto linear = [&](Tape::NodeId x, const std::string& name) {
        return tape.add_rowvec(tape.matmul_nt(x, tape.leaf(store_.at(name + ".weight"))),
                               tape.leaf(store_.at(name + ".bias")));
    };

    auto emb = linear(noisy_tokens, "token_proj");
    auto temb = linear(tape.input(timestep_embedding(k, cfg_.timestep_embed_dim)), "time_proj");
    auto base = tape.add_rowvec(tape.add(emb, tape.leaf(store_.at("pos_embedding"))), temb);
    auto p2 = tape.matmul_nt(tape.input(prompt), tape.leaf(store_.at("prompt_proj.weight")));

    auto h = base;
    switch (cfg_.strategy) {
        case Strategy::pre: {
            auto psum = tape.add(tape.slice_rows(p2, 0, 1), tape.slice_rows(p2, 1, 1));
            h = tape.add_rowvec(base, psum);
            break;
        }
        case Strategy::pre_inductive: {
            Matrix mask_s(seq_len_, d, 0.0), mask_t(seq_len_, d, 0.0);
            for (int i = 0; i < seq_len_; ++i) {
                if (kinds_[i] == LayerKind::spatial)
                    for (int j = 0; j < d; ++j) mask_s(i, j) = 1.0;
                else if (kinds_[i] == LayerKind::temporal)
                    for (int j = 0; j < d; ++j) mask_t(i, j) = 1.0;
            }
            auto rows_s = tape.add_rowvec(tape.input(Matrix(seq_len_, d)),
                                          tape.slice_rows(p2, 0, 1));
            auto rows_t = tape.add_rowvec(tape.input(Matrix(seq_len_, d)),
                                          tape.slice_rows(p2, 1, 1));
            h = tape.add(base, tape.add(tape.mul(tape.input(std::move(mask_s)), rows_s),
                                        tape.mul(tape.input(std::move(mask_t)), rows_t)));
            break;
        }
        case Strategy::pre_adaptive:
            h = tape.add(base, aggregate_prompt(tape, p2, base));
            break;
        case Strategy::post_adaptive:
        case Strategy::adaptive_norm:
            break;  // prompt enters inside the layers
    }

    const int hd = d / cfg_.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        auto ln = maybe_modulated_norm(tape, h, p2, l);
        auto q = linear(ln, pre + "wq");
        auto kk = linear(ln, pre + "wk");
        auto v = linear(ln, pre + "wv");
        std::vector<Tape::NodeId> heads;
        for (int i = 0; i < cfg_.heads; ++i) {
            auto qi = tape.slice_cols(q, i * hd, hd);
            auto ki = tape.slice_cols(kk, i * hd, hd);
            auto vi = tape.slice_cols(v, i * hd, hd);
            auto att = tape.softmax_rows(tape.scale(tape.matmul_nt(qi, ki), att_scale));
            heads.push_back(tape.matmul(att, vi));
        }
        auto attn_out = linear(tape.concat_cols(heads), pre + "wo");
        if (cfg_.strategy == Strategy::post_adaptive)
            attn_out = tape.add(attn_out, aggregate_prompt(tape, p2, attn_out));
        h = tape.add(h, attn_out);
        auto ln2 = maybe_modulated_norm(tape, h, p2, l);
        h = tape.add(h, linear(tape.gelu(linear(ln2, pre + "fc1")), pre + "fc2"));
    }
    return linear(tape.layer_norm_rows(h), "out_proj");
}

Matrix Denoiser::predict_noise(const Matrix& noisy_tokens, const Matrix& prompt, int k) const {
    auto* self = const_cast<Denoiser*>(this);
    Tape tape(false);
    auto out = self->predict_noise(tape, tape.input(noisy_tokens), prompt, k);
    return tape.value(out);
}

Matrix Denoiser::adaptive_attention_weights(const Matrix& queries, const Matrix& prompt) const {
    if (prompt.rows != 2 || prompt.cols != prompt_dim_)
        throw ValidationError("prompt must be 2x" + std::to_string(prompt_dim_));
    auto* self = const_cast<Denoiser*>(this);
    Tape tape(false);
    auto p2 = tape.matmul_nt(tape.input(prompt), tape.leaf(self->store_.at("prompt_proj.weight")));
    auto u = tape.tanh_act(tape.add_rowvec(
        tape.matmul_nt(p2, tape.leaf(self->store_.at("cond_attn.weight"))),
        tape.leaf(self->store_.at("cond_attn.bias"))));
    auto alpha = tape.softmax_rows(tape.matmul_nt(tape.input(queries), u));
    return tape.value(alpha);
}

}  // namespace gpd
