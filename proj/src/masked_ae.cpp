#include "gpd/masked_ae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gpd/common.hpp"
#include "gpd/container.hpp"

namespace gpd {

void MaskedAEConfig::validate() const {
    if (patch_len < 1) throw ValidationError("patch_len must be >= 1");
    if (mask_ratio <= 0.0 || mask_ratio >= 1.0)
        throw ValidationError("mask_ratio must lie in (0,1)");
    if (enc_dim < 1 || layers < 1 || heads < 1)
        throw ValidationError("enc_dim, layers, heads must be >= 1");
    if (enc_dim % heads != 0) throw ValidationError("enc_dim must be divisible by heads");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (lr <= 0) throw ValidationError("lr must be positive");
}

std::vector<int> choose_masked(int num_patches, double mask_ratio, Rng& rng) {
    if (num_patches < 1) throw ValidationError("no patches to mask");
    const int count = static_cast<int>(std::ceil(mask_ratio * num_patches));
    if (count >= num_patches)
        throw ValidationError("masking " + std::to_string(count) + " of " +
                              std::to_string(num_patches) + " patches leaves nothing visible");
    std::vector<int> idx(num_patches);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(num_patches - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

MaskedAutoencoder::MaskedAutoencoder(const MaskedAEConfig& cfg, int max_patches)
    : cfg_(cfg), max_patches_(max_patches) {
    cfg_.validate();
    if (max_patches_ < 1) throw ValidationError("max_patches must be >= 1");
    Rng rng(derive_seed(cfg_.seed, "mae-init"));
    const int e = cfg_.enc_dim;
    auto linear = [&](const std::string& name, int out, int in) {
        Matrix w(out, in);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : w.a) v = rng.uniform(-bound, bound);
        store_.add(name + ".weight", std::move(w));
        store_.add(name + ".bias", Matrix(1, out));
    };
    linear("patch_embed", e, cfg_.patch_len);
    store_.add("pos_embedding", Matrix::gaussian(max_patches_, e, rng, 0.02));
    store_.add("mask_token", Matrix::gaussian(1, e, rng, 0.02));
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string p = "enc" + std::to_string(l) + ".";
        linear(p + "wq", e, e);
        linear(p + "wk", e, e);
        linear(p + "wv", e, e);
        linear(p + "wo", e, e);
        linear(p + "fc1", 2 * e, e);
        linear(p + "fc2", e, 2 * e);
    }
    linear("head", cfg_.patch_len, e);
}

Matrix MaskedAutoencoder::patchify(const std::vector<double>& series) const {
    const int p = static_cast<int>(series.size()) / cfg_.patch_len;
    if (p < 1)
        throw ValidationError("series of length " + std::to_string(series.size()) +
                              " is shorter than one patch (" + std::to_string(cfg_.patch_len) +
                              ")");
    Matrix out(p, cfg_.patch_len);
    std::copy(series.begin(), series.begin() + static_cast<long>(p) * cfg_.patch_len,
              out.a.begin());
    return out;
}

Tape::NodeId MaskedAutoencoder::encoder(Tape& tape, Tape::NodeId embedded) {
    const int e = cfg_.enc_dim;
    const int hd = e / cfg_.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    auto linear = [&](Tape::NodeId x, const std::string& name) {
        return tape.add_rowvec(tape.matmul_nt(x, tape.leaf(store_.at(name + ".weight"))),
                               tape.leaf(store_.at(name + ".bias")));
    };
    const int p = tape.rows(embedded);
    auto pos = tape.slice_rows(tape.leaf(store_.at("pos_embedding")), 0, p);
    auto h = tape.add(embedded, pos);
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::string pre = "enc" + std::to_string(l) + ".";
        auto ln = tape.layer_norm_rows(h);
        auto q = linear(ln, pre + "wq");
        auto k = linear(ln, pre + "wk");
        auto v = linear(ln, pre + "wv");
        std::vector<Tape::NodeId> heads;
        for (int i = 0; i < cfg_.heads; ++i) {
            auto qi = tape.slice_cols(q, i * hd, hd);
            auto ki = tape.slice_cols(k, i * hd, hd);
            auto vi = tape.slice_cols(v, i * hd, hd);
            auto att = tape.softmax_rows(tape.scale(tape.matmul_nt(qi, ki), att_scale));
            heads.push_back(tape.matmul(att, vi));
        }
        h = tape.add(h, linear(tape.concat_cols(heads), pre + "wo"));
        auto ln2 = tape.layer_norm_rows(h);
        auto mid = tape.gelu(linear(ln2, pre + "fc1"));
        h = tape.add(h, linear(mid, pre + "fc2"));
    }
    return tape.layer_norm_rows(h);
}

Tape::NodeId MaskedAutoencoder::reconstruction_loss(Tape& tape, const Matrix& patches,
                                                    const std::vector<int>& masked) {
    if (patches.cols != cfg_.patch_len) throw ValidationError("patch width mismatch");
    if (patches.rows > max_patches_)
        throw ValidationError("series has " + std::to_string(patches.rows) +
                              " patches, encoder supports " + std::to_string(max_patches_));
    const int p = patches.rows;
    const int e = cfg_.enc_dim;
    std::vector<uint8_t> mask_rows(p, 0);
    for (int i : masked) {
        if (i < 0 || i >= p) throw ValidationError("masked index out of range");
        mask_rows[i] = 1;
    }

    auto x = tape.input(patches);
    auto emb = tape.add_rowvec(tape.matmul_nt(x, tape.leaf(store_.at("patch_embed.weight"))),
                               tape.leaf(store_.at("patch_embed.bias")));
    if (!masked.empty()) {
        Matrix keep(p, e, 1.0), drop(p, e, 0.0);
        for (int i = 0; i < p; ++i)
            if (mask_rows[i])
                for (int j = 0; j < e; ++j) {
                    keep(i, j) = 0.0;
                    drop(i, j) = 1.0;
                }
        auto token_rows =
            tape.add_rowvec(tape.input(Matrix(p, e)), tape.leaf(store_.at("mask_token")));
        emb = tape.add(tape.mul(emb, tape.input(std::move(keep))),
                       tape.mul(token_rows, tape.input(std::move(drop))));
    }
    auto enc = encoder(tape, emb);
    auto rec = tape.add_rowvec(tape.matmul_nt(enc, tape.leaf(store_.at("head.weight"))),
                               tape.leaf(store_.at("head.bias")));
    return tape.mse_rows(rec, patches, mask_rows);
}

std::vector<double> MaskedAutoencoder::encode(const std::vector<double>& series) const {
    const Matrix patches = const_cast<MaskedAutoencoder*>(this)->patchify(series);
    if (patches.rows > max_patches_)
        throw ValidationError("series has " + std::to_string(patches.rows) +
                              " patches, encoder supports " + std::to_string(max_patches_));
    auto* self = const_cast<MaskedAutoencoder*>(this);
    Tape tape(false);
    auto x = tape.input(patches);
    auto emb =
        tape.add_rowvec(tape.matmul_nt(x, tape.leaf(self->store_.at("patch_embed.weight"))),
                        tape.leaf(self->store_.at("patch_embed.bias")));
    auto enc = self->encoder(tape, emb);
    return tape.value(tape.mean_rows(enc)).a;
}

MaskedAutoencoder train_masked_ae(const std::vector<std::vector<double>>& corpus,
                                  const MaskedAEConfig& cfg, std::vector<double>* epoch_losses) {
    cfg.validate();
    if (corpus.empty()) throw ValidationError("empty corpus");
    int max_patches = 0;
    for (const auto& s : corpus) {
        const int p = static_cast<int>(s.size()) / cfg.patch_len;
        if (p < 4)
            throw ValidationError("series of length " + std::to_string(s.size()) +
                                  " yields " + std::to_string(p) + " patches; need >= 4");
        max_patches = std::max(max_patches, p);
    }
    MaskedAutoencoder model(cfg, max_patches);
    AdamOptimizer opt(cfg.lr);
    Rng rng(derive_seed(cfg.seed, "mae-train"));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        model.params().zero_grad();
        double loss_sum = 0.0;
        for (const auto& s : corpus) {
            const Matrix patches = model.patchify(s);
            const auto masked = choose_masked(patches.rows, cfg.mask_ratio, rng);
            Tape tape;
            auto loss = model.reconstruction_loss(tape, patches, masked);
            loss_sum += tape.value(loss)(0, 0);
            tape.backward(loss);
        }
        const double mean_loss = loss_sum / static_cast<double>(corpus.size());
        if (!std::isfinite(mean_loss))
            throw NumericError("non-finite reconstruction loss at epoch " +
                               std::to_string(epoch));
        if (epoch_losses) epoch_losses->push_back(mean_loss);
        model.params().scale_grads(1.0 / static_cast<double>(corpus.size()));
        opt.step(model.params());
    }
    return model;
}

std::vector<double> temporal_prompt(const MaskedAutoencoder& encoder,
                                    const std::vector<double>& series) {
    return encoder.encode(series);
}

void save_masked_ae(const std::filesystem::path& path, const MaskedAutoencoder& model) {
    Container c;
    c.header["kind"] = "masked-ae";
    const auto& cfg = model.config();
    c.header["config"] = {{"patch_len", cfg.patch_len}, {"mask_ratio", cfg.mask_ratio},
                          {"enc_dim", cfg.enc_dim},     {"layers", cfg.layers},
                          {"heads", cfg.heads},         {"epochs", cfg.epochs},
                          {"lr", cfg.lr},               {"seed", cfg.seed}};
    c.header["max_patches"] = model.max_patches();
    for (const auto& p : model.params().entries()) c.blocks.emplace_back(p->name, p->value.a);
    write_container(path, c);
}

MaskedAutoencoder load_masked_ae(const std::filesystem::path& path) {
    Container c = read_container(path);
    try {
        if (c.header.at("kind").get<std::string>() != "masked-ae")
            throw ParseError("wrong container kind (field 'kind') in " + path.string());
        const auto& j = c.header.at("config");
        MaskedAEConfig cfg;
        cfg.patch_len = j.at("patch_len").get<int>();
        cfg.mask_ratio = j.at("mask_ratio").get<double>();
        cfg.enc_dim = j.at("enc_dim").get<int>();
        cfg.layers = j.at("layers").get<int>();
        cfg.heads = j.at("heads").get<int>();
        cfg.epochs = j.at("epochs").get<int>();
        cfg.lr = j.at("lr").get<double>();
        cfg.seed = j.at("seed").get<uint64_t>();
        MaskedAutoencoder model(cfg, c.header.at("max_patches").get<int>());
        for (auto& p : model.params().entries()) {
            const auto& block = c.block(p->name);
            if (block.size() != p->value.a.size())
                throw ParseError("block '" + p->name + "' has wrong length in " + path.string());
            p->value.a = block;
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad masked-ae header in " + path.string() + ": " + e.what());
    }
}

}  // namespace gpd
