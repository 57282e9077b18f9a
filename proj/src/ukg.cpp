#include "gpd/ukg.hpp"

#include <cmath>
#include <deque>
#include <numbers>
#include <unordered_set>

#include "gpd/common.hpp"
#include "gpd/container.hpp"
#include "gpd/kernels.hpp"
#include "gpd/params.hpp"
#include "gpd/rng.hpp"

namespace gpd {

std::string to_string(Relation r) {
    switch (r) {
        case Relation::BorderBy: return "BorderBy";
        case Relation::NearBy: return "NearBy";
        case Relation::SimilarFunc: return "SimilarFunc";
    }
    throw ValidationError("bad Relation");
}

Relation relation_from_string(const std::string& s) {
    if (s == "BorderBy") return Relation::BorderBy;
    if (s == "NearBy") return Relation::NearBy;
    if (s == "SimilarFunc") return Relation::SimilarFunc;
    throw ParseError("unknown relation '" + s + "'");
}

std::vector<double> series_feature_vector(const SpatioTemporalGraph& g, const std::string& region,
                                          TimeSpan span) {
    const auto x = g.series_window(g.node_index(region), span.begin, span.end);
    const long len = static_cast<long>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= len;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    std::vector<double> f{mean, std::sqrt(var / len)};
    const long m = std::min<long>(8, len / 2);
    for (long k = 1; k <= m; ++k) {
        double re = 0.0, im = 0.0;
        for (long t = 0; t < len; ++t) {
            const double w = 2.0 * std::numbers::pi * k * t / len;
            re += x[t] * std::cos(w);
            im -= x[t] * std::sin(w);
        }
        f.push_back(2.0 * std::sqrt(re * re + im * im) / len);
    }
    return f;
}

namespace {

// BFS hop distances from every node, capped at max_hops.
std::vector<std::vector<int>> hop_distances(const SpatioTemporalGraph& g, int max_hops) {
    const int n = g.node_count();
    std::vector<std::vector<int>> neighbors(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (g.edge(i, j)) neighbors[i].push_back(j);
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
    for (int s = 0; s < n; ++s) {
        dist[s][s] = 0;
        std::deque<int> q{s};
        while (!q.empty()) {
            const int u = q.front();
            q.pop_front();
            if (dist[s][u] >= max_hops) continue;
            for (int v : neighbors[u])
                if (dist[s][v] < 0) {
                    dist[s][v] = dist[s][u] + 1;
                    q.push_back(v);
                }
        }
    }
    return dist;
}

}  // namespace

std::vector<UKGTriple> build_joint_ukg(const std::vector<CityFeatureInput>& cities,
                                       const UKGOptions& opt) {
    if (cities.empty()) throw ValidationError("no cities");
    if (opt.near_radius < 1) throw ValidationError("near_radius must be >= 1");

    std::vector<UKGTriple> triples;
    long border = 0, near = 0, similar = 0;

    std::vector<std::string> all_ids;
    std::vector<std::vector<double>> features;
    for (const auto& [g, span] : cities) {
        if (!g) throw ValidationError("null graph");
        const int n = g->node_count();
        const auto dist = hop_distances(*g, opt.near_radius);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                if (g->edge(i, j)) {
                    triples.push_back({g->node_ids()[i], Relation::BorderBy, g->node_ids()[j]});
                    ++border;
                } else if (dist[i][j] >= 2 && dist[i][j] <= opt.near_radius) {
                    triples.push_back({g->node_ids()[i], Relation::NearBy, g->node_ids()[j]});
                    ++near;
                }
            }
        for (int i = 0; i < n; ++i) {
            all_ids.push_back(g->node_ids()[i]);
            features.push_back(series_feature_vector(*g, g->node_ids()[i], span));
        }
    }

    for (size_t i = 0; i < all_ids.size(); ++i)
        for (size_t j = 0; j < all_ids.size(); ++j) {
            if (i == j) continue;
            if (cosine_similarity(features[i], features[j]) >= opt.sim_threshold) {
                triples.push_back({all_ids[i], Relation::SimilarFunc, all_ids[j]});
                ++similar;
            }
        }

    if (border == 0) warn("UKG has no BorderBy triples");
    if (near == 0) warn("UKG has no NearBy triples");
    if (similar == 0) warn("UKG has no SimilarFunc triples");
    return triples;
}

std::vector<UKGTriple> build_ukg(const SpatioTemporalGraph& g, TimeSpan feature_span,
                                 const UKGOptions& opt,
                                 const std::map<std::string, std::vector<double>>* func_features) {
    if (!func_features) return build_joint_ukg({{&g, feature_span}}, opt);

    // Spatial relations as in the joint builder, similarity from the caller's
    // feature vectors.
    auto triples = build_joint_ukg({{&g, feature_span}},
                                   UKGOptions{opt.near_radius, 2.0 /* cosine can't reach 2 */});
    long similar = 0;
    const int n = g.node_count();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto a = func_features->find(g.node_ids()[i]);
            const auto b = func_features->find(g.node_ids()[j]);
            if (a == func_features->end() || b == func_features->end())
                throw ValidationError("func_features missing a region");
            if (cosine_similarity(a->second, b->second) >= opt.sim_threshold) {
                triples.push_back({g.node_ids()[i], Relation::SimilarFunc, g.node_ids()[j]});
                ++similar;
            }
        }
    if (similar == 0) warn("UKG has no SimilarFunc triples");
    return triples;
}

void TuckerConfig::validate() const {
    if (d_kg < 1) throw ValidationError("d_kg must be >= 1");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (lr <= 0) throw ValidationError("lr must be positive");
    if (negative_ratio < 1) throw ValidationError("negative_ratio must be >= 1");
}

TuckerModel::TuckerModel(std::vector<std::string> entities, int d_kg, uint64_t seed)
    : entities_(std::move(entities)), d_(d_kg) {
    if (entities_.empty()) throw ValidationError("no entities");
    if (d_ < 1) throw ValidationError("d_kg must be >= 1");
    for (size_t i = 0; i < entities_.size(); ++i) {
        if (!index_.emplace(entities_[i], static_cast<int>(i)).second)
            throw ValidationError("duplicate entity '" + entities_[i] + "'");
    }
    Rng rng(derive_seed(seed, "tucker-init"));
    entity_emb_ = Matrix::gaussian(static_cast<int>(entities_.size()), d_, rng, 0.1);
    relation_emb_ = Matrix::gaussian(kNumRelations, d_, rng, 0.1);
    core_ = Matrix::gaussian(d_, d_ * d_, rng, 1.0 / std::sqrt(static_cast<double>(d_)));
}

int TuckerModel::entity_index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown entity '" + id + "'");
    return it->second;
}

std::vector<double> TuckerModel::entity_embedding(const std::string& id) const {
    const int i = entity_index(id);
    const double* row = entity_emb_.row(i);
    return std::vector<double>(row, row + d_);
}

Matrix TuckerModel::relation_matrix(Relation rel) const {
    const double* er = relation_emb_.row(static_cast<int>(rel));
    Matrix m(d_, d_);
    for (int a = 0; a < d_; ++a) {
        const double* wa = core_.row(a);
        double* ma = m.row(a);
        for (int b = 0; b < d_; ++b) {
            const double eb = er[b];
            const double* wab = wa + static_cast<long>(b) * d_;
            for (int c = 0; c < d_; ++c) ma[c] += eb * wab[c];
        }
    }
    return m;
}

double TuckerModel::score(int head, Relation rel, int tail) const {
    if (head < 0 || head >= entity_emb_.rows || tail < 0 || tail >= entity_emb_.rows)
        throw ValidationError("entity index out of range");
    const Matrix m = relation_matrix(rel);
    const double* eh = entity_emb_.row(head);
    const double* et = entity_emb_.row(tail);
    double s = 0.0;
    for (int a = 0; a < d_; ++a) {
        const double* ma = m.row(a);
        double inner = 0.0;
        for (int c = 0; c < d_; ++c) inner += ma[c] * et[c];
        s += eh[a] * inner;
    }
    return s;
}

double TuckerModel::score(const std::string& head, Relation rel, const std::string& tail) const {
    return score(entity_index(head), rel, entity_index(tail));
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TuckerModel train_tucker(const std::vector<UKGTriple>& triples,
                         const std::vector<std::string>& entities, const TuckerConfig& cfg,
                         std::vector<double>* loss_history) {
    cfg.validate();
    if (triples.empty()) throw ValidationError("no triples");
    TuckerModel model(entities, cfg.d_kg, cfg.seed);
    const int n = static_cast<int>(entities.size());
    const int d = cfg.d_kg;

    // Index triples and group them by relation.
    std::vector<std::vector<std::pair<int, int>>> by_rel(kNumRelations);
    std::unordered_set<long> positive;
    for (const auto& tr : triples) {
        const int h = model.entity_index(tr.head);
        const int t = model.entity_index(tr.tail);
        if (h == t) throw ValidationError("self-loop triple on '" + tr.head + "'");
        by_rel[static_cast<int>(tr.relation)].push_back({h, t});
        positive.insert((static_cast<long>(h) * kNumRelations + static_cast<int>(tr.relation)) * n +
                        t);
    }

    ParamStore store;
    store.add("entity_embeddings", model.entity_embeddings());
    store.add("relation_embeddings", model.relation_embeddings());
    store.add("core", model.core());
    AdamOptimizer opt(cfg.lr);
    Rng rng(derive_seed(cfg.seed, "tucker-train"));

    Matrix& ent = store.at("entity_embeddings").value;
    Matrix& rel = store.at("relation_embeddings").value;
    Matrix& core = store.at("core").value;
    Matrix& d_ent = store.at("entity_embeddings").grad;
    Matrix& d_rel = store.at("relation_embeddings").grad;
    Matrix& d_core = store.at("core").grad;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        store.zero_grad();
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int r = 0; r < kNumRelations; ++r) {
            const auto& pos = by_rel[r];
            if (pos.empty()) continue;

            Matrix m_r(d, d);
            const double* er = rel.row(r);
            for (int a = 0; a < d; ++a) {
                const double* wa = core.row(a);
                double* ma = m_r.row(a);
                for (int b = 0; b < d; ++b) {
                    const double eb = er[b];
                    const double* wab = wa + static_cast<long>(b) * d;
                    for (int c = 0; c < d; ++c) ma[c] += eb * wab[c];
                }
            }

            // Batch of positives plus corrupted-tail negatives.
            const int m = static_cast<int>(pos.size()) * (1 + cfg.negative_ratio);
            std::vector<int> heads, tails;
            std::vector<double> labels;
            heads.reserve(m);
            tails.reserve(m);
            labels.reserve(m);
            for (const auto& [h, t] : pos) {
                heads.push_back(h);
                tails.push_back(t);
                labels.push_back(1.0);
                for (int j = 0; j < cfg.negative_ratio; ++j) {
                    int t2 = h;
                    for (int tries = 0; tries < 100; ++tries) {
                        t2 = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
                        if (t2 != h &&
                            !positive.count((static_cast<long>(h) * kNumRelations + r) * n + t2))
                            break;
                    }
                    heads.push_back(h);
                    tails.push_back(t2);
                    labels.push_back(0.0);
                }
            }

            Matrix H(m, d), T(m, d);
            for (int i = 0; i < m; ++i) {
                std::copy(ent.row(heads[i]), ent.row(heads[i]) + d, H.row(i));
                std::copy(ent.row(tails[i]), ent.row(tails[i]) + d, T.row(i));
            }
            Matrix U, V;
            matmul_nt(T, m_r, U);  // row i = M_r * e_tail(i)
            matmul(H, m_r, V);     // row i = M_r^T * e_head(i)

            Matrix Hg(m, d);  // rows scaled by d(loss)/d(phi)
            for (int i = 0; i < m; ++i) {
                double phi = 0.0;
                const double* hi = H.row(i);
                const double* ui = U.row(i);
                for (int a = 0; a < d; ++a) phi += hi[a] * ui[a];
                loss_sum += softplus(phi) - labels[i] * phi;
                ++loss_count;
                const double gphi = sigmoid(phi) - labels[i];
                double* eh = d_ent.row(heads[i]);
                double* et = d_ent.row(tails[i]);
                const double* vi = V.row(i);
                for (int a = 0; a < d; ++a) {
                    eh[a] += gphi * ui[a];
                    et[a] += gphi * vi[a];
                }
                double* hg = Hg.row(i);
                for (int a = 0; a < d; ++a) hg[a] = gphi * hi[a];
            }

            Matrix S;  // S[a,c] = sum_i gphi_i eh_i[a] et_i[c]
            matmul_tn(Hg, T, S);
            double* gr = d_rel.row(r);
            for (int a = 0; a < d; ++a) {
                const double* wa = core.row(a);
                double* ga = d_core.row(a);
                const double* sa = S.row(a);
                for (int b = 0; b < d; ++b) {
                    const double eb = er[b];
                    const double* wab = wa + static_cast<long>(b) * d;
                    double* gab = ga + static_cast<long>(b) * d;
                    double acc = 0.0;
                    for (int c = 0; c < d; ++c) {
                        acc += wab[c] * sa[c];
                        gab[c] += eb * sa[c];
                    }
                    gr[b] += acc;
                }
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(loss_count);
        if (!std::isfinite(mean_loss))
            throw NumericError("non-finite TuckER loss at epoch " + std::to_string(epoch));
        if (loss_history) loss_history->push_back(mean_loss);
        opt.step(store);
    }

    model.entity_embeddings() = ent;
    model.relation_embeddings() = rel;
    model.core() = core;
    return model;
}

std::vector<double> spatial_prompt(const TuckerModel& model, const std::string& region) {
    return model.entity_embedding(region);
}

void save_tucker(const std::filesystem::path& path, const TuckerModel& model) {
    Container c;
    c.header["kind"] = "tucker";
    c.header["entities"] = model.entities();
    c.header["d_kg"] = model.dim();
    c.blocks.emplace_back("entity_embeddings", model.entity_embeddings().a);
    c.blocks.emplace_back("relation_embeddings", model.relation_embeddings().a);
    c.blocks.emplace_back("core", model.core().a);
    write_container(path, c);
}

TuckerModel load_tucker(const std::filesystem::path& path) {
    Container c = read_container(path);
    try {
        if (c.header.at("kind").get<std::string>() != "tucker")
            throw ParseError("wrong container kind (field 'kind') in " + path.string());
        auto entities = c.header.at("entities").get<std::vector<std::string>>();
        const int d = c.header.at("d_kg").get<int>();
        TuckerModel model(std::move(entities), d, 0);
        auto fill = [&](const char* name, Matrix& m) {
            const auto& block = c.block(name);
            if (block.size() != m.a.size())
                throw ParseError("block '" + std::string(name) + "' has wrong length in " +
                                 path.string());
            m.a = block;
        };
        fill("entity_embeddings", model.entity_embeddings());
        fill("relation_embeddings", model.relation_embeddings());
        fill("core", model.core());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad tucker header in " + path.string() + ": " + e.what());
    }
}

}  // namespace gpd
