#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gpd/matrix.hpp"
#include "gpd/stgraph.hpp"

namespace gpd {

enum class Relation { BorderBy = 0, NearBy = 1, SimilarFunc = 2 };
inline constexpr int kNumRelations = 3;

std::string to_string(Relation r);
Relation relation_from_string(const std::string& s);

struct UKGTriple {
    std::string head;
    Relation relation = Relation::BorderBy;
    std::string tail;

    bool operator==(const UKGTriple&) const = default;
};

// [mean, std, leading DFT magnitudes] of one region's series over `span` —
// the stand-in for POI category distributions on synthetic cities.
std::vector<double> series_feature_vector(const SpatioTemporalGraph& g, const std::string& region,
                                          TimeSpan span);

struct UKGOptions {
    int near_radius = 2;         // NearBy = graph distance in [2, near_radius]
    double sim_threshold = 0.9;  // SimilarFunc cutoff on feature cosine
};

// BorderBy from edges, NearBy from BFS distance, SimilarFunc from feature
// cosine. Symmetric relations are stored in both directions. When
// func_features is null, features default to series_feature_vector over
// feature_span (keep it inside the few-shot window for target cities).
std::vector<UKGTriple> build_ukg(const SpatioTemporalGraph& g, TimeSpan feature_span,
                                 const UKGOptions& opt = {},
                                 const std::map<std::string, std::vector<double>>* func_features =
                                     nullptr);

// Joint graph over several cities: BorderBy/NearBy stay within each city,
// SimilarFunc crosses city boundaries. This is what lets a target region's
// embedding land near source regions with a matching profile.
struct CityFeatureInput {
    const SpatioTemporalGraph* graph = nullptr;
    TimeSpan feature_span;
};

std::vector<UKGTriple> build_joint_ukg(const std::vector<CityFeatureInput>& cities,
                                       const UKGOptions& opt = {});

struct TuckerConfig {
    int d_kg = 128;
    int epochs = 200;
    double lr = 5e-3;
    int negative_ratio = 10;
    uint64_t seed = 2;

    void validate() const;
};

// Trilinear knowledge-graph scorer: phi(h,r,t) = sum_{a,b,c} W[a,b,c]
// e_h[a] e_r[b] e_t[c]. The core tensor is stored row-major as a
// (d x d*d) matrix with W[a,b,c] at (a, b*d+c).
class TuckerModel {
  public:
    TuckerModel(std::vector<std::string> entities, int d_kg, uint64_t seed);

    double score(int head, Relation rel, int tail) const;
    double score(const std::string& head, Relation rel, const std::string& tail) const;

    const std::vector<std::string>& entities() const { return entities_; }
    int entity_index(const std::string& id) const;  // throws on unknown id
    std::vector<double> entity_embedding(const std::string& id) const;
    int dim() const { return d_; }

    Matrix& entity_embeddings() { return entity_emb_; }
    const Matrix& entity_embeddings() const { return entity_emb_; }
    Matrix& relation_embeddings() { return relation_emb_; }
    const Matrix& relation_embeddings() const { return relation_emb_; }
    Matrix& core() { return core_; }
    const Matrix& core() const { return core_; }

    // M_r[a,c] = sum_b W[a,b,c] e_r[b]; score(h,r,t) = e_h^T M_r e_t.
    Matrix relation_matrix(Relation rel) const;

  private:
    std::vector<std::string> entities_;
    std::map<std::string, int> index_;
    int d_;
    Matrix entity_emb_;    // entities x d
    Matrix relation_emb_;  // kNumRelations x d
    Matrix core_;          // d x d*d
};

// Binary cross-entropy on sigmoid(phi) with uniformly corrupted tails.
TuckerModel train_tucker(const std::vector<UKGTriple>& triples,
                         const std::vector<std::string>& entities, const TuckerConfig& cfg,
                         std::vector<double>* loss_history = nullptr);

std::vector<double> spatial_prompt(const TuckerModel& model, const std::string& region);

void save_tucker(const std::filesystem::path& path, const TuckerModel& model);
TuckerModel load_tucker(const std::filesystem::path& path);

}  // namespace gpd
