#pragma once

#include "geomlens/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace geomlens::geometry {

struct Incoherence {
    double max = 0.0;
    double mean = 0.0;
    std::size_t pairs = 0;
};

/// |cos(pos_t, ctx_c)| over all pairs with nonzero rows.
Incoherence incoherence(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx);

struct ClusterSimilarity {
    std::optional<double> inter;  // mean cosine over different-label pairs
    std::optional<double> intra;  // mean cosine over same-label pairs
    std::size_t inter_pairs = 0;
    std::size_t intra_pairs = 0;
};

/// Unordered pairs, self-pairs excluded; zero rows are skipped.
ClusterSimilarity cluster_similarity(const Eigen::Ref<const Matrix>& ctx, const std::vector<long long>& labels);

/// (T + C) × (T + C) matrix of inner products of the normalized rows of
/// [pos; ctx]. `ctx` may have zero rows.
Matrix joint_gram(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx);

struct SimilarityReport {
    Incoherence incoherence;
    ClusterSimilarity clusters;
};

SimilarityReport similarity_report(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& ctx,
                                   const std::vector<long long>& labels);

struct PcaProjection {
    Matrix axes;         // d × n_components
    Matrix pos_coords;   // T × n_components
    Matrix cvec_coords;  // samples × n_components
    int effective_components = 0;
    std::string warning;
};

/// Projects pos rows and cvec samples (rows of `cvec_samples`) onto the top
/// right singular directions of P. Each axis is oriented so that pos_T has a
/// nonnegative coordinate. If rank(P) < n_components, the missing
/// coordinates are zero and `warning` is set.
PcaProjection pca_projection(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Matrix>& cvec_samples,
                             int n_components = 2);

}  // namespace geomlens::geometry
