#pragma once

#include "geomlens/tensor_io.hpp"
#include "geomlens/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace geomlens {

/// h_{c,t} = mu + pos_t + ctx_c + resid_{c,t}.
struct Decomposition {
    Vector mu;         // d
    Matrix pos;        // T × d
    Matrix ctx;        // C × d
    RowMatrix resid;   // (C·T) × d, row c·T + t

    std::size_t num_sequences() const { return static_cast<std::size_t>(ctx.rows()); }
    std::size_t num_positions() const { return static_cast<std::size_t>(pos.rows()); }

    /// cvec_{c,t} = ctx_c + resid_{c,t}, materialized on demand.
    Vector cvec(std::size_t c, std::size_t t) const;
    /// T × d matrix of cvec_{c,·} for one sequence.
    Matrix cvec_sequence(std::size_t c) const;

    /// Rebuilds the tensor mu + pos + ctx + resid.
    EmbeddingTensor reconstruct() const;
};

/// Means only (no residual tensor); the report path uses this to avoid
/// materializing a second C×T×d array.
struct MeanComponents {
    Vector mu;
    Matrix pos;
    Matrix ctx;
};

/// Rows pos_t and their unit-normalized versions. Zero rows stay zero in
/// `normalized` and are listed in `zero_rows`.
struct PositionalBasis {
    Matrix P;
    Matrix normalized;
    std::vector<Eigen::Index> zero_rows;

    static PositionalBasis from_rows(const Eigen::Ref<const Matrix>& pos);
    bool is_zero_row(Eigen::Index t) const;
};

Decomposition decompose(const EmbeddingTensor& e);
MeanComponents decompose_means(const EmbeddingTensor& e);

struct ArtifactOptions {
    bool drop_first_token = false;
    bool drop_layer_if_last = false;
    /// Index of the final layer of the model; needed for drop_layer_if_last.
    std::optional<int> final_layer;
};

/// Removes position 1 when requested. Returns nullopt when the tensor is the
/// final layer and drop_layer_if_last is set.
std::optional<EmbeddingTensor> drop_artifacts(const EmbeddingTensor& e, const ArtifactOptions& opts);
/// Same, reusing the storage of `e`.
std::optional<EmbeddingTensor> drop_artifacts(EmbeddingTensor&& e, const ArtifactOptions& opts);

struct CrossLayerStats {
    Matrix cosine;             // L × L, mean cos(h^l_{c,t}, h^l'_{c,t})
    std::vector<double> mean_norm;  // L, mean ||h_{c,t}||
};

CrossLayerStats cross_layer_stats(const std::vector<EmbeddingTensor>& layers);

/// Writes mu/pos/ctx/resid as "generic" containers plus decomposition.json.
void write_decomposition(const Decomposition& dec, const std::filesystem::path& dir, io::DType dtype,
                         const io::json& extra_sidecar = io::json::object());

}  // namespace geomlens
