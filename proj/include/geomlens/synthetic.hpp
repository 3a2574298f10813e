#pragma once

#include "geomlens/decompose.hpp"
#include "geomlens/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace geomlens::synthetic {

/// Parameters of the planted four-component model
/// h_{c,t} = mu + pos_t + ctx_c + resid_{c,t}.
struct PlantedSpec {
    int C = 64;
    int T = 32;
    int d = 16;
    int rank = 4;
    /// Weight of frequency profile s (s = 1..rank); empty means all ones.
    std::vector<double> frequency_weights;
    int n_clusters = 1;
    double cluster_radius = 1.0;
    /// Per-sequence jitter around its cluster mean.
    double cluster_spread = 0.0;
    bool orthogonalize_clusters = true;
    double noise_sigma = 0.0;
    double mu_scale = 1.0;
    std::uint64_t seed = 1;
};

struct PlantedData {
    EmbeddingTensor tensor;
    Decomposition truth;
    /// Cluster means before centering over sequences, n_clusters × d.
    Matrix cluster_means;
};

/// Sequence c belongs to cluster c mod n_clusters (stored in seq_labels).
/// Throws InvalidInput on infeasible dimensions.
PlantedData generate(const PlantedSpec& spec);

/// Centered profiles f_s(t) - mean_t f_s, s = 1..r, as columns (T × r).
Matrix centered_profiles(int T, int r);

/// Unit-norm rows tracing a smooth curve of rank r: pair j contributes
/// w_j (cos, sin)(j pi t / T) along two random orthonormal directions, and an
/// odd r adds a constant direction. Requires 2 <= r <= min(T, d).
Matrix smooth_curve_basis(int T, int r, std::uint64_t seed, int d = 64);

/// i.i.d. Gaussian rows normalized to unit length (non-smooth baseline).
Matrix random_unit_rows(int T, int d, std::uint64_t seed);

}  // namespace geomlens::synthetic
