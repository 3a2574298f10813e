#pragma once

#include "geomlens/decompose.hpp"
#include "geomlens/types.hpp"

#include <map>
#include <vector>

namespace geomlens::fourier {

/// Normalized Gram matrix of the positional basis and its 2T×2T reflected
/// extension [[G, G(:,rev)], [G(rev,:), G(rev,rev)]].
struct GramBundle {
    Matrix G;
    Matrix G_ext;
    std::vector<Eigen::Index> excluded_rows;
};

GramBundle gram(const PositionalBasis& basis);
Matrix extend_reflect(const Eigen::Ref<const Matrix>& G);

/// Orthonormal type-II DCT matrix: row k is a_k cos(pi k (n + 1/2) / T),
/// a_0 = sqrt(1/T), a_k = sqrt(2/T).
Matrix dct_matrix(Eigen::Index T);

struct FrequencySummary {
    Matrix G_hat;
    std::map<int, double> ratios;  // K -> r_K
};

/// G_hat = F G F^T and r_K = sum_{i,j<=K} G_hat_ij^2 / sum G_hat_ij^2.
FrequencySummary dct2(const Eigen::Ref<const Matrix>& G, const std::vector<int>& Ks = {1, 3, 5, 10});
Matrix inverse_dct2(const Eigen::Ref<const Matrix>& G_hat);
double low_frequency_ratio(const Eigen::Ref<const Matrix>& G_hat, int K);

struct FiniteDifference {
    Matrix values;
    double max_norm = 0.0;
};

/// Delta^{(m,m)} of a 2T×2T periodic matrix; each application is
/// T^2 (A_{t,t'} - A_{t-1,t'} - A_{t,t'-1} + A_{t-1,t'-1}) with wraparound.
FiniteDifference finite_difference(const Eigen::Ref<const Matrix>& G_ext, int m);

/// Columns f_s(t) = cos((s - 1/2)(t - 1) pi / T), s = 1..k.
Matrix low_frequency_vectors(Eigen::Index T, Eigen::Index k);

enum class BScaling {
    /// B = (Q^T Q)^{-1} B0 / 2: F B (F B)^T is the exact compression of G
    /// onto span(f_1..f_k).
    exact,
    /// B = B0 / (2T), without the (Q^T Q)^{-1} correction.
    literal,
};

struct Thm1Options {
    bool recenter = true;
    BScaling scaling = BScaling::exact;
};

struct Thm1Certificate {
    int k = 0;
    int m = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double delta_max = 0.0;  // ||Delta^{(m,m)} G_ext||_max
    Matrix B;                 // k × k
    bool holds = false;
    bool recentered = false;
    double min_eigenvalue = 0.0;  // of 4 Q^T G Q before clipping
    std::vector<Eigen::Index> excluded_rows;
};

inline constexpr double kRecenterTolerance = 1e-8;
inline constexpr double kEigenClip = 1e-10;
inline constexpr double kEigenFailure = 1e-6;

/// Builds the certificate for rows of `P_norm` (T × d, unit rows expected).
/// Throws NumericalFailure if 4 Q^T G Q has an eigenvalue below -1e-6 (scaled
/// by max(1, largest eigenvalue)).
Thm1Certificate thm1_verify(const Eigen::Ref<const Matrix>& P_norm, int k, int m, const Thm1Options& opts = {});

/// Operator norm of a symmetric matrix via its eigenvalues.
double symmetric_operator_norm(const Eigen::Ref<const Matrix>& A);

}  // namespace geomlens::fourier
