#pragma once

#include "geomlens/types.hpp"

#include <cstdint>
#include <vector>

namespace geomlens::spectral {

enum class RankMethod { gap, energy };

struct SpectralSummary {
    std::vector<double> singular_values;  // descending
    int rank_gap = 0;
    int rank_energy = 0;
    double stable_rank = 0.0;
    double relative_norm = 0.0;
};

/// Full singular spectrum, descending. Throws InvalidInput on non-finite entries.
std::vector<double> singular_spectrum(const Eigen::Ref<const Matrix>& m);

/// ||M||_F^2 / ||M||_op^2. Throws DegenerateInput for the zero matrix.
double stable_rank(const Eigen::Ref<const Matrix>& m);
double stable_rank_from_spectrum(const std::vector<double>& sigma);

/// gap:    argmax_{i <= ceil(n/2)} sigma_i / sigma_{i+1}, smallest i on ties
///         (a successor below kZeroSingularValue * sigma_1 counts as an
///         infinite ratio).
/// energy: smallest k with sum_{i<=k} sigma_i^2 >= 0.95 sum sigma_i^2.
int rank_estimate(const Eigen::Ref<const Matrix>& m, RankMethod method);
int rank_estimate_from_spectrum(const std::vector<double>& sigma, RankMethod method);

inline constexpr double kEnergyFraction = 0.95;
inline constexpr double kZeroSingularValue = 1e-12;
inline constexpr Eigen::Index kPowerIterationMinDim = 512;

struct PowerIterationOptions {
    double tolerance = 1e-10;
    int max_iterations = 1000;
    std::uint64_t seed = 0x5EEDULL;
};

struct PowerIterationResult {
    double sigma = 0.0;
    int iterations = 0;
    bool converged = false;
};

PowerIterationResult power_iteration_norm(const Eigen::Ref<const Matrix>& m, const PowerIterationOptions& opts = {});

/// ||M||_op. Power iteration when min(rows, cols) > 512; otherwise the top
/// eigenvalue of the smaller Gram matrix (or a direct SVD for near-square
/// inputs).
double operator_norm(const Eigen::Ref<const Matrix>& m);

/// ||P||_op / ||M||_op. Throws DegenerateInput when M is zero.
double relative_norm(const Eigen::Ref<const Matrix>& P, const Eigen::Ref<const Matrix>& m_centered);

/// Operator norm of the centered token matrix (h_{c,t} - mu) without
/// materializing it.
double centered_operator_norm(const EmbeddingTensor& e, const Eigen::Ref<const Vector>& mu);

/// Spectrum, both rank estimates and stable rank of P; relative norm against
/// the centered embeddings of `e`.
SpectralSummary summarize(const Eigen::Ref<const Matrix>& P, const EmbeddingTensor& e,
                          const Eigen::Ref<const Vector>& mu);

}  // namespace geomlens::spectral
