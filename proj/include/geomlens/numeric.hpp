#pragma once

#include "geomlens/types.hpp"

#include <cstdint>
#include <random>
#include <span>

namespace geomlens::numeric {

/// Pairwise (cascade) summation. Blocks of 8 are summed sequentially, so the
/// result depends only on the input order, never on the platform.
double pairwise_sum(std::span<const double> values);

/// Adds rows [first, first+count) of a row-major block with the given stride
/// into `out` (length `width`) using the same pairwise tree as pairwise_sum.
void pairwise_row_sum(const double* base, std::size_t first, std::size_t count, std::size_t stride,
                      std::size_t width, double* out);

/// Cosine similarity; returns 0 when either vector is zero.
double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Seed for trial `index` derived from a master seed (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

using Rng = std::mt19937_64;

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sigma = 1.0);

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Matrix random_orthogonal(Eigen::Index n, Rng& rng);

/// Largest absolute entry.
double max_abs(const Eigen::Ref<const Matrix>& m);

}  // namespace geomlens::numeric
