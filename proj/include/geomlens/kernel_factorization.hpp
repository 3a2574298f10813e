#pragma once

#include "geomlens/types.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace geomlens::kernel {

/// Two dictionaries of unit vectors stored as columns.
struct IncoherentBases {
    Matrix basis1;  // d × n1
    Matrix basis2;  // d × n2
    double achieved_incoh = 0.0;
};

/// basis1 spans e_1..e_{n1}; atom j of basis2 starts at e_{n1+j} and is tilted
/// toward a random basis1 atom by arcsin(target_incoh). A random rotation is
/// then applied to both. Requires n1 + n2 <= d and target in [0, 1].
IncoherentBases build_incoherent_bases(int d, int n1, int n2, double target_incoh, std::uint64_t seed);

/// max |<b1, b2>| over cross pairs.
double mutual_incoherence(const Eigen::Ref<const Matrix>& basis1, const Eigen::Ref<const Matrix>& basis2);

/// log K_W(z, z') = z^T W z'.
double log_kernel(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Vector>& z,
                  const Eigen::Ref<const Vector>& zp);
/// exp(z^T W z'); +inf if the exponent overflows.
double kernel(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& zp);

/// Attention weights written as kernel smoothing: row t holds
/// K_W(x_t, x_k) / sum_{k'} K_W(x_t, x_{k'}) over k (k <= t when causal),
/// normalized in log space.
Matrix kernel_smoothing_weights(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& W, bool causal);

/// One s-sparse weight matrix W = sum_k a_k u_k v_k^T.
struct SparseWeight {
    Vector coeffs;  // s, in [-1, 1]
    Matrix U;       // d × s, atoms from the row basis (scaled by lambda in [-1, 1])
    Matrix V;       // d × s, atoms from the column basis
    Matrix W;       // d × d
    Matrix noise;   // d × d, Z / sqrt(d); empty when noise is off
    Matrix effective() const { return noise.size() ? Matrix(W + noise) : W; }
};

struct KernelTestInstance {
    IncoherentBases bases;
    int s = 0;
    bool noise = false;
    // weights[alpha][beta] uses basis alpha for U and basis beta for V.
    std::array<std::array<SparseWeight, 2>, 2> weights;
    Vector c_q, t_q, c_k, t_k;

    double incoh() const { return bases.achieved_incoh; }
    Vector x_q() const { return c_q + t_q; }
    Vector x_k() const { return c_k + t_k; }
    /// Sum of the four (noisy, if enabled) weight matrices.
    Matrix total_weight() const;
    /// Swaps query and key roles: W_ab -> W_ba^T, (c_q, t_q) <-> (c_k, t_k).
    KernelTestInstance transposed() const;
};

/// Draws atoms, coefficients and query/key parts from the given bases.
KernelTestInstance make_instance(const IncoherentBases& bases, int s, bool noise, std::uint64_t seed);

inline constexpr double kDefaultBoundConstant = 12.0;
inline constexpr double kDefaultNoiseConstant = 3.0;

struct Thm2Options {
    double bound_constant = kDefaultBoundConstant;
    double noise_constant = kDefaultNoiseConstant;  // C_z
};

struct Thm2Result {
    double log_lhs = 0.0;      // log K_W(x^q, x^k)
    double log_rhs_sum = 0.0;  // sum of the four proper-pair log kernels
    double gap = 0.0;
    double bound = 0.0;
    bool holds = false;
};

Thm2Result thm2_verify(const KernelTestInstance& inst, const Thm2Options& opts = {});

struct Thm2TrialConfig {
    int d = 256;
    int s = 3;
    int n1 = 16;
    int n2 = 16;
    double incoh = 0.05;
    int trials = 100;
    bool noise = false;
    std::uint64_t seed = 7;
    Thm2Options options;
};

struct Thm2TrialSummary {
    int trials = 0;
    int holds = 0;
    double max_gap = 0.0;
    double max_gap_over_bound = 0.0;
    double max_incoh = 0.0;
    std::vector<Thm2Result> results;
};

/// Trial i uses seed derive_seed(master, i) for bases and instance.
Thm2TrialSummary run_thm2_trials(const Thm2TrialConfig& cfg);

/// incoh = d^{-gamma}.
double incoh_from_gamma(int d, double gamma);

}  // namespace geomlens::kernel
