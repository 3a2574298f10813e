#pragma once

#include "geomlens/decompose.hpp"
#include "geomlens/types.hpp"

#include <string>

namespace geomlens::attention {

enum class MuMode { exclude, fold_into_pos };

MuMode parse_mu_mode(const std::string& s);
std::string to_string(MuMode m);

/// B_{t,t'} = h_t^T W h_{t'} for one sequence, and its four cross terms with
/// h_t = [mu] + pos_t + cvec_t.
struct QKConstituents {
    Matrix full;
    Matrix pp;
    Matrix pc;
    Matrix cp;
    Matrix cc;
    MuMode mu_mode = MuMode::exclude;
};

QKConstituents qk_decompose(const Decomposition& dec, const AttentionWeights& w, std::size_t seq_index,
                            MuMode mu_mode = MuMode::exclude);
QKConstituents qk_decompose(const EmbeddingTensor& e, const AttentionWeights& w, std::size_t seq_index,
                            MuMode mu_mode = MuMode::exclude);

/// Row-wise softmax of a QK matrix that already includes the 1/sqrt(d_head)
/// temperature. With `causal`, entries t' > t get zero weight.
Matrix attention_matrix(const Eigen::Ref<const Matrix>& qk, bool causal);

/// Fraction of rows t = 2..T whose maximizer over t' <= t (all t' when not
/// causal) is t itself. The smallest index wins ties, so a tie never counts.
double argmax_locality_ratio(const Eigen::Ref<const Matrix>& B, bool causal = true);

/// pos-pos constituent P~ W P~^T with P~ rows pos_t (+ mu when folded).
Matrix pos_pos_constituent(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Vector>& mu,
                           const Eigen::Ref<const Matrix>& W, MuMode mu_mode = MuMode::fold_into_pos);

inline constexpr int kDefaultK = 20;
inline constexpr double kDefaultQuantile = 0.98;

struct WeightDissection {
    Vector D;              // diag(W)
    Matrix V;              // d × K, top-K right singular vectors of P
    Matrix V_full;         // d × d, complete right singular basis
    Matrix rotated;        // V_full^T (W - diag D) V_full
    Matrix denoised;       // rotated with |entries| below threshold zeroed
    Matrix noise;          // rotated - denoised
    Matrix L;              // top-left K × K block of denoised
    double threshold = 0.0;
    int K = 0;
    double energy_fraction = 0.0;  // ||L||_F^2 / ||denoised||_F^2
    std::string warning;
};

/// Dissects W (d × d) against the positional basis P (T × d). Order:
/// rotate, threshold at the |value| quantile, measure.
WeightDissection dissect_weights(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Matrix>& P, int K,
                                 double threshold_quantile = kDefaultQuantile);
WeightDissection dissect_weights(const AttentionWeights& w, const Eigen::Ref<const Matrix>& P, int K,
                                 double threshold_quantile = kDefaultQuantile);

/// Linear-interpolation quantile of a sample (q in [0, 1]).
double quantile(std::vector<double> values, double q);

}  // namespace geomlens::attention
