#include "geomlens/attention_analysis.hpp"

#include "geomlens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geomlens::attention {

MuMode parse_mu_mode(const std::string& s) {
    if (s == "exclude") return MuMode::exclude;
    if (s == "fold_into_pos" || s == "fold") return MuMode::fold_into_pos;
    throw InvalidInput("unknown mu mode '" + s + "' (expected exclude or fold_into_pos)");
}

std::string to_string(MuMode m) { return m == MuMode::exclude ? "exclude" : "fold_into_pos"; }

QKConstituents qk_decompose(const Decomposition& dec, const AttentionWeights& w, std::size_t seq_index,
                            MuMode mu_mode) {
    w.validate();
    if (w.dim() != dec.mu.size())
        throw InvalidInput("attention weights have d=" + std::to_string(w.dim()) + " but embeddings have d=" +
                           std::to_string(dec.mu.size()));
    if (seq_index >= dec.num_sequences()) throw InvalidInput("sequence index out of range");

    Matrix pos = dec.pos;
    if (mu_mode == MuMode::fold_into_pos) pos.rowwise() += dec.mu.transpose();
    const Matrix cvec = dec.cvec_sequence(seq_index);

    const double inv = 1.0 / std::sqrt(static_cast<double>(w.d_head()));
    const Matrix pq = pos * w.wq, pk = pos * w.wk;
    const Matrix cq = cvec * w.wq, ck = cvec * w.wk;
    const Matrix hq = pq + cq, hk = pk + ck;

    QKConstituents qk;
    qk.mu_mode = mu_mode;
    qk.pp = pq * pk.transpose() * inv;
    qk.pc = pq * ck.transpose() * inv;
    qk.cp = cq * pk.transpose() * inv;
    qk.cc = cq * ck.transpose() * inv;
    qk.full = hq * hk.transpose() * inv;
    return qk;
}

QKConstituents qk_decompose(const EmbeddingTensor& e, const AttentionWeights& w, std::size_t seq_index,
                            MuMode mu_mode) {
    if (static_cast<Eigen::Index>(e.dim()) != w.dim())
        throw InvalidInput("attention weights and embeddings have different d");
    return qk_decompose(decompose(e), w, seq_index, mu_mode);
}

Matrix attention_matrix(const Eigen::Ref<const Matrix>& qk, bool causal) {
    if (qk.rows() != qk.cols()) throw InvalidInput("QK matrix must be square");
    if (!qk.allFinite()) throw InvalidInput("QK matrix contains non-finite entries");
    const Eigen::Index T = qk.rows();
    Matrix a = Matrix::Zero(T, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::Index width = causal ? t + 1 : T;
        const double mx = qk.row(t).head(width).maxCoeff();
        double z = 0.0;
        for (Eigen::Index j = 0; j < width; ++j) {
            a(t, j) = std::exp(qk(t, j) - mx);
            z += a(t, j);
        }
        a.row(t).head(width) /= z;
    }
    return a;
}

double argmax_locality_ratio(const Eigen::Ref<const Matrix>& B, bool causal) {
    if (B.rows() != B.cols()) throw InvalidInput("argmax locality needs a square matrix");
    const Eigen::Index T = B.rows();
    if (T < 2) throw InvalidInput("argmax locality needs T >= 2");
    Eigen::Index hits = 0;
    for (Eigen::Index t = 1; t < T; ++t) {
        const Eigen::Index width = causal ? t + 1 : T;
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < width; ++j)
            if (B(t, j) > B(t, best)) best = j;
        if (best == t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(T - 1);
}

Matrix pos_pos_constituent(const Eigen::Ref<const Matrix>& pos, const Eigen::Ref<const Vector>& mu,
                           const Eigen::Ref<const Matrix>& W, MuMode mu_mode) {
    if (W.rows() != pos.cols() || W.cols() != pos.cols()) throw InvalidInput("W and pos dimensions differ");
    Matrix p = pos;
    if (mu_mode == MuMode::fold_into_pos) {
        if (mu.size() != pos.cols()) throw InvalidInput("mu and pos dimensions differ");
        p.rowwise() += mu.transpose();
    }
    return p * W * p.transpose();
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

WeightDissection dissect_weights(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Matrix>& P, int K,
                                 double threshold_quantile) {
    const Eigen::Index d = W.rows();
    if (W.cols() != d) throw InvalidInput("W must be square");
    if (P.cols() != d) throw InvalidInput("positional basis and W dimensions differ");
    if (!W.allFinite() || !P.allFinite()) throw InvalidInput("non-finite entries in W or P");
    if (K < 1 || K > d) throw InvalidInput("need 1 <= K <= d");
    if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0))
        throw InvalidInput("threshold quantile must lie in (0, 1)");

    WeightDissection out;
    Eigen::BDCSVD<Matrix> svd(P, Eigen::ComputeFullV);
    const Vector& sigma = svd.singularValues();
    const double tol = sigma.size() > 0 ? sigma(0) * 1e-12 * static_cast<double>(std::max(P.rows(), d)) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) > tol) ++rank;
    if (rank == 0) throw DegenerateInput("positional basis is zero");
    out.K = K;
    if (K > rank) {
        out.K = rank;
        out.warning = "K=" + std::to_string(K) + " exceeds rank(P)=" + std::to_string(rank) + "; clipped";
    }

    out.D = W.diagonal();
    out.V_full = svd.matrixV();
    out.V = out.V_full.leftCols(out.K);
    Matrix off = W;
    off.diagonal().setZero();
    out.rotated = out.V_full.transpose() * off * out.V_full;

    std::vector<double> mags(out.rotated.data(), out.rotated.data() + out.rotated.size());
    for (auto& v : mags) v = std::abs(v);
    out.threshold = quantile(std::move(mags), threshold_quantile);
    out.denoised = out.rotated;
    for (Eigen::Index i = 0; i < out.denoised.size(); ++i)
        if (std::abs(out.denoised.data()[i]) < out.threshold) out.denoised.data()[i] = 0.0;
    out.noise = out.rotated - out.denoised;
    out.L = out.denoised.topLeftCorner(out.K, out.K);
    const double total = out.denoised.squaredNorm();
    out.energy_fraction = total > 0.0 ? out.L.squaredNorm() / total : 0.0;
    return out;
}

WeightDissection dissect_weights(const AttentionWeights& w, const Eigen::Ref<const Matrix>& P, int K,
                                 double threshold_quantile) {
    w.validate();
    return dissect_weights(w.bilinear(), P, K, threshold_quantile);
}

}  // namespace geomlens::attention
