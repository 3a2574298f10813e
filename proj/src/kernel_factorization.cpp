#include "geomlens/kernel_factorization.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geomlens::kernel {

IncoherentBases build_incoherent_bases(int d, int n1, int n2, double target_incoh, std::uint64_t seed) {
    if (d < 1 || n1 < 1 || n2 < 1) throw InvalidInput("bases need d, n1, n2 >= 1");
    if (n1 + n2 > d) throw InvalidInput("orthogonal construction needs n1 + n2 <= d");
    if (!(target_incoh >= 0.0 && target_incoh <= 1.0)) throw InvalidInput("target incoherence must lie in [0, 1]");

    numeric::Rng rng(seed);
    std::uniform_int_distribution<int> partner(0, n1 - 1);
    const double sin_phi = target_incoh;
    const double cos_phi = std::sqrt(std::max(0.0, 1.0 - sin_phi * sin_phi));

    Matrix b1 = Matrix::Zero(d, n1);
    Matrix b2 = Matrix::Zero(d, n2);
    for (int i = 0; i < n1; ++i) b1(i, i) = 1.0;
    for (int j = 0; j < n2; ++j) {
        b2(n1 + j, j) = cos_phi;
        b2(partner(rng), j) = sin_phi;
    }
    const Matrix R = numeric::random_orthogonal(d, rng);

    IncoherentBases out;
    out.basis1 = R * b1;
    out.basis2 = R * b2;
    out.achieved_incoh = mutual_incoherence(out.basis1, out.basis2);
    return out;
}

double mutual_incoherence(const Eigen::Ref<const Matrix>& basis1, const Eigen::Ref<const Matrix>& basis2) {
    if (basis1.rows() != basis2.rows()) throw InvalidInput("bases live in different dimensions");
    if (basis1.cols() == 0 || basis2.cols() == 0) return 0.0;
    return (basis1.transpose() * basis2).cwiseAbs().maxCoeff();
}

double log_kernel(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Vector>& z,
                  const Eigen::Ref<const Vector>& zp) {
    if (W.rows() != z.size() || W.cols() != zp.size()) throw InvalidInput("kernel dimensions do not match");
    return z.dot(W * zp);
}

double kernel(const Eigen::Ref<const Matrix>& W, const Eigen::Ref<const Vector>& z,
              const Eigen::Ref<const Vector>& zp) {
    return std::exp(log_kernel(W, z, zp));
}

Matrix kernel_smoothing_weights(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Matrix>& W, bool causal) {
    const Eigen::Index T = X.rows();
    if (W.rows() != X.cols() || W.cols() != X.cols()) throw InvalidInput("kernel dimensions do not match");
    Matrix out = Matrix::Zero(T, T);
    std::vector<double> logs;
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::Index width = causal ? t + 1 : T;
        const Vector xt = X.row(t).transpose();
        logs.assign(static_cast<std::size_t>(width), 0.0);
        for (Eigen::Index k = 0; k < width; ++k)
            logs[static_cast<std::size_t>(k)] = log_kernel(W, xt, X.row(k).transpose());
        const double mx = *std::max_element(logs.begin(), logs.end());
        double lse = 0.0;
        for (double l : logs) lse += std::exp(l - mx);
        lse = mx + std::log(lse);
        for (Eigen::Index k = 0; k < width; ++k) out(t, k) = std::exp(logs[static_cast<std::size_t>(k)] - lse);
    }
    return out;
}

Matrix KernelTestInstance::total_weight() const {
    Matrix W = Matrix::Zero(c_q.size(), c_q.size());
    for (const auto& row : weights)
        for (const auto& w : row) W += w.effective();
    return W;
}

KernelTestInstance KernelTestInstance::transposed() const {
    KernelTestInstance out = *this;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const SparseWeight& src = weights[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)];
            SparseWeight& dst = out.weights[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            dst.coeffs = src.coeffs;
            dst.U = src.V;
            dst.V = src.U;
            dst.W = src.W.transpose();
            dst.noise = src.noise.size() ? Matrix(src.noise.transpose()) : Matrix();
        }
    out.c_q = c_k;
    out.t_q = t_k;
    out.c_k = c_q;
    out.t_k = t_q;
    return out;
}

KernelTestInstance make_instance(const IncoherentBases& bases, int s, bool noise, std::uint64_t seed) {
    if (s < 1) throw InvalidInput("sparsity s must be >= 1");
    const Eigen::Index d = bases.basis1.rows();
    numeric::Rng rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Matrix* basis[2] = {&bases.basis1, &bases.basis2};

    auto draw_atom = [&](int which) -> Vector {
        const Matrix& b = *basis[which];
        std::uniform_int_distribution<Eigen::Index> pick(0, b.cols() - 1);
        const Eigen::Index idx = pick(rng);
        const double lambda = unit(rng);
        return lambda * b.col(idx);
    };

    KernelTestInstance inst;
    inst.bases = bases;
    inst.s = s;
    inst.noise = noise;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            SparseWeight& w = inst.weights[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            w.coeffs.resize(s);
            w.U.resize(d, s);
            w.V.resize(d, s);
            for (int k = 0; k < s; ++k) {
                w.coeffs(k) = unit(rng);
                w.U.col(k) = draw_atom(a);
                w.V.col(k) = draw_atom(b);
            }
            w.W = w.U * w.coeffs.asDiagonal() * w.V.transpose();
        }
    inst.c_q = draw_atom(0);
    inst.t_q = draw_atom(1);
    inst.c_k = draw_atom(0);
    inst.t_k = draw_atom(1);
    if (noise) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (auto& row : inst.weights)
            for (auto& w : row) w.noise = numeric::gaussian_matrix(d, d, rng, 1.0) * scale;
    }
    return inst;
}

Thm2Result thm2_verify(const KernelTestInstance& inst, const Thm2Options& opts) {
    const auto& w = inst.weights;
    Thm2Result r;
    r.log_lhs = log_kernel(inst.total_weight(), inst.x_q(), inst.x_k());
    r.log_rhs_sum = log_kernel(w[0][0].effective(), inst.c_q, inst.c_k) +
                    log_kernel(w[0][1].effective(), inst.c_q, inst.t_k) +
                    log_kernel(w[1][0].effective(), inst.t_q, inst.c_k) +
                    log_kernel(w[1][1].effective(), inst.t_q, inst.t_k);
    r.gap = std::abs(r.log_lhs - r.log_rhs_sum);
    r.bound = opts.bound_constant * inst.s * inst.incoh();
    if (inst.noise) r.bound += opts.bound_constant * opts.noise_constant * inst.incoh();
    r.holds = r.gap <= r.bound;
    return r;
}

Thm2TrialSummary run_thm2_trials(const Thm2TrialConfig& cfg) {
    if (cfg.trials < 1) throw InvalidInput("need at least one trial");
    Thm2TrialSummary sum;
    sum.trials = cfg.trials;
    sum.results.reserve(static_cast<std::size_t>(cfg.trials));
    for (int i = 0; i < cfg.trials; ++i) {
        const auto base_seed = numeric::derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        const auto bases = build_incoherent_bases(cfg.d, cfg.n1, cfg.n2, cfg.incoh, numeric::derive_seed(base_seed, 0));
        const auto inst = make_instance(bases, cfg.s, cfg.noise, numeric::derive_seed(base_seed, 1));
        const auto r = thm2_verify(inst, cfg.options);
        if (r.holds) ++sum.holds;
        sum.max_gap = std::max(sum.max_gap, r.gap);
        if (r.bound > 0.0) sum.max_gap_over_bound = std::max(sum.max_gap_over_bound, r.gap / r.bound);
        sum.max_incoh = std::max(sum.max_incoh, inst.incoh());
        sum.results.push_back(r);
    }
    return sum;
}

double incoh_from_gamma(int d, double gamma) {
    if (d < 1) throw InvalidInput("d must be positive");
    return std::pow(static_cast<double>(d), -gamma);
}

}  // namespace geomlens::kernel
