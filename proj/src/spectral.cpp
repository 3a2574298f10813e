#include "geomlens/spectral.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace geomlens::spectral {

namespace {

void require_finite(const Eigen::Ref<const Matrix>& m) {
    if (!m.allFinite()) throw InvalidInput("matrix contains non-finite entries");
}

double top_eigenvalue(const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver failed");
    return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

}  // namespace

std::vector<double> singular_spectrum(const Eigen::Ref<const Matrix>& m) {
    require_finite(m);
    if (m.size() == 0) return {};
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    std::vector<double> out(s.data(), s.data() + s.size());
    std::sort(out.begin(), out.end(), std::greater<>());
    for (auto& v : out) v = std::max(v, 0.0);
    return out;
}

double stable_rank_from_spectrum(const std::vector<double>& sigma) {
    if (sigma.empty() || sigma.front() <= 0.0) throw DegenerateInput("stable rank of a zero matrix");
    double fro2 = 0.0;
    for (double s : sigma) fro2 += s * s;
    return fro2 / (sigma.front() * sigma.front());
}

double stable_rank(const Eigen::Ref<const Matrix>& m) {
    require_finite(m);
    const double op = operator_norm(m);
    if (op <= 0.0) throw DegenerateInput("stable rank of a zero matrix");
    return m.squaredNorm() / (op * op);
}

int rank_estimate_from_spectrum(const std::vector<double>& sigma, RankMethod method) {
    if (sigma.empty() || sigma.front() <= 0.0) throw DegenerateInput("rank estimate of a zero matrix");
    const std::size_t n = sigma.size();
    if (method == RankMethod::energy) {
        double total = 0.0;
        for (double s : sigma) total += s * s;
        const double target = kEnergyFraction * total;
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += sigma[k] * sigma[k];
            // Relative slack absorbs roundoff when the target is hit exactly.
            if (acc >= target * (1.0 - 1e-12)) return static_cast<int>(k + 1);
        }
        return static_cast<int>(n);
    }
    if (n == 1) return 1;
    const std::size_t limit = std::min(n - 1, (n + 1) / 2);
    // Values at roundoff level relative to sigma_1 count as exact zeros.
    const double floor = kZeroSingularValue * sigma.front();
    int best = 1;
    double best_ratio = -1.0;
    for (std::size_t i = 0; i < limit; ++i) {
        if (sigma[i] <= floor) break;
        const double ratio =
            sigma[i + 1] > floor ? sigma[i] / sigma[i + 1] : std::numeric_limits<double>::infinity();
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = static_cast<int>(i + 1);
        }
    }
    return best;
}

int rank_estimate(const Eigen::Ref<const Matrix>& m, RankMethod method) {
    return rank_estimate_from_spectrum(singular_spectrum(m), method);
}

PowerIterationResult power_iteration_norm(const Eigen::Ref<const Matrix>& m, const PowerIterationOptions& opts) {
    require_finite(m);
    PowerIterationResult r;
    if (m.size() == 0) return r;
    numeric::Rng rng(opts.seed);
    Vector x = numeric::gaussian_matrix(m.cols(), 1, rng);
    x.normalize();
    double prev = 0.0;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const Vector y = m * x;
        const double sigma = y.norm();
        r.iterations = it;
        r.sigma = sigma;
        if (sigma == 0.0) {
            r.converged = true;
            return r;
        }
        Vector z = m.transpose() * y;
        const double zn = z.norm();
        if (zn == 0.0) {
            r.converged = true;
            return r;
        }
        x = z / zn;
        if (it > 1 && std::abs(sigma - prev) <= opts.tolerance * sigma) {
            r.converged = true;
            r.sigma = (m * x).norm();
            return r;
        }
        prev = sigma;
    }
    r.sigma = (m * x).norm();
    return r;
}

double operator_norm(const Eigen::Ref<const Matrix>& m) {
    require_finite(m);
    if (m.size() == 0) return 0.0;
    const auto lo = std::min(m.rows(), m.cols());
    const auto hi = std::max(m.rows(), m.cols());
    if (lo > kPowerIterationMinDim) return power_iteration_norm(m).sigma;
    if (hi > 4 * lo) {
        Matrix gram(lo, lo);
        if (m.rows() <= m.cols())
            gram.setZero().selfadjointView<Eigen::Lower>().rankUpdate(m);
        else
            gram.setZero().selfadjointView<Eigen::Lower>().rankUpdate(m.transpose());
        gram = gram.selfadjointView<Eigen::Lower>();
        return std::sqrt(top_eigenvalue(gram));
    }
    return singular_spectrum(m).front();
}

double relative_norm(const Eigen::Ref<const Matrix>& P, const Eigen::Ref<const Matrix>& m_centered) {
    const double denom = operator_norm(m_centered);
    if (denom <= 0.0) throw DegenerateInput("relative norm against a zero embedding matrix");
    const double num = operator_norm(P);
    if (num <= 0.0) throw DegenerateInput("relative norm of a zero positional basis");
    return num / denom;
}

double centered_operator_norm(const EmbeddingTensor& e, const Eigen::Ref<const Vector>& mu) {
    const auto tokens = e.tokens();
    const Eigen::Index n = tokens.rows();
    const Eigen::Index d = tokens.cols();
    if (std::min(n, d) > kPowerIterationMinDim) {
        // Implicit operator x -> (H - 1 mu^T) x; same start vector and stopping
        // rule as power_iteration_norm.
        PowerIterationOptions opts;
        numeric::Rng rng(opts.seed);
        Vector x = numeric::gaussian_matrix(d, 1, rng);
        x.normalize();
        double prev = 0.0;
        double sigma = 0.0;
        for (int it = 1; it <= opts.max_iterations; ++it) {
            Vector y = tokens * x;
            y.array() -= mu.dot(x);
            sigma = y.norm();
            if (sigma == 0.0) return 0.0;
            Vector z = tokens.transpose() * y - mu * y.sum();
            x = z / z.norm();
            if (it > 1 && std::abs(sigma - prev) <= opts.tolerance * sigma) break;
            prev = sigma;
        }
        Vector y = tokens * x;
        y.array() -= mu.dot(x);
        return y.norm();
    }
    // d×d Gram of centered rows, accumulated in blocks.
    constexpr Eigen::Index kBlock = 2048;
    Matrix gram = Matrix::Zero(d, d);
    RowMatrix block;
    for (Eigen::Index start = 0; start < n; start += kBlock) {
        const Eigen::Index rows = std::min(kBlock, n - start);
        block = tokens.middleRows(start, rows);
        block.rowwise() -= mu.transpose();
        gram.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    return std::sqrt(top_eigenvalue(gram));
}

SpectralSummary summarize(const Eigen::Ref<const Matrix>& P, const EmbeddingTensor& e,
                          const Eigen::Ref<const Vector>& mu) {
    SpectralSummary s;
    s.singular_values = singular_spectrum(P);
    s.rank_gap = rank_estimate_from_spectrum(s.singular_values, RankMethod::gap);
    s.rank_energy = rank_estimate_from_spectrum(s.singular_values, RankMethod::energy);
    s.stable_rank = stable_rank_from_spectrum(s.singular_values);
    const double denom = centered_operator_norm(e, mu);
    if (denom <= 0.0) throw DegenerateInput("centered embeddings are identically zero");
    s.relative_norm = s.singular_values.front() / denom;
    return s;
}

}  // namespace geomlens::spectral
