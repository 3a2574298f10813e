#include "geomlens/synthetic.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/fourier.hpp"
#include "geomlens/numeric.hpp"

#include <cmath>
#include <numbers>

namespace geomlens::synthetic {

namespace {

void check_spec(const PlantedSpec& s) {
    if (s.C < 1 || s.T < 1 || s.d < 1) throw InvalidInput("C, T and d must be positive");
    if (s.rank < 0 || s.rank > std::min(s.T, s.d)) throw InvalidInput("rank must lie in [0, min(T, d)]");
    if (s.n_clusters < 1 || s.n_clusters > s.C) throw InvalidInput("n_clusters must lie in [1, C]");
    if (!s.frequency_weights.empty() && static_cast<int>(s.frequency_weights.size()) != s.rank)
        throw InvalidInput("frequency_weights must have one entry per rank");
    if (s.noise_sigma < 0.0 || s.cluster_spread < 0.0 || s.cluster_radius < 0.0)
        throw InvalidInput("scales must be nonnegative");
}

// Removes the component of each row lying in the row space of `span_rows`.
void project_out(Matrix& rows, const Matrix& span_rows) {
    if (span_rows.rows() == 0) return;
    Eigen::ColPivHouseholderQR<Matrix> qr(span_rows.transpose());
    const Eigen::Index r = qr.rank();
    if (r == 0) return;
    const Matrix Q = Matrix(qr.householderQ()).leftCols(r);
    rows -= (rows * Q) * Q.transpose();
}

}  // namespace

Matrix centered_profiles(int T, int r) {
    Matrix F = fourier::low_frequency_vectors(T, r);
    for (Eigen::Index s = 0; s < F.cols(); ++s) F.col(s).array() -= F.col(s).mean();
    return F;
}

PlantedData generate(const PlantedSpec& spec) {
    check_spec(spec);
    const auto C = static_cast<Eigen::Index>(spec.C);
    const auto T = static_cast<Eigen::Index>(spec.T);
    const auto d = static_cast<Eigen::Index>(spec.d);
    numeric::Rng rng(spec.seed);

    PlantedData out;
    Decomposition& g = out.truth;

    g.mu = spec.mu_scale * numeric::gaussian_matrix(d, 1, rng).col(0);

    // positional part
    g.pos = Matrix::Zero(T, d);
    if (spec.rank > 0) {
        const Matrix F = centered_profiles(spec.T, spec.rank);
        const Matrix U = numeric::random_orthogonal(d, rng).leftCols(spec.rank);
        Vector w = Vector::Ones(spec.rank);
        for (int s = 0; s < static_cast<int>(spec.frequency_weights.size()); ++s) w(s) = spec.frequency_weights[s];
        g.pos = F * w.asDiagonal() * U.transpose();
        g.pos.rowwise() -= g.pos.colwise().mean();
    }

    // context part
    Matrix centers = numeric::gaussian_matrix(spec.n_clusters, d, rng);
    if (spec.orthogonalize_clusters) project_out(centers, g.pos);
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
        const double n = centers.row(i).norm();
        if (n > 0.0) centers.row(i) *= spec.cluster_radius / n;
    }
    out.cluster_means = centers;

    std::vector<long long> labels(static_cast<std::size_t>(C));
    g.ctx.resize(C, d);
    for (Eigen::Index c = 0; c < C; ++c) {
        labels[static_cast<std::size_t>(c)] = c % spec.n_clusters;
        g.ctx.row(c) = centers.row(c % spec.n_clusters);
    }
    if (spec.cluster_spread > 0.0) {
        Matrix jitter = numeric::gaussian_matrix(C, d, rng, spec.cluster_spread);
        if (spec.orthogonalize_clusters) project_out(jitter, g.pos);
        g.ctx += jitter;
    }
    g.ctx.rowwise() -= g.ctx.colwise().mean();

    // residual, double-centered over (c, t) for every feature
    g.resid = RowMatrix::Zero(C * T, d);
    if (spec.noise_sigma > 0.0) {
        g.resid = numeric::gaussian_matrix(C * T, d, rng, spec.noise_sigma);
        Matrix seq_mean = Matrix::Zero(C, d);
        Matrix pos_mean = Matrix::Zero(T, d);
        for (Eigen::Index c = 0; c < C; ++c)
            for (Eigen::Index t = 0; t < T; ++t) {
                seq_mean.row(c) += g.resid.row(c * T + t);
                pos_mean.row(t) += g.resid.row(c * T + t);
            }
        seq_mean /= static_cast<double>(T);
        pos_mean /= static_cast<double>(C);
        const Vector grand = seq_mean.colwise().mean().transpose();
        for (Eigen::Index c = 0; c < C; ++c)
            for (Eigen::Index t = 0; t < T; ++t)
                g.resid.row(c * T + t) += grand.transpose() - seq_mean.row(c) - pos_mean.row(t);
    }

    out.tensor = g.reconstruct();
    out.tensor.seq_labels = std::move(labels);
    out.tensor.model_name = "synthetic";
    return out;
}

Matrix smooth_curve_basis(int T, int r, std::uint64_t seed, int d) {
    if (r < 2) throw InvalidInput("smooth_curve_basis needs r >= 2");
    if (r > T || r > d) throw InvalidInput("r must not exceed T or d");
    numeric::Rng rng(seed);
    const Matrix U = numeric::random_orthogonal(d, rng).leftCols(r);
    // Pair j traces a circle at angle j*pi*t/T; an odd r adds a constant axis.
    // The squared weights sum to one, so every row has unit norm.
    const int pairs = r / 2;
    Vector w = numeric::gaussian_matrix(pairs + r % 2, 1, rng).col(0).cwiseAbs().array() + 0.1;
    w.normalize();
    Matrix F(T, r);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < pairs; ++j) {
            const double a = static_cast<double>(j + 1) * std::numbers::pi * static_cast<double>(t) / static_cast<double>(T);
            F(t, 2 * j) = w(j) * std::cos(a);
            F(t, 2 * j + 1) = w(j) * std::sin(a);
        }
        if (r % 2) F(t, r - 1) = w(pairs);
    }
    return F * U.transpose();
}

Matrix random_unit_rows(int T, int d, std::uint64_t seed) {
    if (T < 1 || d < 1) throw InvalidInput("T and d must be positive");
    numeric::Rng rng(seed);
    Matrix P = numeric::gaussian_matrix(T, d, rng);
    P.rowwise().normalize();
    return P;
}

}  // namespace geomlens::synthetic
