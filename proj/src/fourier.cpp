#include "geomlens/fourier.hpp"

#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace geomlens::fourier {

namespace {

void require_square_finite(const Eigen::Ref<const Matrix>& A, const char* what) {
    if (A.rows() != A.cols() || A.rows() == 0) throw InvalidInput(std::string(what) + " must be a non-empty square matrix");
    if (!A.allFinite()) throw InvalidInput(std::string(what) + " contains non-finite entries");
}

}  // namespace

Matrix extend_reflect(const Eigen::Ref<const Matrix>& G) {
    const Eigen::Index T = G.rows();
    Matrix ext(2 * T, 2 * T);
    for (Eigen::Index i = 0; i < T; ++i)
        for (Eigen::Index j = 0; j < T; ++j) {
            const double v = G(i, j);
            ext(i, j) = v;
            ext(i, 2 * T - 1 - j) = v;
            ext(2 * T - 1 - i, j) = v;
            ext(2 * T - 1 - i, 2 * T - 1 - j) = v;
        }
    return ext;
}

GramBundle gram(const PositionalBasis& basis) {
    const Matrix& Pn = basis.normalized;
    const Eigen::Index T = Pn.rows();
    if (static_cast<Eigen::Index>(basis.zero_rows.size()) >= T)
        throw DegenerateInput("every positional row is zero");
    GramBundle g;
    g.G = Matrix::Zero(T, T);
    g.G.selfadjointView<Eigen::Lower>().rankUpdate(Pn);
    g.G = g.G.selfadjointView<Eigen::Lower>();
    g.G = g.G.cwiseMax(-1.0).cwiseMin(1.0);
    for (Eigen::Index t = 0; t < T; ++t)
        if (!basis.is_zero_row(t)) g.G(t, t) = 1.0;
    g.G_ext = extend_reflect(g.G);
    g.excluded_rows = basis.zero_rows;
    return g;
}

Matrix dct_matrix(Eigen::Index T) {
    if (T <= 0) throw InvalidInput("DCT size must be positive");
    Matrix F(T, T);
    const double a0 = std::sqrt(1.0 / static_cast<double>(T));
    const double a = std::sqrt(2.0 / static_cast<double>(T));
    for (Eigen::Index k = 0; k < T; ++k)
        for (Eigen::Index n = 0; n < T; ++n)
            F(k, n) = (k == 0 ? a0 : a) *
                      std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(n) + 0.5) /
                               static_cast<double>(T));
    return F;
}

double low_frequency_ratio(const Eigen::Ref<const Matrix>& G_hat, int K) {
    if (K < 1) throw InvalidInput("K must be at least 1");
    const double total = G_hat.squaredNorm();
    if (total == 0.0) throw DegenerateInput("frequency matrix is identically zero");
    const Eigen::Index k = std::min<Eigen::Index>(K, std::min(G_hat.rows(), G_hat.cols()));
    return G_hat.topLeftCorner(k, k).squaredNorm() / total;
}

FrequencySummary dct2(const Eigen::Ref<const Matrix>& G, const std::vector<int>& Ks) {
    require_square_finite(G, "dct2 input");
    const Matrix F = dct_matrix(G.rows());
    FrequencySummary s;
    s.G_hat = F * G * F.transpose();
    for (int K : Ks) s.ratios[K] = low_frequency_ratio(s.G_hat, K);
    return s;
}

Matrix inverse_dct2(const Eigen::Ref<const Matrix>& G_hat) {
    require_square_finite(G_hat, "inverse_dct2 input");
    const Matrix F = dct_matrix(G_hat.rows());
    return F.transpose() * G_hat * F;
}

FiniteDifference finite_difference(const Eigen::Ref<const Matrix>& G_ext, int m) {
    if (m < 1) throw InvalidInput("finite difference order m must be >= 1");
    require_square_finite(G_ext, "extended Gram matrix");
    const Eigen::Index N = G_ext.rows();
    if (N % 2 != 0) throw InvalidInput("extended Gram matrix must have even side 2T");
    const double T = static_cast<double>(N / 2);
    const double scale = T * T;
    Matrix cur = G_ext;
    Matrix next(N, N);
    for (int step = 0; step < m; ++step) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const Eigen::Index jm = (j + N - 1) % N;
            for (Eigen::Index i = 0; i < N; ++i) {
                const Eigen::Index im = (i + N - 1) % N;
                next(i, j) = scale * (cur(i, j) - cur(im, j) - cur(i, jm) + cur(im, jm));
            }
        }
        cur.swap(next);
    }
    FiniteDifference fd;
    fd.max_norm = numeric::max_abs(cur);
    fd.values = std::move(cur);
    return fd;
}

Matrix low_frequency_vectors(Eigen::Index T, Eigen::Index k) {
    if (k < 1 || k > T) throw InvalidInput("need 1 <= k <= T");
    Matrix F(T, k);
    for (Eigen::Index s = 1; s <= k; ++s)
        for (Eigen::Index t = 1; t <= T; ++t)
            F(t - 1, s - 1) = std::cos((static_cast<double>(s) - 0.5) * static_cast<double>(t - 1) *
                                       std::numbers::pi / static_cast<double>(T));
    return F;
}

double symmetric_operator_norm(const Eigen::Ref<const Matrix>& A) {
    if (A.size() == 0) return 0.0;
    const Matrix sym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Thm1Certificate thm1_verify(const Eigen::Ref<const Matrix>& P_norm, int k, int m, const Thm1Options& opts) {
    if (!P_norm.allFinite()) throw InvalidInput("positional basis contains non-finite entries");
    const Eigen::Index T = P_norm.rows();
    if (T < 1) throw InvalidInput("positional basis has no rows");
    if (k < 1 || k > T) throw InvalidInput("need 1 <= k <= T");
    if (m < 1) throw InvalidInput("finite difference order m must be >= 1");

    Thm1Certificate cert;
    cert.k = k;
    cert.m = m;
    for (Eigen::Index t = 0; t < T; ++t)
        if (P_norm.row(t).squaredNorm() == 0.0) cert.excluded_rows.push_back(t);
    if (static_cast<Eigen::Index>(cert.excluded_rows.size()) == T) throw DegenerateInput("every positional row is zero");

    Matrix P = P_norm;
    const Eigen::RowVectorXd sum = P.colwise().sum();
    if (opts.recenter && sum.norm() / static_cast<double>(T) > kRecenterTolerance) {
        P.rowwise() -= sum / static_cast<double>(T);
        cert.recentered = true;
    }

    Matrix G = Matrix::Zero(T, T);
    G.selfadjointView<Eigen::Lower>().rankUpdate(P);
    G = G.selfadjointView<Eigen::Lower>();

    const Matrix Q = low_frequency_vectors(T, k);
    Matrix M = 4.0 * Q.transpose() * G * Q;
    M = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    if (es.info() != Eigen::Success) throw NumericalFailure("eigendecomposition of 4 Q^T G Q failed");
    Vector lambda = es.eigenvalues();
    cert.min_eigenvalue = lambda.minCoeff();
    const double scale = std::max(1.0, lambda.maxCoeff());
    if (cert.min_eigenvalue < -kEigenFailure * scale)
        throw NumericalFailure("4 Q^T G Q is not positive semidefinite (min eigenvalue " +
                               std::to_string(cert.min_eigenvalue) + "); input is not a Gram matrix");
    lambda = lambda.cwiseMax(0.0);
    const Matrix B0 = es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();

    if (opts.scaling == BScaling::exact) {
        const Matrix QtQ = Q.transpose() * Q;
        cert.B = QtQ.ldlt().solve(B0) / 2.0;
    } else {
        cert.B = B0 / (2.0 * static_cast<double>(T));
    }

    const Matrix FB = Q * cert.B;
    const Matrix approx = FB * FB.transpose();
    cert.lhs = symmetric_operator_norm(G - approx) / static_cast<double>(T);

    const auto fd = finite_difference(extend_reflect(G), m);
    cert.delta_max = fd.max_norm;
    cert.rhs = 6.0 / std::pow(8.0 * static_cast<double>(k), m) * cert.delta_max;
    cert.holds = cert.lhs <= cert.rhs;
    return cert;
}

}  // namespace geomlens::fourier
