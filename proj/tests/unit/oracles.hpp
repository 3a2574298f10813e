#pragma once

// Brute-force reference computations for the unit tests. Plain loops and
// long double accumulators only; nothing here calls into the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Means {
    Vec mu;
    Mat pos, ctx, resid;  // resid rows c*T + t
};

// h is C×T×d, row-major.
inline Means decompose(const std::vector<double>& h, std::size_t C, std::size_t T, std::size_t d) {
    Means m;
    m.mu = Vec::Zero(static_cast<Eigen::Index>(d));
    m.pos = Mat::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(d));
    m.ctx = Mat::Zero(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(d));
    m.resid = Mat::Zero(static_cast<Eigen::Index>(C * T), static_cast<Eigen::Index>(d));
    auto at = [&](std::size_t c, std::size_t t, std::size_t j) { return h[(c * T + t) * d + j]; };
    for (std::size_t j = 0; j < d; ++j) {
        long double all = 0;
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < T; ++t) all += at(c, t, j);
        const long double mu = all / static_cast<long double>(C * T);
        m.mu(static_cast<Eigen::Index>(j)) = static_cast<double>(mu);
        for (std::size_t t = 0; t < T; ++t) {
            long double s = 0;
            for (std::size_t c = 0; c < C; ++c) s += at(c, t, j);
            m.pos(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) =
                static_cast<double>(s / static_cast<long double>(C) - mu);
        }
        for (std::size_t c = 0; c < C; ++c) {
            long double s = 0;
            for (std::size_t t = 0; t < T; ++t) s += at(c, t, j);
            m.ctx(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) =
                static_cast<double>(s / static_cast<long double>(T) - mu);
        }
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < T; ++t)
                m.resid(static_cast<Eigen::Index>(c * T + t), static_cast<Eigen::Index>(j)) =
                    at(c, t, j) - m.mu(static_cast<Eigen::Index>(j)) -
                    m.pos(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) -
                    m.ctx(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
    }
    return m;
}

// Periodic index.
inline Eigen::Index wrap(Eigen::Index i, Eigen::Index n) { return ((i % n) + n) % n; }

// Delta^{(1,1)} written out cell by cell.
inline Mat mixed_difference(const Mat& A, double T) {
    const Eigen::Index n = A.rows();
    Mat out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = T * T *
                        (A(i, j) - A(wrap(i - 1, n), j) - A(i, wrap(j - 1, n)) + A(wrap(i - 1, n), wrap(j - 1, n)));
    return out;
}

// Delta^{(2,2)} as a single 3×3 stencil with weights (1,-2,1) ⊗ (1,-2,1).
inline Mat second_mixed_difference(const Mat& A, double T) {
    const Eigen::Index n = A.rows();
    const double w[3] = {1.0, -2.0, 1.0};
    Mat out = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            long double s = 0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) s += w[a] * w[b] * A(wrap(i - a, n), wrap(j - b, n));
            out(i, j) = static_cast<double>(s) * T * T * T * T;
        }
    return out;
}

// Argmax-locality ratio by direct scan (first maximum wins).
inline double argmax_ratio(const Mat& B) {
    const Eigen::Index T = B.rows();
    int hits = 0;
    for (Eigen::Index t = 1; t < T; ++t) {
        Eigen::Index best = 0;
        double bv = B(t, 0);
        for (Eigen::Index u = 1; u <= t; ++u)
            if (B(t, u) > bv) {
                bv = B(t, u);
                best = u;
            }
        if (best == t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(T - 1);
}

inline double cosine(const Vec& a, const Vec& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0;
    return a.dot(b) / (na * nb);
}

}  // namespace oracle
