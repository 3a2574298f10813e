#include "geomlens/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace geomlens::numeric {

namespace {

constexpr std::size_t kLeaf = 8;

double pairwise_sum_range(const double* x, std::size_t n) {
    if (n <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_range(x, half) + pairwise_sum_range(x + half, n - half);
}

void pairwise_rows(const double* base, std::size_t first, std::size_t count, std::size_t stride,
                   std::size_t width, double* out, std::vector<double>& scratch, std::size_t depth) {
    if (count <= kLeaf) {
        std::fill(out, out + width, 0.0);
        for (std::size_t r = 0; r < count; ++r) {
            const double* row = base + (first + r) * stride;
            for (std::size_t j = 0; j < width; ++j) out[j] += row[j];
        }
        return;
    }
    const std::size_t half = count / 2;
    // scratch holds one width-sized buffer per recursion level, sized up front.
    pairwise_rows(base, first, half, stride, width, out, scratch, depth + 1);
    double* right = scratch.data() + depth * width;
    pairwise_rows(base, first + half, count - half, stride, width, right, scratch, depth + 1);
    for (std::size_t j = 0; j < width; ++j) out[j] += right[j];
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    return pairwise_sum_range(values.data(), values.size());
}

void pairwise_row_sum(const double* base, std::size_t first, std::size_t count, std::size_t stride,
                      std::size_t width, double* out) {
    std::size_t levels = 1;
    for (std::size_t n = count; n > kLeaf; n -= n / 2) ++levels;
    std::vector<double> scratch(levels * width);
    pairwise_rows(base, first, count, stride, width, out, scratch, 0);
}

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    Matrix m(rows, cols);
    // Column-major fill order is part of the seed contract.
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

Matrix random_orthogonal(Eigen::Index n, Rng& rng) {
    const Matrix g = gaussian_matrix(n, n, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

double max_abs(const Eigen::Ref<const Matrix>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace geomlens::numeric
