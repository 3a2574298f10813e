#include "geomlens/decompose.hpp"
#include "geomlens/errors.hpp"
#include "geomlens/fourier.hpp"
#include "geomlens/geometry_metrics.hpp"
#include "geomlens/synthetic.hpp"

#include <doctest.h>

#include <cmath>

using namespace geomlens;
using namespace geomlens::synthetic;

namespace {

double rel_max(const Matrix& a, const Matrix& b, double scale) { return (a - b).cwiseAbs().maxCoeff() / scale; }

}  // namespace

TEST_CASE("planted components satisfy the decomposition invariants") {
    PlantedSpec s;
    s.C = 20;
    s.T = 12;
    s.d = 8;
    s.rank = 3;
    s.n_clusters = 3;
    s.cluster_spread = 0.2;
    s.noise_sigma = 0.5;
    const auto g = generate(s);
    CHECK(g.truth.pos.colwise().sum().cwiseAbs().maxCoeff() < 1e-13);
    CHECK(g.truth.ctx.colwise().sum().cwiseAbs().maxCoeff() < 1e-13);
    for (int c = 0; c < s.C; ++c)
        CHECK(g.truth.resid.middleRows(c * s.T, s.T).colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    for (int t = 0; t < s.T; ++t) {
        Vector sum = Vector::Zero(s.d);
        for (int c = 0; c < s.C; ++c) sum += g.truth.resid.row(c * s.T + t).transpose();
        CHECK(sum.cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(g.tensor.seq_labels[4] == 1);
    CHECK(g.truth.ctx.rows() == s.C);
}

TEST_CASE("decompose recovers the planted truth") {
    for (double sigma : {0.0, 0.1, 1.0}) {
        PlantedSpec s;
        s.C = 30;
        s.T = 16;
        s.d = 10;
        s.rank = 4;
        s.n_clusters = 4;
        s.cluster_spread = 0.1;
        s.noise_sigma = sigma;
        s.seed = 77;
        const auto g = generate(s);
        const auto dec = decompose(g.tensor);
        const double scale = Matrix(g.tensor.tokens()).cwiseAbs().maxCoeff();
        CHECK(rel_max(dec.mu, g.truth.mu, scale) < 1e-12);
        CHECK(rel_max(dec.pos, g.truth.pos, scale) < 1e-12);
        CHECK(rel_max(dec.ctx, g.truth.ctx, scale) < 1e-12);
        CHECK(rel_max(Matrix(dec.resid), Matrix(g.truth.resid), scale) < 1e-12);
    }
}

TEST_CASE("single cluster, no noise, no spread: pos is all that varies") {
    PlantedSpec s;
    s.n_clusters = 1;
    const auto g = generate(s);
    CHECK(g.truth.ctx.cwiseAbs().maxCoeff() < 1e-15);
    const auto dec = decompose(g.tensor);
    CHECK((dec.pos - g.truth.pos).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("orthogonalized clusters are incoherent with pos; the flag turns that off") {
    PlantedSpec s;
    s.C = 24;
    s.T = 16;
    s.d = 12;
    s.n_clusters = 3;
    s.cluster_spread = 0.3;
    const auto g = generate(s);
    CHECK(geometry::incoherence(g.truth.pos, g.truth.ctx).max < 1e-12);
    s.orthogonalize_clusters = false;
    const auto h = generate(s);
    CHECK(geometry::incoherence(h.truth.pos, h.truth.ctx).max > 1e-3);
}

TEST_CASE("two clusters") {
    PlantedSpec s;
    s.C = 10;
    s.n_clusters = 2;
    const auto g = generate(s);
    // the cosine between the planted means is reproduced by their joint Gram
    const double th = geometry::joint_gram(Matrix(0, s.d), g.cluster_means)(0, 1);
    const Vector a = g.cluster_means.row(0).transpose(), b = g.cluster_means.row(1).transpose();
    CHECK(th == doctest::Approx(a.dot(b) / (a.norm() * b.norm())));
    // after centering over sequences two clusters sit antipodally
    const auto sim = geometry::cluster_similarity(decompose(g.tensor).ctx, g.tensor.seq_labels);
    CHECK(*sim.inter == doctest::Approx(-1.0));
    CHECK(*sim.intra == doctest::Approx(1.0));
}

TEST_CASE("generation is deterministic and validated") {
    PlantedSpec s;
    s.noise_sigma = 0.3;
    s.cluster_spread = 0.1;
    CHECK(generate(s).tensor.data() == generate(s).tensor.data());
    s.seed = 2;
    PlantedSpec t = s;
    t.seed = 3;
    CHECK(generate(s).tensor.data() != generate(t).tensor.data());

    PlantedSpec bad;
    bad.rank = 100;
    CHECK_THROWS_AS(generate(bad), InvalidInput);
    bad = PlantedSpec{};
    bad.n_clusters = bad.C + 1;
    CHECK_THROWS_AS(generate(bad), InvalidInput);
    bad = PlantedSpec{};
    bad.frequency_weights = {1.0};
    CHECK_THROWS_AS(generate(bad), InvalidInput);
}

TEST_CASE("rank-1 f_1 profile is representable with k = 1") {
    PlantedSpec s;
    s.C = 4;
    s.T = 32;
    s.d = 5;
    s.rank = 1;
    const auto g = generate(s);
    // the planted profile is centered f_1; re-add the constant that centering removed
    const Matrix f1 = fourier::low_frequency_vectors(32, 1);
    const Vector u = g.truth.pos.row(0).transpose() / (f1(0, 0) - f1.col(0).mean());
    const Matrix P = f1 * u.transpose();
    fourier::Thm1Options raw;
    raw.recenter = false;
    CHECK(fourier::thm1_verify(P, 1, 1, raw).lhs <= 1e-9);
}

TEST_CASE("smooth curve basis") {
    const Matrix P = smooth_curve_basis(64, 3, 1, 10);
    for (int t = 0; t < 64; ++t) CHECK(P.row(t).norm() == doctest::Approx(1.0));

    // planar curve projects to exactly two dimensions
    const Matrix planar = smooth_curve_basis(40, 2, 2, 6);
    const auto sv = Eigen::JacobiSVD<Matrix>(planar).singularValues();
    CHECK(sv(2) < 1e-12 * sv(0));

    // fourth-order differences of the Gram stay far below those of unstructured rows
    auto delta = [](const Matrix& rows) {
        const auto g = fourier::gram(PositionalBasis::from_rows(rows));
        return fourier::finite_difference(g.G_ext, 2).max_norm;
    };
    const double smooth = delta(smooth_curve_basis(64, 3, 7, 12));
    const double rough = delta(random_unit_rows(64, 12, 7));
    CHECK(rough > 100.0 * smooth);

    // the Gram depends on t - t' only
    const Matrix G = P * P.transpose();
    for (int t = 0; t + 5 < 64; ++t) CHECK(G(t, t + 5) == doctest::Approx(G(0, 5)));
    CHECK_THROWS_AS(smooth_curve_basis(10, 1, 0), InvalidInput);
}
