#include "geomlens/decompose.hpp"
#include "geomlens/errors.hpp"
#include "geomlens/numeric.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace geomlens;

namespace {

EmbeddingTensor random_tensor(std::size_t C, std::size_t T, std::size_t d, std::uint64_t seed, double shift = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(shift, 1.0);
    EmbeddingTensor e(C, T, d);
    for (auto& x : e.data()) x = g(rng);
    return e;
}

double rel(const Matrix& a, const Matrix& b) {
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("2x2x1 hand example") {
    EmbeddingTensor e(2, 2, 1, {1, 2, 3, 4});
    const auto dec = decompose(e);
    CHECK(dec.mu(0) == doctest::Approx(2.5));
    CHECK(dec.pos(0, 0) == doctest::Approx(-0.5));
    CHECK(dec.pos(1, 0) == doctest::Approx(0.5));
    CHECK(dec.ctx(0, 0) == doctest::Approx(-1.0));
    CHECK(dec.ctx(1, 0) == doctest::Approx(1.0));
    CHECK(dec.resid.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant tensor has only a mean") {
    EmbeddingTensor e(3, 4, 2);
    for (auto& x : e.data()) x = 1.75;
    const auto dec = decompose(e);
    CHECK(dec.mu(0) == 1.75);
    CHECK(dec.mu(1) == 1.75);
    CHECK(dec.pos.cwiseAbs().maxCoeff() == 0.0);
    CHECK(dec.ctx.cwiseAbs().maxCoeff() == 0.0);
    CHECK(dec.resid.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matches the brute-force mean oracle and satisfies the invariants") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const std::size_t C = 1 + seed * 3, T = 2 + seed * 2, d = 1 + seed;
        const auto e = random_tensor(C, T, d, seed, 0.5);
        const auto dec = decompose(e);
        const auto ref = oracle::decompose(e.data(), C, T, d);
        CHECK(rel(dec.mu, ref.mu) < 1e-13);
        CHECK(rel(dec.pos, ref.pos) < 1e-13);
        CHECK(rel(dec.ctx, ref.ctx) < 1e-13);
        CHECK(rel(Matrix(dec.resid), ref.resid) < 1e-13);

        CHECK(dec.pos.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
        CHECK(dec.ctx.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
        for (std::size_t c = 0; c < C; ++c) {
            Vector s = Vector::Zero(static_cast<Eigen::Index>(d));
            for (std::size_t t = 0; t < T; ++t) s += dec.resid.row(static_cast<Eigen::Index>(c * T + t)).transpose();
            CHECK(s.cwiseAbs().maxCoeff() < 1e-12);
        }
        const auto back = dec.reconstruct();
        CHECK(rel(Matrix(back.tokens()), Matrix(e.tokens())) < 1e-13);
    }
}

TEST_CASE("means-only path agrees with the full decomposition") {
    const auto e = random_tensor(9, 7, 5, 42);
    const auto full = decompose(e);
    const auto m = decompose_means(e);
    CHECK(m.mu == full.mu);
    CHECK(m.pos == full.pos);
    CHECK(m.ctx == full.ctx);
}

TEST_CASE("cvec is ctx plus resid") {
    const auto e = random_tensor(4, 5, 3, 1);
    const auto dec = decompose(e);
    const Matrix s = dec.cvec_sequence(2);
    for (Eigen::Index t = 0; t < 5; ++t) {
        const Vector expect = dec.ctx.row(2).transpose() + dec.resid.row(2 * 5 + t).transpose();
        CHECK((s.row(t).transpose() - expect).norm() == 0.0);
        CHECK((dec.cvec(2, static_cast<std::size_t>(t)) - expect).norm() == 0.0);
    }
}

TEST_CASE("shift equivariance") {
    auto e = random_tensor(6, 5, 4, 11);
    const auto a = decompose(e);
    const double v[4] = {3.0, -1.0, 100.0, 0.5};
    for (std::size_t c = 0; c < 6; ++c)
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t j = 0; j < 4; ++j) e.at(c, t, j) += v[j];
    const auto b = decompose(e);
    for (int j = 0; j < 4; ++j) CHECK(b.mu(j) - a.mu(j) == doctest::Approx(v[j]).epsilon(1e-12));
    CHECK(rel(a.pos, b.pos) < 1e-12);
    CHECK(rel(a.ctx, b.ctx) < 1e-12);
    CHECK(rel(Matrix(a.resid), Matrix(b.resid)) < 1e-12);
}

TEST_CASE("permuting sequences permutes ctx and resid") {
    const auto e = random_tensor(5, 4, 3, 5);
    const std::size_t perm[5] = {3, 0, 4, 1, 2};
    EmbeddingTensor p(5, 4, 3);
    for (std::size_t c = 0; c < 5; ++c)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t j = 0; j < 3; ++j) p.at(c, t, j) = e.at(perm[c], t, j);
    const auto a = decompose(e);
    const auto b = decompose(p);
    CHECK(rel(a.mu, b.mu) < 1e-14);
    CHECK(rel(a.pos, b.pos) < 1e-14);
    for (std::size_t c = 0; c < 5; ++c) {
        CHECK((b.ctx.row(static_cast<Eigen::Index>(c)) - a.ctx.row(static_cast<Eigen::Index>(perm[c]))).norm() < 1e-14);
        for (std::size_t t = 0; t < 4; ++t)
            CHECK((b.resid.row(static_cast<Eigen::Index>(c * 4 + t)) -
                   a.resid.row(static_cast<Eigen::Index>(perm[c] * 4 + t)))
                      .norm() < 1e-14);
    }
}

TEST_CASE("decompose of a reconstruction is the same decomposition") {
    const auto e = random_tensor(7, 6, 3, 8);
    const auto a = decompose(e);
    const auto b = decompose(a.reconstruct());
    CHECK(rel(a.pos, b.pos) < 1e-12);
    CHECK(rel(a.ctx, b.ctx) < 1e-12);
    CHECK(rel(Matrix(a.resid), Matrix(b.resid)) < 1e-12);
}

TEST_CASE("pairwise summation is order-stable and accurate") {
    std::vector<double> v(1000, 0.1);
    CHECK(numeric::pairwise_sum(v) == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(numeric::pairwise_sum({}) == 0.0);
    std::vector<double> big = {1e16, 1.0, -1e16, 1.0};
    CHECK(std::isfinite(numeric::pairwise_sum(big)));
}

TEST_CASE("non-finite input is rejected") {
    auto e = random_tensor(2, 2, 2, 0);
    e.at(1, 1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(decompose(e), InvalidInput);
}

TEST_CASE("positional basis flags zero rows") {
    Matrix P(3, 2);
    P << 3, 4, 0, 0, -1, 0;
    const auto b = PositionalBasis::from_rows(P);
    CHECK(b.zero_rows == std::vector<Eigen::Index>{1});
    CHECK(b.is_zero_row(1));
    CHECK(b.normalized.row(0).norm() == doctest::Approx(1.0));
    CHECK(b.normalized(0, 0) == doctest::Approx(0.6));
    CHECK(b.normalized.row(1).norm() == 0.0);
}

TEST_CASE("drop_artifacts") {
    const auto e = random_tensor(2, 3, 2, 4);
    ArtifactOptions none;
    CHECK(drop_artifacts(e, none)->data() == e.data());

    ArtifactOptions drop;
    drop.drop_first_token = true;
    const auto d = drop_artifacts(e, drop);
    REQUIRE(d);
    CHECK(d->num_positions() == 2);
    CHECK(d->dropped_first_token);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t j = 0; j < 2; ++j) CHECK(d->at(c, t, j) == e.at(c, t + 1, j));

    EmbeddingTensor moved = e;
    const auto d2 = drop_artifacts(std::move(moved), drop);
    CHECK(d2->data() == d->data());

    // new pos equals old per-position means re-centered over the kept positions
    const auto full = decompose(e);
    const auto cut = decompose(*d);
    const Vector kept_mean = (full.pos.row(1) + full.pos.row(2)).transpose() / 2.0;
    for (Eigen::Index t = 0; t < 2; ++t)
        CHECK((cut.pos.row(t).transpose() - (full.pos.row(t + 1).transpose() - kept_mean)).norm() < 1e-14);

    EmbeddingTensor one(2, 1, 2);
    CHECK_THROWS_AS(drop_artifacts(one, drop), InvalidInput);

    ArtifactOptions last;
    last.drop_layer_if_last = true;
    last.final_layer = 3;
    auto l3 = e;
    l3.layer = 3;
    CHECK_FALSE(drop_artifacts(l3, last).has_value());
    CHECK(drop_artifacts(e, last).has_value());
}

TEST_CASE("cross-layer statistics") {
    const auto a = random_tensor(3, 4, 5, 21);
    auto neg = a;
    for (auto& x : neg.data()) x = -x;
    auto big = a;
    for (auto& x : big.data()) x *= 10.0;
    const auto s = cross_layer_stats({a, a, neg, big});
    CHECK(s.cosine(0, 0) == 1.0);
    CHECK(s.cosine(0, 1) == doctest::Approx(1.0));
    CHECK(s.cosine(0, 2) == doctest::Approx(-1.0));
    CHECK(s.cosine(0, 3) == doctest::Approx(1.0));
    CHECK(s.mean_norm[0] == doctest::Approx(s.mean_norm[1]));
    CHECK(s.mean_norm[3] / s.mean_norm[0] == doctest::Approx(10.0));
    CHECK((s.cosine - s.cosine.transpose()).norm() == 0.0);
    CHECK_THROWS_AS(cross_layer_stats({a, random_tensor(3, 4, 6, 0)}), InvalidInput);
}

TEST_CASE("write_decomposition produces four containers and a sidecar") {
    const auto e = random_tensor(3, 4, 2, 2);
    const auto dec = decompose(e);
    const auto root = std::filesystem::temp_directory_path() / ("geomlens_dec_" + std::to_string(std::random_device{}()));
    const auto dir = root / "dec";
    write_decomposition(dec, dir, io::DType::f64);
    for (const char* f : {"mu.gt", "pos.gt", "ctx.gt", "resid.gt", "decomposition.json"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(io::read_matrix(dir / "pos.gt") == dec.pos);
    const auto r = io::read_container(dir / "resid.gt");
    CHECK(r.shape() == std::vector<std::uint64_t>{3, 4, 2});
    CHECK(r.values()[5] == dec.resid.data()[5]);
    std::filesystem::remove_all(root);
}
