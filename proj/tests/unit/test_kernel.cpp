#include "geomlens/errors.hpp"
#include "geomlens/kernel_factorization.hpp"
#include "geomlens/numeric.hpp"

#include <doctest.h>

#include <cmath>

using namespace geomlens;
using namespace geomlens::kernel;

namespace {

// Sum of the twelve improper bilinear terms: for each W_ab, every pair of
// query/key parts other than (part a of x^q, part b of x^k).
double brute_gap(const KernelTestInstance& inst) {
    const Vector* q[2] = {&inst.c_q, &inst.t_q};
    const Vector* k[2] = {&inst.c_k, &inst.t_k};
    double cross = 0.0;
    int terms = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const Matrix W = inst.weights[a][b].effective();
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    if (i == a && j == b) continue;
                    cross += q[i]->dot(W * *k[j]);
                    ++terms;
                }
        }
    CHECK(terms == 12);
    return std::abs(cross);
}

}  // namespace

TEST_CASE("kernel values") {
    const Matrix W0 = Matrix::Zero(3, 3);
    Vector z(3), zp(3);
    z << 1, 0, 0;
    zp << 0, 1, 0;
    CHECK(kernel::kernel(W0, z, zp) == 1.0);
    Matrix E = Matrix::Zero(3, 3);
    E(0, 1) = 1;
    CHECK(kernel::kernel(E, z, zp) == doctest::Approx(std::exp(1.0)));
    CHECK(kernel::kernel(E, Vector::Zero(3), zp) == 1.0);
    CHECK(log_kernel(E * 1000.0, z, zp) == 1000.0);
    CHECK_THROWS_AS(kernel::kernel(E, Vector::Zero(2), zp), InvalidInput);
}

TEST_CASE("incoherent bases") {
    const auto zero = build_incoherent_bases(16, 4, 5, 0.0, 1);
    CHECK(zero.achieved_incoh < 1e-14);
    CHECK((zero.basis1.transpose() * zero.basis1 - Matrix::Identity(4, 4)).norm() < 1e-12);

    const auto planar = build_incoherent_bases(2, 1, 1, 0.5, 2);
    CHECK(planar.achieved_incoh == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(planar.achieved_incoh - 0.5) < 1e-12);
    CHECK(planar.basis2.col(0).norm() == doctest::Approx(1.0));

    const auto full = build_incoherent_bases(8, 2, 2, 1.0, 3);
    CHECK(full.achieved_incoh == doctest::Approx(1.0));

    CHECK(mutual_incoherence(zero.basis1, zero.basis2) == zero.achieved_incoh);
    CHECK_THROWS_AS(build_incoherent_bases(4, 3, 2, 0.1, 0), InvalidInput);
    CHECK_THROWS_AS(build_incoherent_bases(8, 2, 2, 1.5, 0), InvalidInput);
    CHECK(incoh_from_gamma(256, 0.5) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("instances satisfy the sparse representation") {
    const auto bases = build_incoherent_bases(32, 6, 6, 0.1, 4);
    const auto inst = make_instance(bases, 3, false, 5);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const auto& w = inst.weights[a][b];
            CHECK(w.coeffs.cwiseAbs().maxCoeff() <= 1.0);
            CHECK((w.U * w.coeffs.asDiagonal() * w.V.transpose() - w.W).norm() < 1e-12);
            const Matrix& Ba = a == 0 ? bases.basis1 : bases.basis2;
            // each atom is a scaled dictionary column
            for (int s = 0; s < 3; ++s) {
                const double n = w.U.col(s).norm();
                CHECK(n <= 1.0 + 1e-12);
                CHECK((Ba.transpose() * w.U.col(s)).cwiseAbs().maxCoeff() == doctest::Approx(n).epsilon(1e-12));
            }
        }
    CHECK((inst.x_q() - inst.c_q - inst.t_q).norm() < 1e-15);
}

TEST_CASE("zero incoherence gives an exact factorization") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto inst = make_instance(build_incoherent_bases(64, 8, 8, 0.0, seed), 3, false, seed + 100);
        const auto r = thm2_verify(inst);
        CHECK(r.gap <= 1e-10);
        CHECK(r.holds);
    }
}

TEST_CASE("gap equals the brute-force cross-term sum") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const bool noise = seed % 2 == 1;
        const auto inst = make_instance(build_incoherent_bases(24, 4, 4, 0.2, seed), 1 + int(seed % 3), noise, seed);
        const auto r = thm2_verify(inst);
        CHECK(r.gap == doctest::Approx(brute_gap(inst)).epsilon(1e-10));
        const double s = inst.s;
        const double expect = 12.0 * s * inst.incoh() + (noise ? 36.0 * inst.incoh() : 0.0);
        CHECK(r.bound == doctest::Approx(expect));
    }
}

TEST_CASE("transposed instance has the same gap") {
    const auto inst = make_instance(build_incoherent_bases(32, 5, 5, 0.1, 9), 3, true, 10);
    const auto a = thm2_verify(inst);
    const auto b = thm2_verify(inst.transposed());
    CHECK(b.gap == doctest::Approx(a.gap).epsilon(1e-12));
    CHECK(b.log_lhs == doctest::Approx(a.log_lhs).epsilon(1e-12));
}

TEST_CASE("gap is linear in the tilt to first order") {
    // same seed: same partners, rotation, atoms and coefficients; only the tilt differs
    const auto big = thm2_verify(make_instance(build_incoherent_bases(64, 6, 6, 0.02, 21), 3, false, 22));
    const auto small = thm2_verify(make_instance(build_incoherent_bases(64, 6, 6, 0.01, 21), 3, false, 22));
    REQUIRE(small.gap > 0);
    CHECK(big.gap / small.gap == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("trial runner") {
    Thm2TrialConfig cfg;
    cfg.d = 64;
    cfg.trials = 20;
    const auto a = run_thm2_trials(cfg);
    const auto b = run_thm2_trials(cfg);
    CHECK(a.trials == 20);
    CHECK(a.holds == 20);
    CHECK(a.max_gap == b.max_gap);
    CHECK(a.max_incoh <= 0.05 + 1e-12);
    cfg.trials = 0;
    CHECK_THROWS_AS(run_thm2_trials(cfg), InvalidInput);
}
