#include <gtest/gtest.h>

#include <chrono>

#include "ddswitch/grid.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/rng.hpp"
#include "ddswitch/transforms.hpp"

using namespace ddswitch;

namespace {

CMatrix random_grid(std::size_t n, std::size_t m, Rng& rng) {
    CMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.complex_normal();
    return x;
}

// ISFFT followed by rectangular-pulse Heisenberg synthesis, sampled at t = q / (M F0),
// as literal double sums with unitary scaling 1/sqrt(NM) and 1/sqrt(M).
CVector brute_force_otfs(const CMatrix& x_dd) {
    const auto N = x_dd.rows(), M = x_dd.cols();
    CMatrix x_tf = CMatrix::Zero(N, M);
    for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index m = 0; m < M; ++m)
            for (Eigen::Index k = 0; k < N; ++k)
                for (Eigen::Index l = 0; l < M; ++l) {
                    const double ph = 2.0 * kPi * (double(n * k) / N - double(m * l) / M);
                    x_tf(n, m) += x_dd(k, l) * std::exp(cplx(0, ph));
                }
    x_tf /= std::sqrt(double(N * M));
    CVector s = CVector::Zero(N * M);
    for (Eigen::Index n = 0; n < N; ++n)
        for (Eigen::Index q = 0; q < M; ++q) {
            // g(t - nT0) = 1/sqrt(T0) on symbol n; sampling at Ts = T0/M gives 1/sqrt(M)
            for (Eigen::Index m = 0; m < M; ++m) s(n * M + q) += x_tf(n, m) * std::exp(cplx(0, 2.0 * kPi * m * q / M));
            s(n * M + q) /= std::sqrt(double(M));
        }
    return s;
}

}  // namespace

TEST(Grid, StockGeometry) {
    const GridConfig g = GridConfig::stock();
    EXPECT_EQ(g.N, 9u);
    EXPECT_EQ(g.M, 135u);
    EXPECT_NEAR(g.B, 15e6, 1e-3);
    EXPECT_NEAR(g.T0 * g.F0, 1.0, 1e-12);
    EXPECT_NEAR(g.doppler_resolution(), 1.0 / (9 * 9e-6), 1e-6);
    EXPECT_NEAR(g.delay_resolution(), 1.0 / 15e6, 1e-18);
    EXPECT_NEAR(g.sample_period(), 9e-6 / 135, 1e-18);
    EXPECT_GT(g.doppler_resolution(), 0.0);
}

TEST(Grid, ValidationErrors) {
    GridConfig g = GridConfig::unit(2, 2);
    g.F0 = 1.1;
    EXPECT_THROW(g.validate(), InvalidArgument);
    g = GridConfig::unit(2, 2);
    g.B = 3.0;
    EXPECT_THROW(g.validate(), InvalidArgument);
    EXPECT_THROW(GridConfig::unit(0, 3), InvalidDimension);
    EXPECT_THROW(GridConfig::unit(3, 0), InvalidDimension);
    EXPECT_THROW(GridConfig::from_symbol_duration(2, 2, -1.0, 0.0), InvalidArgument);
}

TEST(TransformSet, TrivialGrid) {
    const TransformSet t = build_transform_set(GridConfig::unit(1, 1));
    for (const CMatrix* u : {&t.U_sfft, &t.U_tf, &t.U_dd}) {
        ASSERT_EQ(u->rows(), 1);
        EXPECT_NEAR(std::abs((*u)(0, 0) - cplx(1, 0)), 0.0, 1e-15);
    }
}

TEST(TransformSet, ConstructionIdentities) {
    const TransformSet t = build_transform_set(GridConfig::unit(3, 4));
    EXPECT_EQ((t.U_sfft - kron(t.U_N, t.U_M.adjoint())).norm(), 0.0);
    EXPECT_EQ((t.U_tf - kron(CMatrix::Identity(3, 3), t.U_M.adjoint())).norm(), 0.0);
    EXPECT_EQ((t.U_dd - t.U_tf * t.U_sfft.adjoint()).norm(), 0.0);
}

TEST(TransformSet, HeisenbergColumnN2M2) {
    // basis function phi_{n=1,m=1} sampled at t = q/(M F0): lives on samples 2, 3
    const TransformSet t = build_transform_set(GridConfig::unit(2, 2));
    const CVector col = t.U_tf.col(3);
    EXPECT_NEAR(std::abs(col(0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(col(1)), 0.0, 1e-15);
    const double h = 1.0 / std::sqrt(2.0);
    for (int q = 0; q < 2; ++q) {
        // g(t - T0) e^{j 2pi F0 (t - T0)} at t = T0 + q T0/2
        const cplx want = h * std::exp(cplx(0, 2.0 * kPi * q / 2.0));
        EXPECT_NEAR(std::abs(col(2 + q) - want), 0.0, 1e-15);
    }
    EXPECT_NEAR(std::abs(col(2) - h), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(col(3) + h), 0.0, 1e-15);
}

TEST(TransformSet, StockGridUnitary) {
    const auto t0 = std::chrono::steady_clock::now();
    const TransformSet t = build_transform_set(GridConfig::stock());
    EXPECT_LT(unitarity_error(t.U_sfft), 1e-10);
    EXPECT_LT(unitarity_error(t.U_tf), 1e-10);
    EXPECT_LT(unitarity_error(t.U_dd), 1e-10);
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
}

TEST(TransformSet, UnitaryOnAssortedGrids) {
    for (auto [n, m] : {std::pair{1, 7}, {4, 1}, {3, 5}, {8, 16}}) {
        const TransformSet t = build_transform_set(GridConfig::unit(n, m));
        EXPECT_LT(unitarity_error(t.U_sfft), 1e-10);
        EXPECT_LT(unitarity_error(t.U_tf), 1e-10);
        EXPECT_LT(unitarity_error(t.U_dd), 1e-10);
    }
}

TEST(Otfs, ZeroInZeroOut) {
    const TransformSet t = build_transform_set(GridConfig::unit(2, 3));
    EXPECT_EQ(otfs_modulate(CMatrix::Zero(2, 3), t).norm(), 0.0);
    EXPECT_EQ(otfs_demodulate(CVector::Zero(6), t).norm(), 0.0);
}

TEST(Otfs, SingleSymbolMatchesDoubleSum) {
    const TransformSet t = build_transform_set(GridConfig::unit(2, 2));
    CMatrix x = CMatrix::Zero(2, 2);
    x(0, 0) = 1.0;
    const CVector s = otfs_modulate(x, t);
    EXPECT_NEAR(s.norm(), 1.0, 1e-12);
    EXPECT_LT((s - brute_force_otfs(x)).norm(), 1e-12);
}

TEST(Otfs, MatchesDoubleSumOnAllSmallGrids) {
    Rng rng(1);
    for (std::size_t n = 1; n <= 4; ++n)
        for (std::size_t m = 1; m <= 4; ++m) {
            const TransformSet t = build_transform_set(GridConfig::unit(n, m));
            const CMatrix x = random_grid(n, m, rng);
            EXPECT_LT((otfs_modulate(x, t) - brute_force_otfs(x)).norm(), 1e-10) << n << "x" << m;
        }
}

TEST(Otfs, RoundTrip) {
    Rng rng(2);
    const TransformSet t = build_transform_set(GridConfig::unit(3, 4));
    const CMatrix x = random_grid(3, 4, rng);
    EXPECT_LT((otfs_demodulate(otfs_modulate(x, t), t) - x).norm(), 1e-12);
}

TEST(Otfs, RoundTripStockGrid) {
    Rng rng(3);
    const TransformSet t = build_transform_set(GridConfig::stock());
    const CMatrix x = random_grid(9, 135, rng);
    const CVector s = otfs_modulate(x, t);
    EXPECT_NEAR(s.norm(), x.norm(), 1e-10);
    EXPECT_LT((otfs_demodulate(s, t) - x).norm(), 1e-10);
}

TEST(Otfs, DemodulateBasisColumn) {
    // r = column (n,m) of U_tf: the Wigner stage returns a TF impulse at (n,m)
    const TransformSet t = build_transform_set(GridConfig::unit(3, 4));
    const CVector r = t.U_tf.col(1 * 4 + 2);
    const CMatrix y_tf = unvectorize(t.U_tf.adjoint() * r, 3, 4);
    CMatrix want = CMatrix::Zero(3, 4);
    want(1, 2) = 1.0;
    EXPECT_LT((y_tf - want).norm(), 1e-12);
    // and the SFFT stage maps it onto the DD plane without loss
    EXPECT_NEAR(otfs_demodulate(r, t).norm(), 1.0, 1e-12);
}

TEST(Otfs, ParsevalDemod) {
    Rng rng(4);
    const TransformSet t = build_transform_set(GridConfig::unit(2, 3));
    CVector r(6);
    for (auto& v : r) v = rng.complex_normal();
    EXPECT_NEAR(otfs_demodulate(r, t).norm(), r.norm(), 1e-12);
}

TEST(Otfs, DimensionMismatch) {
    const TransformSet t = build_transform_set(GridConfig::unit(2, 3));
    EXPECT_THROW(otfs_modulate(CMatrix::Zero(3, 2), t), InvalidDimension);
    EXPECT_THROW(otfs_demodulate(CVector::Zero(5), t), InvalidDimension);
    EXPECT_THROW(ofdm_modulate(CMatrix::Zero(2, 2), t), InvalidDimension);
    EXPECT_THROW(ofdm_demodulate(CVector::Zero(7), t), InvalidDimension);
}

TEST(Ofdm, ImpulseIsFlat) {
    const TransformSet t = build_transform_set(GridConfig::unit(3, 4));
    CMatrix x = CMatrix::Zero(3, 4);
    x(0, 0) = 1.0;
    const CVector s = ofdm_modulate(x, t);
    for (int q = 0; q < 4; ++q) EXPECT_NEAR(std::abs(s(q) - cplx(0.5, 0)), 0.0, 1e-15);
    for (int q = 4; q < 12; ++q) EXPECT_NEAR(std::abs(s(q)), 0.0, 1e-15);
}

TEST(Ofdm, ZeroAndRoundTrip) {
    Rng rng(5);
    const TransformSet t = build_transform_set(GridConfig::unit(4, 5));
    EXPECT_EQ(ofdm_modulate(CMatrix::Zero(4, 5), t).norm(), 0.0);
    const CMatrix x = random_grid(4, 5, rng);
    const CVector s = ofdm_modulate(x, t);
    EXPECT_NEAR(s.norm(), x.norm(), 1e-12);
    EXPECT_LT((ofdm_demodulate(s, t) - x).norm(), 1e-12);
}

TEST(Ofdm, OtfsIsSfftPrecodedOfdm) {
    Rng rng(6);
    const TransformSet t = build_transform_set(GridConfig::unit(3, 4));
    const CMatrix x = random_grid(3, 4, rng);
    const CMatrix x_tf = unvectorize(t.U_sfft.adjoint() * vectorize(x), 3, 4);
    EXPECT_LT((otfs_modulate(x, t) - ofdm_modulate(x_tf, t)).norm(), 1e-12);
}

TEST(Vectorize, RowMajor) {
    CMatrix x(2, 3);
    x << 1, 2, 3, 4, 5, 6;
    const CVector v = vectorize(x);
    for (int i = 0; i < 6; ++i) EXPECT_EQ(v(i), cplx(i + 1, 0));
    EXPECT_EQ(unvectorize(v, 2, 3), x);
    EXPECT_THROW(unvectorize(v, 4, 2), InvalidDimension);
}
