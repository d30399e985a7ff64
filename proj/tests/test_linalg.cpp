#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "ddswitch/linalg.hpp"
#include "ddswitch/rng.hpp"

using namespace ddswitch;

namespace {

CMatrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    CMatrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.complex_normal();
    return m;
}

}  // namespace

TEST(Dft, SmallCases) {
    const CMatrix u1 = dft_matrix(1);
    ASSERT_EQ(u1.rows(), 1);
    EXPECT_NEAR(std::abs(u1(0, 0) - cplx(1, 0)), 0.0, 1e-15);

    const CMatrix u2 = dft_matrix(2);
    const double h = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(u2(0, 0) - h), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(u2(0, 1) - h), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(u2(1, 0) - h), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(u2(1, 1) + h), 0.0, 1e-15);
}

TEST(Dft, Unitary) {
    EXPECT_LT(unitarity_error(dft_matrix(8)), 1e-12);
    EXPECT_LT(unitarity_error(dft_matrix(135)), 1e-12);
}

TEST(Dft, NegativeExponentConvention) {
    const CMatrix u = dft_matrix(5);
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            const cplx want = std::exp(cplx(0, -2.0 * kPi * a * b / 5.0)) / std::sqrt(5.0);
            EXPECT_NEAR(std::abs(u(a, b) - want), 0.0, 1e-14);
        }
}

TEST(Dft, ZeroSizeRejected) { EXPECT_THROW(dft_matrix(0), InvalidDimension); }

TEST(Kron, Identities) {
    const CMatrix k = kron(CMatrix::Identity(2, 2), CMatrix::Identity(3, 3));
    EXPECT_LT((k - CMatrix::Identity(6, 6)).norm(), 1e-15);

    CMatrix swap(2, 2);
    swap << 0, 1, 1, 0;
    CMatrix two(1, 1);
    two << 2;
    CMatrix want(2, 2);
    want << 0, 2, 2, 0;
    EXPECT_LT((kron(swap, two) - want).norm(), 1e-15);
}

TEST(Kron, UnitaryProduct) {
    EXPECT_LT(unitarity_error(kron(dft_matrix(2), dft_matrix(3))), 1e-12);
}

TEST(Kron, MixedProductProperty) {
    Rng rng(4);
    const CMatrix a = random_matrix(2, 3, rng), b = random_matrix(3, 2, rng);
    const CMatrix c = random_matrix(3, 2, rng), d = random_matrix(2, 4, rng);
    const CMatrix lhs = kron(a, b) * kron(c, d);
    const CMatrix rhs = kron(a * c, b * d);
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
}

TEST(FoldPosition, IsPermutation) {
    for (std::size_t n : {1u, 2u, 7u, 10u, 135u}) {
        std::vector<int> hit(n, 0);
        for (std::size_t i = 0; i < n; ++i) ++hit[fold_position(i, n)];
        for (int h : hit) EXPECT_EQ(h, 1);
    }
    // circular neighbours stay close after folding
    const std::size_t n = 20;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = fold_position(i, n), b = fold_position((i + 1) % n, n);
        EXPECT_LE(a > b ? a - b : b - a, 2u);
    }
}

TEST(BandTrace, MatchesDenseInverse) {
    Rng rng(11);
    for (std::size_t n : {1u, 5u, 40u}) {
        for (std::size_t bw : {0u, 1u, 3u, 60u}) {
            // random Hermitian PSD band matrix: A^H A restricted to a band is not PSD in
            // general, so build it from a banded factor instead
            const auto sz = static_cast<Eigen::Index>(n);
            CMatrix l = CMatrix::Zero(sz, sz);
            for (Eigen::Index i = 0; i < sz; ++i)
                for (Eigen::Index j = std::max<Eigen::Index>(0, i - static_cast<Eigen::Index>(bw) / 2); j <= i; ++j)
                    l(i, j) = rng.complex_normal();
            const CMatrix a = l * l.adjoint();
            HermitianBand band(n, bw);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = (i > band.bandwidth() ? i - band.bandwidth() : 0); j <= i; ++j)
                    band.lower(i, j) = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            for (double shift : {1e-3, 0.5, 10.0}) {
                CMatrix s = band.to_dense();
                s.diagonal().array() += shift;
                const double want = s.inverse().trace().real();
                EXPECT_NEAR(band_trace_inverse(band, shift), want, 1e-9 * std::abs(want)) << n << " " << bw;
            }
        }
    }
}

TEST(BandTrace, SingularDetected) {
    HermitianBand band(3, 1);
    EXPECT_THROW(band_trace_inverse(band, 0.0), SingularMatrix);
    EXPECT_NEAR(band_trace_inverse(band, 2.0), 1.5, 1e-15);
}

TEST(HermitianBand, ToDenseIsHermitian) {
    HermitianBand b(4, 2);
    b.lower(2, 0) = cplx(1, 2);
    b.lower(3, 3) = cplx(5, 0);
    const CMatrix d = b.to_dense();
    EXPECT_EQ(d(2, 0), cplx(1, 2));
    EXPECT_EQ(d(0, 2), cplx(1, -2));
    EXPECT_EQ(d(3, 3), cplx(5, 0));
    EXPECT_LT((d - d.adjoint()).norm(), 1e-15);
}
