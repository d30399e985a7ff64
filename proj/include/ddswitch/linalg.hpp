#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ddswitch/core.hpp"

namespace ddswitch {

/// Unitary DFT matrix: entry (a,b) = exp(-j 2 pi a b / n) / sqrt(n).
inline CMatrix dft_matrix(std::size_t n) {
    if (n == 0) throw InvalidDimension("dft_matrix: size must be >= 1");
    const auto sz = static_cast<Eigen::Index>(n);
    CMatrix u(sz, sz);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index a = 0; a < sz; ++a) {
        for (Eigen::Index b = 0; b < sz; ++b) {
            // reduce a*b mod n first so the phase argument stays small
            const auto k = static_cast<double>((a * b) % sz);
            u(a, b) = scale * unit_phasor(-kTwoPi * k / static_cast<double>(n));
        }
    }
    return u;
}

/// Kronecker product; block (a,b) of the result is A(a,b) * B.
inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

/// ||U U^H - I||_F
inline double unitarity_error(const CMatrix& u) {
    if (u.rows() != u.cols()) throw InvalidDimension("unitarity_error: matrix must be square");
    return (u * u.adjoint() - CMatrix::Identity(u.rows(), u.cols())).norm();
}

/**
 * Hermitian matrix in lower band storage: element (i, j) with
 * 0 <= i - j <= bandwidth lives at data[i * (bandwidth + 1) + (i - j)].
 */
class HermitianBand {
public:
    HermitianBand(std::size_t n, std::size_t bandwidth)
        : n_(n), bw_(std::min(bandwidth, n == 0 ? 0 : n - 1)), data_(n * (bw_ + 1), cplx{}) {}

    std::size_t size() const { return n_; }
    std::size_t bandwidth() const { return bw_; }

    /// Lower-triangle access, requires 0 <= i - j <= bandwidth.
    cplx& lower(std::size_t i, std::size_t j) { return data_[i * (bw_ + 1) + (i - j)]; }
    const cplx& lower(std::size_t i, std::size_t j) const { return data_[i * (bw_ + 1) + (i - j)]; }

    CMatrix to_dense() const {
        const auto sz = static_cast<Eigen::Index>(n_);
        CMatrix out = CMatrix::Zero(sz, sz);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = i >= bw_ ? i - bw_ : 0; j <= i; ++j) {
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lower(i, j);
                out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = std::conj(lower(i, j));
            }
        }
        return out;
    }

private:
    std::size_t n_;
    std::size_t bw_;
    std::vector<cplx> data_;
};

/**
 * trace((A + shift I)^-1) for a Hermitian positive definite band matrix.
 *
 * Band LDL^H factorization followed by the Takahashi recurrences for the
 * entries of the inverse that fall inside the band; O(n b^2) overall.
 */
inline double band_trace_inverse(const HermitianBand& a, double shift) {
    const std::size_t n = a.size();
    const std::size_t bw = a.bandwidth();
    if (n == 0) return 0.0;

    // unit lower factor L (band) and diagonal D
    HermitianBand l(n, bw);
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k0 = j >= bw ? j - bw : 0;
        double dj = a.lower(j, j).real() + shift;
        for (std::size_t k = k0; k < j; ++k) dj -= std::norm(l.lower(j, k)) * d[k];
        if (!(dj > 0.0) || !std::isfinite(dj)) {
            throw SingularMatrix("band_trace_inverse: matrix is not positive definite");
        }
        d[j] = dj;
        l.lower(j, j) = 1.0;
        const std::size_t i1 = std::min(n - 1, j + bw);
        for (std::size_t i = j + 1; i <= i1; ++i) {
            cplx s = a.lower(i, j);
            const std::size_t kk0 = i >= bw ? i - bw : 0;
            for (std::size_t k = kk0; k < j; ++k) s -= l.lower(i, k) * std::conj(l.lower(j, k)) * d[k];
            l.lower(i, j) = s / dj;
        }
    }

    // Z = A^-1 restricted to the band, swept from the bottom-right corner
    HermitianBand z(n, bw);
    auto z_at = [&](std::size_t i, std::size_t k) -> cplx {
        return i >= k ? z.lower(i, k) : std::conj(z.lower(k, i));
    };
    double trace = 0.0;
    for (std::size_t jj = n; jj-- > 0;) {
        const std::size_t i1 = std::min(n - 1, jj + bw);
        for (std::size_t i = i1; i > jj; --i) {
            cplx s{};
            for (std::size_t k = jj + 1; k <= i1; ++k) s -= z_at(i, k) * l.lower(k, jj);
            z.lower(i, jj) = s;
        }
        double zjj = 1.0 / d[jj];
        for (std::size_t k = jj + 1; k <= i1; ++k) zjj -= (std::conj(l.lower(k, jj)) * z.lower(k, jj)).real();
        z.lower(jj, jj) = zjj;
        trace += zjj;
    }
    return trace;
}

/// Position of index i under the fold ordering 0, n-1, 1, n-2, ...
/// Circular distance d between indices becomes a position distance of at most 2d.
inline std::size_t fold_position(std::size_t i, std::size_t n) {
    return 2 * i < n ? 2 * i : 2 * (n - 1 - i) + 1;
}

}  // namespace ddswitch
