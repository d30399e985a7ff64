#pragma once

#include <cstddef>

#include "ddswitch/core.hpp"
#include "ddswitch/grid.hpp"
#include "ddswitch/linalg.hpp"

namespace ddswitch {

// Grids are N x M (rows: Doppler index k or symbol index n; columns: delay
// index l or subcarrier m). Vectorization is row-major, so entry (n, m) sits
// at n*M + m. The same order indexes time samples: sample q = n*M + q' lies
// in symbol n.

using RowMajorCMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline CVector vectorize(const CMatrix& grid) {
    RowMajorCMatrix rm = grid;
    return Eigen::Map<const CVector>(rm.data(), rm.size());
}

inline CMatrix unvectorize(const CVector& v, std::size_t rows, std::size_t cols) {
    if (static_cast<std::size_t>(v.size()) != rows * cols) {
        throw InvalidDimension("unvectorize: length does not match grid");
    }
    return Eigen::Map<const RowMajorCMatrix>(v.data(), static_cast<Eigen::Index>(rows),
                                             static_cast<Eigen::Index>(cols));
}

/**
 * Dense unitary operators of the two-step OTFS chain.
 *
 *   sfft = U_N (x) U_M^H          DD -> TF is sfft^H (ISFFT), TF -> DD is sfft (SFFT)
 *   tf   = I_N (x) U_M^H          columns: sampled basis g(t - nT0) exp(j2pi m F0 t)
 *   dd   = tf * sfft^H
 */
struct TransformSet {
    std::size_t N = 0;
    std::size_t M = 0;
    CMatrix U_N;
    CMatrix U_M;
    CMatrix U_sfft;
    CMatrix U_tf;
    CMatrix U_dd;
};

inline TransformSet build_transform_set(const GridConfig& grid) {
    grid.validate();
    TransformSet t;
    t.N = grid.N;
    t.M = grid.M;
    t.U_N = dft_matrix(grid.N);
    t.U_M = dft_matrix(grid.M);
    t.U_sfft = kron(t.U_N, t.U_M.adjoint());
    t.U_tf = kron(CMatrix::Identity(t.U_N.rows(), t.U_N.cols()), t.U_M.adjoint());
    t.U_dd = t.U_tf * t.U_sfft.adjoint();
    return t;
}

namespace detail {
inline void check_grid(const CMatrix& x, const TransformSet& t) {
    if (static_cast<std::size_t>(x.rows()) != t.N || static_cast<std::size_t>(x.cols()) != t.M) {
        throw InvalidDimension("grid is not N x M for this transform set");
    }
}
inline void check_samples(const CVector& r, const TransformSet& t) {
    if (static_cast<std::size_t>(r.size()) != t.N * t.M) {
        throw InvalidDimension("sample vector length is not N*M for this transform set");
    }
}
}  // namespace detail

/// ISFFT then Heisenberg: s = U_tf U_sfft^H vec(X_dd).
inline CVector otfs_modulate(const CMatrix& x_dd, const TransformSet& t) {
    detail::check_grid(x_dd, t);
    return t.U_tf * (t.U_sfft.adjoint() * vectorize(x_dd));
}

/// Wigner (matched filter) then SFFT: vec(Y_dd) = U_sfft U_tf^H r.
inline CMatrix otfs_demodulate(const CVector& r, const TransformSet& t) {
    detail::check_samples(r, t);
    return unvectorize(t.U_sfft * (t.U_tf.adjoint() * r), t.N, t.M);
}

/// N back-to-back M-subcarrier OFDM symbols: s = U_tf vec(X_tf).
inline CVector ofdm_modulate(const CMatrix& x_tf, const TransformSet& t) {
    detail::check_grid(x_tf, t);
    return t.U_tf * vectorize(x_tf);
}

inline CMatrix ofdm_demodulate(const CVector& r, const TransformSet& t) {
    detail::check_samples(r, t);
    return unvectorize(t.U_tf.adjoint() * r, t.N, t.M);
}

}  // namespace ddswitch
