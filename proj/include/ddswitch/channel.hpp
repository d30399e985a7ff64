#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "ddswitch/core.hpp"
#include "ddswitch/grid.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/rng.hpp"
#include "ddswitch/transforms.hpp"

namespace ddswitch {

struct Path {
    cplx gain;       // alpha_k
    double delay;    // tau_k [s]
    double doppler;  // nu_k [Hz]

    bool operator==(const Path&) const = default;
};

/// One multipath realization. `normalized` asserts sum |alpha_k|^2 == 1.
struct PathSet {
    std::vector<Path> paths;
    bool normalized = false;

    std::size_t size() const { return paths.size(); }

    double total_power() const {
        double p = 0.0;
        for (const auto& path : paths) p += std::norm(path.gain);
        return p;
    }

    void validate() const {
        if (paths.empty()) throw InvalidChannel("PathSet: at least one path required");
        for (const auto& path : paths) {
            if (!(path.delay >= 0.0) || !std::isfinite(path.delay)) {
                throw InvalidChannel("PathSet: delays must be finite and >= 0");
            }
            if (!std::isfinite(path.doppler) || !std::isfinite(path.gain.real()) ||
                !std::isfinite(path.gain.imag())) {
                throw InvalidChannel("PathSet: non-finite gain or Doppler");
            }
        }
        if (normalized && std::abs(total_power() - 1.0) > 1e-10) {
            throw InvalidChannel("PathSet: flagged normalized but total power != 1");
        }
    }

    bool operator==(const PathSet&) const = default;
};

/// H(t, f) = sum_k alpha_k exp(-j2pi tau_k f) exp(-j2pi nu_k t)
inline cplx tf_response_at(const PathSet& paths, double t, double f) {
    cplx h{};
    for (const auto& p : paths.paths) {
        h += p.gain * unit_phasor(-kTwoPi * p.delay * f) * unit_phasor(-kTwoPi * p.doppler * t);
    }
    return h;
}

/// H_tf[n, m] = H(n T0, m F0), an N x M grid.
inline CMatrix sample_tf_grid(const PathSet& paths, const GridConfig& grid) {
    grid.validate();
    const auto rows = static_cast<Eigen::Index>(grid.N);
    const auto cols = static_cast<Eigen::Index>(grid.M);
    CMatrix h(rows, cols);
    for (Eigen::Index n = 0; n < rows; ++n) {
        for (Eigen::Index m = 0; m < cols; ++m) {
            h(n, m) = tf_response_at(paths, static_cast<double>(n) * grid.T0, static_cast<double>(m) * grid.F0);
        }
    }
    return h;
}

/// Delay in samples at rate B, rounded to the nearest sample.
inline std::size_t delay_in_samples(double delay, const GridConfig& grid) {
    return static_cast<std::size_t>(std::llround(delay / grid.sample_period()));
}

/**
 * Sparse circular tap operator: row q holds values(q, t) in column
 * (q - lags[t]) mod size. Entries with equal lags add up. This is the
 * structure of both the burst-circular OTFS channel and the per-symbol
 * (ideal cyclic prefix) OFDM channel.
 */
struct TapOperator {
    std::size_t size = 0;
    std::vector<std::size_t> lags;
    CMatrix values;  // size x lags.size()

    CMatrix to_dense() const {
        const auto n = static_cast<Eigen::Index>(size);
        CMatrix h = CMatrix::Zero(n, n);
        for (Eigen::Index q = 0; q < n; ++q) {
            for (std::size_t t = 0; t < lags.size(); ++t) {
                const auto col = static_cast<Eigen::Index>((static_cast<std::size_t>(q) + size - lags[t]) % size);
                h(q, col) += values(q, static_cast<Eigen::Index>(t));
            }
        }
        return h;
    }

    /// Sum of |values|, an upper bound on every singular value.
    double gain_bound() const {
        double bound = 0.0;
        for (Eigen::Index t = 0; t < values.cols(); ++t) bound += values.col(t).cwiseAbs().maxCoeff();
        return bound;
    }

    /// H^H H in band storage, with rows/columns permuted by fold_position so
    /// that the circular wrap-around turns into a narrow band.
    HermitianBand folded_gram() const {
        const std::size_t taps = lags.size();
        auto column_of = [&](std::size_t q, std::size_t t) { return (q + size - lags[t]) % size; };
        std::size_t bw = 0;
        for (std::size_t q = 0; q < size; ++q) {
            for (std::size_t t1 = 0; t1 < taps; ++t1) {
                const std::size_t pa = fold_position(column_of(q, t1), size);
                for (std::size_t t2 = 0; t2 < taps; ++t2) {
                    const std::size_t pb = fold_position(column_of(q, t2), size);
                    bw = std::max(bw, pa > pb ? pa - pb : pb - pa);
                }
            }
        }
        HermitianBand g(size, bw);
        for (std::size_t q = 0; q < size; ++q) {
            const auto row = static_cast<Eigen::Index>(q);
            for (std::size_t t1 = 0; t1 < taps; ++t1) {
                const std::size_t pa = fold_position(column_of(q, t1), size);
                const cplx v1 = std::conj(values(row, static_cast<Eigen::Index>(t1)));
                for (std::size_t t2 = 0; t2 < taps; ++t2) {
                    const std::size_t pb = fold_position(column_of(q, t2), size);
                    if (pa >= pb) g.lower(pa, pb) += v1 * values(row, static_cast<Eigen::Index>(t2));
                }
            }
        }
        return g;
    }
};

/// Burst-circular operator: H[q, q'] = sum_k alpha_k exp(j2pi nu_k q Ts) for q - q' = l_k (mod NM).
inline TapOperator burst_tap_operator(const PathSet& paths, const GridConfig& grid) {
    paths.validate();
    grid.validate();
    const std::size_t n = grid.size();
    const double ts = grid.sample_period();
    TapOperator op;
    op.size = n;
    op.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(paths.size()));
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const auto& p = paths.paths[k];
        const std::size_t lag = delay_in_samples(p.delay, grid);
        if (lag >= n) throw InvalidChannel("burst_time_operator: path delay exceeds the burst duration");
        op.lags.push_back(lag);
        for (std::size_t q = 0; q < n; ++q) {
            op.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
                p.gain * unit_phasor(kTwoPi * p.doppler * static_cast<double>(q) * ts);
        }
    }
    return op;
}

/// Symbol n with an ideal cyclic prefix: circular over M samples.
inline TapOperator symbol_tap_operator(const PathSet& paths, const GridConfig& grid, std::size_t symbol) {
    paths.validate();
    grid.validate();
    if (symbol >= grid.N) throw InvalidArgument("per_symbol_time_operator: symbol index out of range");
    const std::size_t m = grid.M;
    const double ts = grid.sample_period();
    const double t_start = static_cast<double>(symbol) * grid.T0;
    TapOperator op;
    op.size = m;
    op.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(paths.size()));
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const auto& p = paths.paths[k];
        const std::size_t lag = delay_in_samples(p.delay, grid);
        if (lag >= m) throw InvalidChannel("per_symbol_time_operator: path delay exceeds the symbol duration");
        op.lags.push_back(lag);
        for (std::size_t q = 0; q < m; ++q) {
            op.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
                p.gain * unit_phasor(kTwoPi * p.doppler * (t_start + static_cast<double>(q) * ts));
        }
    }
    return op;
}

inline CMatrix burst_time_operator(const PathSet& paths, const GridConfig& grid) {
    return burst_tap_operator(paths, grid).to_dense();
}

inline CMatrix per_symbol_time_operator(const PathSet& paths, const GridConfig& grid, std::size_t symbol) {
    return symbol_tap_operator(paths, grid, symbol).to_dense();
}

/**
 * (A (x) B) H (A (x) B)^H for square A (p x p) and B (r x r), H of size pr x pr,
 * without forming the Kronecker product.
 */
inline CMatrix kron_similarity(const CMatrix& h, const CMatrix& a, const CMatrix& b) {
    const Eigen::Index p = a.rows();
    const Eigen::Index r = b.rows();
    if (h.rows() != p * r || h.cols() != p * r) throw InvalidDimension("kron_similarity: size mismatch");
    // inner factor on every r x r block
    CMatrix y(p * r, p * r);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            y.block(i * r, j * r, r, r).noalias() = b * h.block(i * r, j * r, r, r) * b.adjoint();
        }
    }
    if (a.isIdentity(0.0)) return y;
    // outer factor mixes blocks: rows first, then columns
    CMatrix t = CMatrix::Zero(p * r, p * r);
    for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index i = 0; i < p; ++i) {
            if (a(k, i) == cplx{}) continue;
            t.middleRows(k * r, r) += a(k, i) * y.middleRows(i * r, r);
        }
    }
    CMatrix z = CMatrix::Zero(p * r, p * r);
    for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (a(k, j) == cplx{}) continue;
            z.middleCols(k * r, r) += std::conj(a(k, j)) * t.middleCols(j * r, r);
        }
    }
    return z;
}

/// All channel operators of one realization.
struct EffectiveChannel {
    CMatrix H_tf_grid;                // N x M samples of H(t, f)
    CMatrix H_time;                   // NM x NM burst operator
    CMatrix H_tf_mat;                 // U_tf^H H_time U_tf
    CMatrix H_dd;                     // U_sfft H_tf_mat U_sfft^H
    std::vector<CMatrix> ofdm_blocks;  // U_M C_n U_M^H, one per symbol
};

inline EffectiveChannel effective_matrices(const PathSet& paths, const GridConfig& grid, const TransformSet& t) {
    if (t.N != grid.N || t.M != grid.M) throw InvalidDimension("effective_matrices: transform set does not match grid");
    EffectiveChannel eff;
    eff.H_tf_grid = sample_tf_grid(paths, grid);
    eff.H_time = burst_time_operator(paths, grid);
    const CMatrix identity_n = CMatrix::Identity(t.U_N.rows(), t.U_N.cols());
    // U_tf = I_N (x) U_M^H and U_sfft = U_N (x) U_M^H
    eff.H_tf_mat = kron_similarity(eff.H_time, identity_n, t.U_M);
    eff.H_dd = kron_similarity(eff.H_tf_mat, t.U_N, t.U_M.adjoint());
    eff.ofdm_blocks.reserve(grid.N);
    for (std::size_t n = 0; n < grid.N; ++n) {
        eff.ofdm_blocks.push_back(t.U_M * per_symbol_time_operator(paths, grid, n) * t.U_M.adjoint());
    }
    return eff;
}

/**
 * Channel estimate H + eps with eps ~ CN(0, mean|H|^2 / rho) i.i.d. per entry.
 * rho = +inf returns H unchanged.
 */
inline CMatrix inject_estimation_error(const CMatrix& h, double rho, Rng& rng) {
    if (!(rho > 0.0)) throw InvalidArgument("inject_estimation_error: SNR must be > 0");
    CMatrix out = h;
    if (std::isinf(rho)) return out;
    const double variance = h.size() == 0 ? 0.0 : h.cwiseAbs2().mean() / rho;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) += rng.complex_normal(variance);
    }
    return out;
}

}  // namespace ddswitch
