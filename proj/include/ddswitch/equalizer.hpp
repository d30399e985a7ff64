#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "ddswitch/channel.hpp"
#include "ddswitch/core.hpp"
#include "ddswitch/linalg.hpp"
#include "ddswitch/rng.hpp"

namespace ddswitch {

inline bool is_supported_qam_order(unsigned order) {
    return order == 4 || order == 16 || order == 64 || order == 256 || order == 1024;
}

/// Square Gray-coded QAM with unit average power. points[label] is the symbol for that bit label.
struct QamConstellation {
    unsigned order = 0;
    std::vector<cplx> points;

    unsigned bits_per_symbol() const { return static_cast<unsigned>(std::countr_zero(order)); }
};

inline QamConstellation qam_constellation(unsigned order) {
    if (!is_supported_qam_order(order)) throw InvalidArgument("qam_constellation: unsupported order");
    const unsigned side = 1u << (std::countr_zero(order) / 2);
    const unsigned axis_bits = static_cast<unsigned>(std::countr_zero(side));
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(side) * side - 1.0) / 3.0);
    QamConstellation c;
    c.order = order;
    c.points.resize(order);
    for (unsigned i = 0; i < side; ++i) {
        for (unsigned q = 0; q < side; ++q) {
            const unsigned label = ((i ^ (i >> 1)) << axis_bits) | (q ^ (q >> 1));
            const double re = 2.0 * i - side + 1.0;
            const double im = 2.0 * q - side + 1.0;
            c.points[label] = scale * cplx(re, im);
        }
    }
    return c;
}

/// W = (H H^H + lambda I)^-1 H through a Hermitian positive definite solve.
inline CMatrix mmse_combiner(const CMatrix& h, double lambda) {
    if (h.rows() != h.cols()) throw InvalidDimension("mmse_combiner: H must be square");
    if (!(lambda >= 0.0)) throw InvalidArgument("mmse_combiner: lambda must be >= 0");
    const Eigen::Index n = h.rows();
    CMatrix a = h * h.adjoint();
    a.diagonal().array() += lambda;
    Eigen::LLT<CMatrix> llt(a);
    const double scale = std::max(a.diagonal().real().maxCoeff(), 1e-300);
    const double pivot_floor = static_cast<double>(n) * 1e-14 * scale;
    if (llt.info() != Eigen::Success ||
        (n > 0 && llt.matrixLLT().diagonal().real().cwiseAbs2().minCoeff() <= pivot_floor)) {
        throw SingularMatrix("mmse_combiner: H H^H + lambda I is singular");
    }
    return llt.solve(h);
}

/// Per-symbol MMSE error for unit-power inputs: (1/n) sum_i sigma2 / (sigma2 + s_i^2).
inline double analytic_mse(const CMatrix& h, double noise_power) {
    if (h.rows() != h.cols()) throw InvalidDimension("analytic_mse: H must be square");
    if (!(noise_power > 0.0)) throw InvalidArgument("analytic_mse: noise power must be > 0");
    if (h.rows() == 0) throw InvalidDimension("analytic_mse: empty matrix");
    const RVector s = Eigen::BDCSVD<CMatrix>(h).singularValues();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) acc += noise_power / (noise_power + s(i) * s(i));
    return acc / static_cast<double>(h.rows());
}

/// Same quantity for a circular tap operator, O(n b^2) through the folded Gram band.
inline double analytic_mse(const TapOperator& op, double noise_power) {
    if (!(noise_power > 0.0)) throw InvalidArgument("analytic_mse: noise power must be > 0");
    if (op.size == 0) throw InvalidDimension("analytic_mse: empty operator");
    return noise_power * band_trace_inverse(op.folded_gram(), noise_power) / static_cast<double>(op.size);
}

struct MonteCarloMse {
    double mse = 0.0;
    double std_error = 0.0;  // of the mean, from the per-trial spread
};

/**
 * Empirical E|z - x|^2 / n with x uniform over the constellation,
 * y = H x + CN(0, sigma2 I) and z = W^H y, W = mmse_combiner(H, sigma2).
 */
inline MonteCarloMse monte_carlo_mse(const CMatrix& h, const QamConstellation& c, double noise_power,
                                     std::size_t trials, Rng& rng) {
    if (h.rows() != h.cols()) throw InvalidDimension("monte_carlo_mse: H must be square");
    if (trials == 0) throw InvalidArgument("monte_carlo_mse: trials must be >= 1");
    if (!(noise_power > 0.0)) throw InvalidArgument("monte_carlo_mse: noise power must be > 0");
    const Eigen::Index n = h.rows();
    const CMatrix wh = mmse_combiner(h, noise_power).adjoint();
    constexpr std::size_t kBatch = 512;
    double sum = 0.0;
    double sum_sq = 0.0;
    CMatrix x(n, static_cast<Eigen::Index>(kBatch));
    CMatrix y(n, static_cast<Eigen::Index>(kBatch));
    for (std::size_t done = 0; done < trials; done += kBatch) {
        const auto cols = static_cast<Eigen::Index>(std::min(kBatch, trials - done));
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) x(i, j) = c.points[rng.below(c.order)];
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) y(i, j) = rng.complex_normal(noise_power);
        }
        y.leftCols(cols).noalias() += h * x.leftCols(cols);
        const CMatrix err = wh * y.leftCols(cols) - x.leftCols(cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double e = err.col(j).squaredNorm() / static_cast<double>(n);
            sum += e;
            sum_sq += e * e;
        }
    }
    const auto t = static_cast<double>(trials);
    MonteCarloMse out;
    out.mse = sum / t;
    const double var = trials > 1 ? std::max(0.0, (sum_sq - t * out.mse * out.mse) / (t - 1.0)) : 0.0;
    out.std_error = std::sqrt(var / t);
    return out;
}

struct MsePair {
    double otfs = 0.0;
    double ofdm = 0.0;
    double rho = 0.0;    // linear SNR, p / sigma_n^2 with p = 1
    unsigned qam = 0;

    bool operator==(const MsePair&) const = default;
};

enum class OfdmMode {
    PerSymbolCp,  // N independent circular blocks (ideal cyclic prefix)
    FullBurst,    // U_tf^H H_time U_tf without SFFT precoding
};

/// Reference route over the dense operators of an EffectiveChannel.
inline MsePair evaluate_pair(const EffectiveChannel& eff, double rho, unsigned qam,
                             OfdmMode mode = OfdmMode::PerSymbolCp) {
    if (!(rho > 0.0)) throw InvalidArgument("evaluate_pair: SNR must be > 0");
    if (!is_supported_qam_order(qam)) throw InvalidArgument("evaluate_pair: unsupported QAM order");
    const double sigma2 = 1.0 / rho;
    MsePair out;
    out.rho = rho;
    out.qam = qam;
    out.otfs = analytic_mse(eff.H_dd, sigma2);
    if (mode == OfdmMode::FullBurst) {
        out.ofdm = analytic_mse(eff.H_tf_mat, sigma2);
    } else {
        double acc = 0.0;
        for (const auto& block : eff.ofdm_blocks) acc += analytic_mse(block, sigma2);
        out.ofdm = acc / static_cast<double>(eff.ofdm_blocks.size());
    }
    return out;
}

/**
 * Structured MSE evaluator for one channel realization.
 *
 * The DD operator is unitarily similar to the burst-circular time operator and
 * each OFDM block to its per-symbol circular operator, and the MMSE error only
 * depends on singular values. So both MSEs come from the sparse time-domain
 * operators; the Gram bands are built once and reused for every noise level.
 */
class PairEvaluator {
public:
    PairEvaluator(const PathSet& paths, const GridConfig& grid, OfdmMode mode = OfdmMode::PerSymbolCp)
        : burst_size_(grid.size()), mode_(mode), burst_gram_(burst_tap_operator(paths, grid).folded_gram()) {
        if (mode_ == OfdmMode::PerSymbolCp) {
            symbol_size_ = grid.M;
            symbol_grams_.reserve(grid.N);
            for (std::size_t n = 0; n < grid.N; ++n) {
                symbol_grams_.push_back(symbol_tap_operator(paths, grid, n).folded_gram());
            }
        }
    }

    double otfs(double noise_power) const {
        check_noise(noise_power);
        return noise_power * band_trace_inverse(burst_gram_, noise_power) / static_cast<double>(burst_size_);
    }

    double ofdm(double noise_power) const {
        if (mode_ == OfdmMode::FullBurst) return otfs(noise_power);
        check_noise(noise_power);
        double acc = 0.0;
        for (const auto& g : symbol_grams_) {
            acc += noise_power * band_trace_inverse(g, noise_power) / static_cast<double>(symbol_size_);
        }
        return acc / static_cast<double>(symbol_grams_.size());
    }

    MsePair evaluate(double rho, unsigned qam) const {
        if (!(rho > 0.0)) throw InvalidArgument("evaluate_pair: SNR must be > 0");
        if (!is_supported_qam_order(qam)) throw InvalidArgument("evaluate_pair: unsupported QAM order");
        return MsePair{otfs(1.0 / rho), ofdm(1.0 / rho), rho, qam};
    }

private:
    static void check_noise(double noise_power) {
        if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be > 0");
    }

    std::size_t burst_size_;
    std::size_t symbol_size_ = 0;
    OfdmMode mode_;
    HermitianBand burst_gram_;
    std::vector<HermitianBand> symbol_grams_;
};

inline MsePair evaluate_pair(const PathSet& paths, const GridConfig& grid, double rho, unsigned qam,
                             OfdmMode mode = OfdmMode::PerSymbolCp) {
    return PairEvaluator(paths, grid, mode).evaluate(rho, qam);
}

}  // namespace ddswitch
