#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "ddswitch/core.hpp"

namespace ddswitch {

/**
 * Geometry of one OTFS/OFDM burst: N symbols of duration T0 on M subcarriers
 * spaced F0 apart, with T0 * F0 = 1 and bandwidth B = M * F0. The burst is
 * critically sampled at rate B, giving N*M complex samples.
 */
struct GridConfig {
    std::size_t N = 1;   // Doppler bins / OFDM symbols
    std::size_t M = 1;   // delay bins / subcarriers
    double T0 = 1.0;     // symbol duration [s]
    double F0 = 1.0;     // subcarrier spacing [Hz]
    double fc = 0.0;     // carrier [Hz]
    double B = 1.0;      // bandwidth [Hz]

    /// Grid with F0 = 1/T0 and B = M F0 derived from the symbol duration.
    static GridConfig from_symbol_duration(std::size_t n, std::size_t m, double t0, double carrier) {
        GridConfig g;
        g.N = n;
        g.M = m;
        g.T0 = t0;
        g.F0 = 1.0 / t0;
        g.fc = carrier;
        g.B = static_cast<double>(m) * g.F0;
        g.validate();
        return g;
    }

    /// 9 x 135 grid, 9 us symbols, 15 MHz at 4 GHz.
    static GridConfig stock() { return from_symbol_duration(9, 135, 9e-6, 4e9); }

    /// Unit-time grid for tests where only the dimensions matter.
    static GridConfig unit(std::size_t n, std::size_t m) { return from_symbol_duration(n, m, 1.0, 0.0); }

    std::size_t size() const { return N * M; }
    double doppler_resolution() const { return 1.0 / (static_cast<double>(N) * T0); }
    double delay_resolution() const { return 1.0 / (static_cast<double>(M) * F0); }
    double sample_period() const { return T0 / static_cast<double>(M); }

    void validate() const {
        if (N == 0 || M == 0) throw InvalidDimension("GridConfig: N and M must be >= 1");
        if (!(T0 > 0.0) || !(F0 > 0.0) || !(B > 0.0)) {
            throw InvalidArgument("GridConfig: T0, F0 and B must be positive");
        }
        if (std::abs(T0 * F0 - 1.0) > 1e-12) throw InvalidArgument("GridConfig: T0 * F0 must equal 1");
        const double expected_b = static_cast<double>(M) * F0;
        if (std::abs(B - expected_b) > 1e-12 * expected_b) {
            throw InvalidArgument("GridConfig: B must equal M * F0");
        }
        if (!(fc >= 0.0)) throw InvalidArgument("GridConfig: carrier frequency must be >= 0");
    }

    bool operator==(const GridConfig&) const = default;
};

}  // namespace ddswitch
