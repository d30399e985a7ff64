// Minimal library walk-through: one EVA draw at 250 km/h, MSE of both
// waveforms across SNR, and the choice an oracle switch would make.
#include <cstdio>

#include "ddswitch/ddswitch.hpp"

int main() {
    using namespace ddswitch;
    const GridConfig grid = GridConfig::stock();
    const ModelSpec eva = stock_eva().with_speed(250.0).with_carrier(grid.fc);

    Rng rng(2024);
    const PathSet paths = draw_pathset(eva, rng);
    std::printf("EVA @ %.0f km/h, nu_max = %.1f Hz, %zu paths\n", eva.v_max_kmh, eva.max_doppler(), paths.size());

    const PairEvaluator ev(paths, grid);
    std::printf("%8s %14s %14s  %s\n", "snr_db", "mse_otfs", "mse_ofdm", "pick");
    for (double snr : stock_snr_set_db()) {
        const MsePair p = ev.evaluate(db_to_linear(snr), 64);
        std::printf("%8.0f %14.6e %14.6e  %s\n", snr, p.otfs, p.ofdm, label_sample(p.otfs, p.ofdm) == 0 ? "OTFS" : "OFDM");
    }
    return 0;
}
