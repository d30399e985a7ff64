#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

#include "ddswitch/classifier.hpp"
#include "ddswitch/dataset.hpp"

namespace ddswitch {

enum class Waveform : std::uint8_t { Otfs = 0, Ofdm = 1 };

inline const char* waveform_name(Waveform w) { return w == Waveform::Otfs ? "OTFS" : "OFDM"; }

struct IntervalResult {
    Waveform chosen = Waveform::Ofdm;
    double realized = 0.0;  // MSE of the chosen chain on the true channel
    double oracle = 0.0;    // min of the pair
    double regret = 0.0;    // realized - oracle
    double mse_otfs = 0.0;
    double mse_ofdm = 0.0;
    double rho_db = 0.0;
    unsigned qam = 0;
    std::uint8_t model_id = 0;
    std::uint64_t seed = 0;

    bool operator==(const IntervalResult&) const = default;
};

inline IntervalResult make_result(std::uint8_t decision, double mse_otfs, double mse_ofdm, double rho_db, unsigned qam,
                                  std::uint8_t model, std::uint64_t seed) {
    IntervalResult r;
    r.chosen = decision == 0 ? Waveform::Otfs : Waveform::Ofdm;
    r.mse_otfs = mse_otfs;
    r.mse_ofdm = mse_ofdm;
    r.realized = r.chosen == Waveform::Otfs ? mse_otfs : mse_ofdm;
    r.oracle = std::min(mse_otfs, mse_ofdm);
    r.regret = r.realized - r.oracle;
    r.rho_db = rho_db;
    r.qam = qam;
    r.model_id = model;
    r.seed = seed;
    return r;
}

/**
 * Training mode: both chains run on every coherence interval (interleaved
 * frames see the same channel realization) and each interval becomes a
 * labelled sample.
 */
inline std::vector<Sample> run_training_mode(const ScenarioConfig& cfg, std::size_t count, std::uint64_t master_seed,
                                             std::uint64_t first_index = 0) {
    return generate_dataset(cfg, count, master_seed, first_index);
}

/**
 * Realization mode: per interval the decider sees only the channel-estimate
 * image, SNR and QAM order. The realized MSE is the true-channel MSE of the
 * chain it picked.
 */
inline std::vector<IntervalResult> run_realization_mode(const Decider& decide, const ScenarioConfig& cfg,
                                                        std::size_t count, std::uint64_t master_seed,
                                                        std::uint64_t first_index = 0) {
    if (count == 0) throw InvalidArgument("run_realization_mode: count must be >= 1");
    cfg.validate();
    std::vector<IntervalResult> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t seed = derive_seed(master_seed, first_index + i);
        const IntervalDraw draw = draw_interval(cfg, seed);
        const IntervalOutcome o = simulate_interval(cfg, draw);
        const std::uint8_t decision = decide(DecisionInput{o.sample.image, o.sample.rho_db, o.sample.qam});
        out.push_back(make_result(decision, o.pair.otfs, o.pair.ofdm, draw.rho_db, draw.qam, o.sample.model_id, seed));
    }
    return out;
}

inline std::vector<IntervalResult> run_realization_mode(const ClassifierModel& model, const ScenarioConfig& cfg,
                                                        std::size_t count, std::uint64_t master_seed,
                                                        std::uint64_t first_index = 0) {
    return run_realization_mode(model_decider(model), cfg, count, master_seed, first_index);
}

/// Replays stored samples (e.g. a test split) through a decider, using their stored MSE pairs.
inline std::vector<IntervalResult> realize_on_samples(const Decider& decide, const std::vector<Sample>& samples) {
    std::vector<IntervalResult> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        const std::uint8_t decision = decide(DecisionInput{s.image, s.rho_db, s.qam});
        out.push_back(make_result(decision, s.mse_otfs, s.mse_ofdm, s.rho_db, s.qam, s.model_id, s.seed));
    }
    return out;
}

struct PolicyStats {
    double mean_mse = 0.0;
    double mean_regret = 0.0;
};

struct SnrBreakdown {
    std::size_t count = 0;
    PolicyStats switched, always_otfs, always_ofdm, oracle;
    double chosen_fraction_otfs = 0.0;
};

struct PolicyReport {
    std::size_t count = 0;
    PolicyStats switched, always_otfs, always_ofdm, oracle;
    double agreement = 0.0;  // fraction of intervals where the switched choice attains the oracle MSE
    double chosen_fraction_otfs = 0.0;
    std::map<double, SnrBreakdown> per_snr;
    bool oracle_dominates = true;
};

/// Order-independent mean: values are summed in ascending order.
inline double sorted_mean(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

namespace detail {

struct PolicyColumns {
    std::vector<double> sw, otfs, ofdm, orc, sw_reg, otfs_reg, ofdm_reg;
    std::size_t otfs_chosen = 0;
    std::size_t agree = 0;

    void add(const IntervalResult& r) {
        sw.push_back(r.realized);
        otfs.push_back(r.mse_otfs);
        ofdm.push_back(r.mse_ofdm);
        orc.push_back(r.oracle);
        sw_reg.push_back(r.regret);
        otfs_reg.push_back(r.mse_otfs - r.oracle);
        ofdm_reg.push_back(r.mse_ofdm - r.oracle);
        otfs_chosen += r.chosen == Waveform::Otfs;
        agree += r.regret == 0.0;
    }

    template <typename Out>
    void fill(Out& out) const {
        out.switched = {sorted_mean(sw), sorted_mean(sw_reg)};
        out.always_otfs = {sorted_mean(otfs), sorted_mean(otfs_reg)};
        out.always_ofdm = {sorted_mean(ofdm), sorted_mean(ofdm_reg)};
        out.oracle = {sorted_mean(orc), 0.0};
        out.chosen_fraction_otfs = static_cast<double>(otfs_chosen) / static_cast<double>(sw.size());
    }
};

}  // namespace detail

inline PolicyReport compare_policies(const std::vector<IntervalResult>& results) {
    if (results.empty()) throw InvalidArgument("compare_policies: no intervals");
    PolicyReport rep;
    detail::PolicyColumns all;
    std::map<double, detail::PolicyColumns> by_snr;
    for (const auto& r : results) {
        all.add(r);
        by_snr[r.rho_db].add(r);
    }
    rep.count = results.size();
    all.fill(rep);
    rep.agreement = static_cast<double>(all.agree) / static_cast<double>(results.size());
    for (const auto& [snr, cols] : by_snr) {
        SnrBreakdown b;
        b.count = cols.sw.size();
        cols.fill(b);
        rep.per_snr[snr] = b;
    }
    const double o = rep.oracle.mean_mse;
    rep.oracle_dominates = o <= rep.switched.mean_mse && o <= rep.always_otfs.mean_mse && o <= rep.always_ofdm.mean_mse;
    return rep;
}

}  // namespace ddswitch
