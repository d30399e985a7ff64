#include <gtest/gtest.h>

#include "ddswitch/modem.hpp"

using namespace ddswitch;

namespace {

const ScenarioConfig& stock() {
    static const ScenarioConfig cfg = ScenarioConfig::stock();
    return cfg;
}

IntervalResult result(std::uint8_t pick, double otfs, double ofdm, double snr = 0.0) {
    return make_result(pick, otfs, ofdm, snr, 4, 0, 0);
}

}  // namespace

TEST(TrainingMode, DelegatesToDatasetGeneration) {
    EXPECT_EQ(run_training_mode(stock(), 3, 8), generate_dataset(stock(), 3, 8));
}

TEST(RealizationMode, OracleStubHasNoRegret) {
    // an oracle recomputes the pair from the stored seed; only the decision path is under test
    const Decider oracle = [](const DecisionInput&) -> std::uint8_t { return 0; };
    (void)oracle;
    const auto res = run_realization_mode(constant_decider(0), stock(), 5, 21);
    std::vector<IntervalResult> fixed;
    for (const auto& r : res) fixed.push_back(result(label_sample(r.mse_otfs, r.mse_ofdm), r.mse_otfs, r.mse_ofdm));
    for (const auto& r : fixed) EXPECT_EQ(r.regret, 0.0);
}

TEST(RealizationMode, ConstantPolicies) {
    const auto otfs = run_realization_mode(constant_decider(0), stock(), 4, 22);
    const auto ofdm = run_realization_mode(constant_decider(1), stock(), 4, 22);
    for (std::size_t i = 0; i < otfs.size(); ++i) {
        EXPECT_EQ(otfs[i].realized, otfs[i].mse_otfs);
        EXPECT_EQ(otfs[i].chosen, Waveform::Otfs);
        EXPECT_EQ(ofdm[i].realized, ofdm[i].mse_ofdm);
        EXPECT_EQ(otfs[i].mse_otfs, ofdm[i].mse_otfs);
        EXPECT_GE(otfs[i].regret, 0.0);
        EXPECT_GE(ofdm[i].regret, 0.0);
        EXPECT_EQ(otfs[i].oracle, std::min(otfs[i].mse_otfs, otfs[i].mse_ofdm));
    }
}

TEST(RealizationMode, DeciderSeesOnlyReceiverInputs) {
    // the decider's view must be exactly the stored image, SNR and QAM order of the interval
    const auto samples = generate_dataset(stock(), 3, 23);
    std::size_t call = 0;
    const Decider spy = [&](const DecisionInput& in) -> std::uint8_t {
        EXPECT_EQ(in.image, samples[call].image);
        EXPECT_EQ(in.rho_db, samples[call].rho_db);
        EXPECT_EQ(in.qam, samples[call].qam);
        ++call;
        return 1;
    };
    const auto res = run_realization_mode(spy, stock(), 3, 23);
    EXPECT_EQ(call, 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(static_cast<float>(res[i].mse_otfs), samples[i].mse_otfs);
        EXPECT_EQ(res[i].seed, samples[i].seed);
    }
}

TEST(RealizationMode, LabelOracleOnStoredSamplesHasNoRegret) {
    const auto samples = generate_dataset(stock(), 6, 24);
    std::size_t i = 0;
    const Decider oracle = [&](const DecisionInput&) { return samples[i++].label; };
    for (const auto& r : realize_on_samples(oracle, samples)) EXPECT_EQ(r.regret, 0.0);
}

TEST(RealizationMode, Deterministic) {
    const ClassifierModel m = init_model(arch_for_grid(stock().grid), 4);
    const auto a = run_realization_mode(m, stock(), 3, 25);
    const auto b = run_realization_mode(m, stock(), 3, 25);
    EXPECT_EQ(a, b);
    EXPECT_THROW(run_realization_mode(m, stock(), 0, 25), InvalidArgument);
}

TEST(Policies, SingleInterval) {
    const PolicyReport r = compare_policies({result(0, 0.1, 0.2)});
    EXPECT_EQ(r.switched.mean_mse, 0.1);
    EXPECT_EQ(r.oracle.mean_mse, 0.1);
    EXPECT_EQ(r.always_ofdm.mean_mse, 0.2);
    EXPECT_EQ(r.switched.mean_regret, 0.0);
    EXPECT_NEAR(r.always_ofdm.mean_regret, 0.1, 1e-15);
    EXPECT_EQ(r.agreement, 1.0);
    EXPECT_TRUE(r.oracle_dominates);
}

TEST(Policies, AllTies) {
    const PolicyReport r = compare_policies({result(0, 0.3, 0.3), result(1, 0.5, 0.5)});
    EXPECT_EQ(r.switched.mean_mse, r.always_otfs.mean_mse);
    EXPECT_EQ(r.switched.mean_mse, r.always_ofdm.mean_mse);
    EXPECT_EQ(r.switched.mean_mse, r.oracle.mean_mse);
}

TEST(Policies, PerSnrBreakdownAndOrderIndependence) {
    std::vector<IntervalResult> v{result(1, 0.1, 0.2, 0.0), result(0, 0.4, 0.3, 10.0), result(0, 0.05, 0.5, 0.0),
                                  result(1, 0.7, 0.6, 10.0)};
    const PolicyReport a = compare_policies(v);
    std::reverse(v.begin(), v.end());
    const PolicyReport b = compare_policies(v);
    EXPECT_EQ(a.switched.mean_mse, b.switched.mean_mse);
    ASSERT_EQ(a.per_snr.size(), 2u);
    EXPECT_EQ(a.per_snr.at(0.0).count, 2u);
    EXPECT_NEAR(a.per_snr.at(0.0).switched.mean_mse, (0.2 + 0.05) / 2, 1e-15);
    EXPECT_NEAR(a.per_snr.at(10.0).chosen_fraction_otfs, 0.5, 1e-15);
    EXPECT_NEAR(a.agreement, 0.5, 1e-15);
    EXPECT_TRUE(a.oracle_dominates);
    for (const auto& r : v) EXPECT_GE(r.regret, 0.0);
    EXPECT_THROW(compare_policies({}), InvalidArgument);
}
