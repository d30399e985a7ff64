#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddswitch/channel.hpp"
#include "ddswitch/core.hpp"
#include "ddswitch/grid.hpp"
#include "ddswitch/rng.hpp"

namespace ddswitch {

/**
 * Multipath model family. Relative tap powers come from the 3GPP extended
 * models (EPA/EVA/ETU); delays are redrawn per realization around tau_rms
 * unless `delays` overrides them.
 */
struct ModelSpec {
    std::string name;
    std::vector<double> powers_db;
    double tau_rms = 0.0;  // [s]
    double tau_max = 0.0;  // [s]
    double v_max_kmh = 0.0;
    double fc = 4e9;       // [Hz]
    std::optional<std::vector<double>> delays;  // [s]

    std::size_t path_count() const { return powers_db.size(); }

    ModelSpec with_speed(double kmh) const {
        ModelSpec s = *this;
        s.v_max_kmh = kmh;
        s.validate();
        return s;
    }

    ModelSpec with_carrier(double hz) const {
        ModelSpec s = *this;
        s.fc = hz;
        s.validate();
        return s;
    }

    /// nu_max = v fc / c
    double max_doppler() const { return (v_max_kmh / 3.6) * fc / kSpeedOfLight; }

    void validate() const {
        if (name.empty()) throw InvalidArgument("ModelSpec: empty name");
        if (powers_db.empty()) throw InvalidArgument("ModelSpec " + name + ": no paths");
        for (double p : powers_db) {
            if (!std::isfinite(p)) throw InvalidArgument("ModelSpec " + name + ": non-finite power");
        }
        if (!(tau_max >= 0.0) || !(tau_rms >= 0.0)) throw InvalidArgument("ModelSpec " + name + ": negative delay");
        if (!delays && !(tau_rms < tau_max)) {
            throw InvalidArgument("ModelSpec " + name + ": tau_rms must be below tau_max");
        }
        if (delays) {
            if (delays->size() != powers_db.size()) {
                throw InvalidArgument("ModelSpec " + name + ": delays and powers differ in length");
            }
            for (double d : *delays) {
                if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidArgument("ModelSpec " + name + ": bad delay");
            }
        }
        if (!(v_max_kmh >= 0.0) || !std::isfinite(v_max_kmh)) throw InvalidArgument("ModelSpec " + name + ": bad speed");
        if (!(fc >= 0.0) || !std::isfinite(fc)) throw InvalidArgument("ModelSpec " + name + ": bad carrier");
    }
};

// Stock families. Tap powers: 3GPP TS 36.104 Annex B.2 (external standard data);
// maximum delays follow the 300 / 2510 / 2300 ns spreads used for EPA / EVA / ETU.

inline ModelSpec stock_epa() {
    return {"EPA", {0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8}, 43e-9, 300e-9, 10.0, 4e9, std::nullopt};
}

inline ModelSpec stock_eva() {
    return {"EVA", {0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9}, 357e-9, 2510e-9, 250.0, 4e9, std::nullopt};
}

inline ModelSpec stock_etu() {
    return {"ETU", {-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0}, 991e-9, 2300e-9, 150.0, 4e9, std::nullopt};
}

inline std::string to_upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    return s;
}

inline ModelSpec stock_model(const std::string& name) {
    const std::string key = to_upper(name);
    if (key == "EPA") return stock_epa();
    if (key == "EVA") return stock_eva();
    if (key == "ETU") return stock_etu();
    throw InvalidArgument("unknown channel model '" + name + "' (expected EPA, EVA or ETU)");
}

/// Stable small id used in the dataset file.
inline std::uint8_t model_id(const std::string& name) {
    const std::string key = to_upper(name);
    if (key == "EPA") return 0;
    if (key == "EVA") return 1;
    if (key == "ETU") return 2;
    return 255;
}

inline std::string model_name_from_id(std::uint8_t id) {
    switch (id) {
        case 0: return "EPA";
        case 1: return "EVA";
        case 2: return "ETU";
        default: return "CUSTOM";
    }
}

// Model files: {"name", "powers_db", "tau_rms_ns", "tau_max_ns", "delays_ns"?, "v_max_kmh"?, "fc_hz"?}

inline nlohmann::json model_spec_to_json(const ModelSpec& s) {
    nlohmann::json j;
    j["name"] = s.name;
    j["powers_db"] = s.powers_db;
    j["tau_rms_ns"] = s.tau_rms * 1e9;
    j["tau_max_ns"] = s.tau_max * 1e9;
    j["v_max_kmh"] = s.v_max_kmh;
    j["fc_hz"] = s.fc;
    if (s.delays) {
        std::vector<double> ns;
        for (double d : *s.delays) ns.push_back(d * 1e9);
        j["delays_ns"] = ns;
    }
    return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    try {
        s.name = j.at("name").get<std::string>();
        s.powers_db = j.at("powers_db").get<std::vector<double>>();
        s.tau_rms = j.at("tau_rms_ns").get<double>() * 1e-9;
        s.tau_max = j.at("tau_max_ns").get<double>() * 1e-9;
        s.v_max_kmh = j.value("v_max_kmh", 0.0);
        s.fc = j.value("fc_hz", 4e9);
        if (j.contains("delays_ns")) {
            std::vector<double> d = j.at("delays_ns").get<std::vector<double>>();
            for (double& x : d) x *= 1e-9;
            s.delays = std::move(d);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("model spec: ") + e.what());
    }
    s.validate();
    return s;
}

inline ModelSpec load_model_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open model spec file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("model spec '" + path + "': " + e.what());
    }
    return model_spec_from_json(j);
}

/// Gaussian around tau_rms with sigma = (tau_max - tau_rms) / 3, clamped to [0, tau_max]; path 0 at delay 0.
inline std::vector<double> draw_delays(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    if (spec.delays) return *spec.delays;
    const double sigma = (spec.tau_max - spec.tau_rms) / 3.0;
    std::vector<double> out(spec.path_count());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double d = rng.normal(spec.tau_rms, sigma);
        out[k] = k == 0 ? 0.0 : std::clamp(d, 0.0, spec.tau_max);
    }
    return out;
}

/// nu_i = nu_max cos(theta_i), theta_i ~ U[0, pi].
inline std::vector<double> draw_dopplers(const ModelSpec& spec, Rng& rng, std::size_t count) {
    const double nu_max = spec.max_doppler();
    std::vector<double> out(count);
    for (auto& nu : out) nu = nu_max * std::cos(rng.uniform(0.0, kPi));
    return out;
}

inline PathSet draw_pathset(const ModelSpec& spec, Rng& rng) {
    const std::vector<double> delays = draw_delays(spec, rng);
    const std::vector<double> dopplers = draw_dopplers(spec, rng, spec.path_count());
    PathSet ps;
    ps.paths.resize(spec.path_count());
    double power = 0.0;
    for (std::size_t k = 0; k < ps.paths.size(); ++k) {
        const double amp = std::pow(10.0, spec.powers_db[k] / 20.0);
        ps.paths[k] = Path{amp * unit_phasor(rng.uniform(0.0, kTwoPi)), delays[k], dopplers[k]};
        power += amp * amp;
    }
    const double scale = 1.0 / std::sqrt(power);
    for (auto& p : ps.paths) p.gain *= scale;
    ps.normalized = true;
    ps.validate();
    return ps;
}

inline std::vector<double> stock_snr_set_db() { return {-20, -15, -10, -5, 0, 5, 10, 15, 20, 25, 30}; }
inline std::vector<unsigned> stock_qam_set() { return {4, 16, 64, 256, 1024}; }
inline std::vector<double> stock_speeds_kmh() { return {10, 20, 150, 200, 250}; }

/// What a dataset or sweep draws from: model families, speeds, SNRs, QAM orders on one grid.
struct ScenarioConfig {
    std::vector<ModelSpec> models;
    std::vector<double> speeds_kmh;
    std::vector<double> snr_set_db;
    std::vector<unsigned> qam_set;
    GridConfig grid;

    static ScenarioConfig stock() {
        return {{stock_epa(), stock_eva(), stock_etu()}, stock_speeds_kmh(), stock_snr_set_db(), stock_qam_set(),
                GridConfig::stock()};
    }

    void validate() const {
        grid.validate();
        if (models.empty()) throw InvalidArgument("scenario: no channel models");
        if (speeds_kmh.empty()) throw InvalidArgument("scenario: no speeds");
        if (snr_set_db.empty()) throw InvalidArgument("scenario: no SNR points");
        if (qam_set.empty()) throw InvalidArgument("scenario: no QAM orders");
        for (const auto& m : models) m.validate();
        for (double v : speeds_kmh) {
            if (!(v >= 0.0)) throw InvalidArgument("scenario: negative speed");
        }
        for (unsigned q : qam_set) {
            if (q != 4 && q != 16 && q != 64 && q != 256 && q != 1024) {
                throw InvalidArgument("scenario: unsupported QAM order " + std::to_string(q));
            }
        }
    }
};

}  // namespace ddswitch
