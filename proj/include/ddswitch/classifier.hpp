#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ddswitch/cnn.hpp"
#include "ddswitch/core.hpp"
#include "ddswitch/dataset.hpp"
#include "ddswitch/rng.hpp"

namespace ddswitch {

using ClassifierModel = nn::Model<float>;
using nn::ArchConfig;

/// Architecture matching an N x M grid: one input plane of (N + 1) x M.
inline ArchConfig arch_for_grid(const GridConfig& grid, std::size_t residual_blocks = 1) {
    ArchConfig a;
    a.height = grid.N + 1;
    a.width = grid.M;
    a.residual_blocks = residual_blocks;
    return a;
}

inline ClassifierModel init_model(const ArchConfig& arch, std::uint64_t seed,
                                  nn::InitMode mode = nn::InitMode::FanInUniform) {
    return nn::init_model<float>(arch, seed, mode);
}

struct Prediction {
    std::uint8_t label = 0;
    float probability = 0.0f;  // of the chosen label
    std::array<float, 2> probs{};
};

inline void check_image(const ArchConfig& a, const Image& img) {
    if (img.rows != a.height || img.cols != a.width || a.in_channels != 1) {
        throw InvalidDimension("predict: image is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                               ", model expects " + std::to_string(a.height) + "x" + std::to_string(a.width));
    }
}

inline Prediction predict(const ClassifierModel& model, const Image& img, nn::Workspace<float>& ws) {
    check_image(model.arch, img);
    const auto& probs = nn::forward<float, float>(model, img.pixels, ws);
    Prediction out;
    out.probs = probs;
    out.label = probs[1] > probs[0] ? 1 : 0;
    out.probability = probs[out.label];
    return out;
}

inline Prediction predict(const ClassifierModel& model, const Image& img) {
    nn::Workspace<float> ws;
    return predict(model, img, ws);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 7;
    double validation_fraction = 0.0;

    void validate() const {
        if (epochs == 0 || batch_size == 0) throw InvalidArgument("TrainConfig: epochs and batch size must be >= 1");
        if (!(learning_rate > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0) ||
            !(epsilon > 0.0)) {
            throw InvalidArgument("TrainConfig: optimizer hyperparameters out of range");
        }
        if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
            throw InvalidArgument("TrainConfig: validation fraction must be in [0, 1)");
        }
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;          // mean cross-entropy over the epoch's training passes
    double accuracy = 0.0;      // training accuracy during the epoch
    double val_accuracy = -1.0;  // -1 when no validation split
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

/// Adam state over a flat parameter vector.
class AdamOptimizer {
public:
    AdamOptimizer(std::size_t size, const TrainConfig& cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

    void step(std::vector<float>& params, std::span<const double> grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] -= static_cast<float>(cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon));
        }
    }

private:
    TrainConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

inline void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

struct TrainResult {
    ClassifierModel model;
    std::vector<EpochStats> history;
};

inline double accuracy_on(const ClassifierModel& model, const std::vector<Sample>& samples,
                          const std::vector<std::size_t>& subset) {
    if (subset.empty()) return -1.0;
    nn::Workspace<float> ws;
    std::size_t hits = 0;
    for (std::size_t i : subset) hits += predict(model, samples[i].image, ws).label == samples[i].label;
    return static_cast<double>(hits) / static_cast<double>(subset.size());
}

/**
 * Mini-batch Adam on mean cross-entropy. Single-threaded, so the result is a
 * pure function of (model, samples, cfg). `on_epoch` sees each epoch's stats.
 */
inline TrainResult train(ClassifierModel model, const std::vector<Sample>& samples, const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = {}) {
    cfg.validate();
    if (samples.empty()) throw InvalidArgument("train: empty training set");
    for (const auto& s : samples) check_image(model.arch, s.image);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> val;
    if (cfg.validation_fraction > 0.0) {
        shuffle_indices(order, rng);
        const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
        if (n_val >= order.size()) throw InvalidArgument("train: validation split leaves no training data");
        val.assign(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
        order.resize(order.size() - n_val);
    }

    const std::size_t n_params = model.params.size();
    AdamOptimizer adam(n_params, cfg);
    nn::Workspace<float> ws;
    std::vector<float> grad_f(n_params);
    std::vector<double> grad(n_params);
    TrainResult result;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, rng);
        double loss_sum = 0.0;
        std::size_t hits = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const float inv = 1.0f / static_cast<float>(end - start);
            std::fill(grad_f.begin(), grad_f.end(), 0.0f);
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = samples[order[b]];
                const auto& probs = nn::forward<float, float>(model, s.image.pixels, ws);
                const double loss = nn::cross_entropy(ws, s.label);
                if (!std::isfinite(loss)) {
                    std::ostringstream msg;
                    msg << "train: non-finite loss at epoch " << epoch << ", sample " << order[b] << " (seed " << s.seed
                        << "), logits " << ws.logits[0] << ", " << ws.logits[1];
                    throw TrainingDiverged(msg.str());
                }
                loss_sum += loss;
                hits += (probs[1] > probs[0] ? 1 : 0) == s.label;
                nn::backward<float>(model, ws, s.label, grad_f, inv);
            }
            std::copy(grad_f.begin(), grad_f.end(), grad.begin());
            adam.step(model.params, grad);
        }
        EpochStats st;
        st.epoch = epoch;
        st.loss = loss_sum / static_cast<double>(order.size());
        st.accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
        st.val_accuracy = accuracy_on(model, samples, val);
        if (!std::isfinite(st.loss)) throw TrainingDiverged("train: non-finite epoch loss");
        result.history.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Decision rule interface: sees exactly what the receiver sees.
struct DecisionInput {
    const Image& image;
    float rho_db;
    std::uint32_t qam;
};

using Decider = std::function<std::uint8_t(const DecisionInput&)>;

inline Decider model_decider(const ClassifierModel& model) {
    auto ws = std::make_shared<nn::Workspace<float>>();
    return [model, ws](const DecisionInput& in) { return predict(model, in.image, *ws).label; };
}

inline Decider constant_decider(std::uint8_t label) {
    return [label](const DecisionInput&) { return label; };
}

struct AccuracyReport {
    double accuracy = 0.0;
    std::array<std::array<std::size_t, 2>, 2> confusion{};  // [true label][predicted label]
    std::size_t count = 0;
};

inline AccuracyReport evaluate_accuracy(const Decider& decide, const std::vector<Sample>& samples) {
    if (samples.empty()) throw InvalidArgument("evaluate_accuracy: empty set");
    AccuracyReport r;
    for (const auto& s : samples) {
        const std::uint8_t pred = decide(DecisionInput{s.image, s.rho_db, s.qam});
        ++r.confusion[s.label & 1][pred & 1];
    }
    r.count = samples.size();
    r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / static_cast<double>(r.count);
    return r;
}

inline AccuracyReport evaluate_accuracy(const ClassifierModel& model, const std::vector<Sample>& samples) {
    return evaluate_accuracy(model_decider(model), samples);
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradientCheckOptions {
    std::size_t weights = 64;
    double step = 1e-4;
    double tolerance = 1e-3;
    // gradients below this magnitude are compared on an absolute scale
    double magnitude_floor = 1e-6;
    std::uint64_t seed = 1;
    // test hook applied to the analytic gradient before comparison
    std::function<void(std::vector<double>&)> tamper;
};

struct GradientCheckReport {
    bool passed = false;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    bool finite = true;
};

/// Central differences against backprop, in double precision.
inline GradientCheckReport gradient_check(const ClassifierModel& model, const Image& image, std::uint8_t label,
                                          const GradientCheckOptions& opt = {}) {
    check_image(model.arch, image);
    nn::Model<double> m = model.cast<double>();
    nn::Workspace<double> ws;
    const std::span<const float> input(image.pixels);
    std::vector<double> grad(m.params.size(), 0.0);
    nn::forward<double, float>(m, input, ws);
    nn::backward<double>(m, ws, label, grad);
    if (opt.tamper) opt.tamper(grad);

    auto loss_at = [&]() {
        nn::forward<double, float>(m, input, ws);
        return nn::cross_entropy(ws, label);
    };

    GradientCheckReport rep;
    for (double gv : grad) rep.finite = rep.finite && std::isfinite(gv);
    Rng rng(opt.seed);
    const std::size_t count = std::min(opt.weights, m.params.size());
    for (std::size_t c = 0; c < count; ++c) {
        const std::size_t i = count == m.params.size() ? c : rng.below(m.params.size());
        const double saved = m.params[i];
        m.params[i] = saved + opt.step;
        const double up = loss_at();
        m.params[i] = saved - opt.step;
        const double down = loss_at();
        m.params[i] = saved;
        const double numeric = (up - down) / (2.0 * opt.step);
        const double denom = std::max({std::abs(numeric), std::abs(grad[i]), opt.magnitude_floor});
        const double err = std::abs(numeric - grad[i]) / denom;
        if (!std::isfinite(numeric)) rep.finite = false;
        if (err > rep.max_relative_error || !std::isfinite(err)) {
            rep.max_relative_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
            rep.worst_index = i;
        }
        ++rep.checked;
    }
    rep.passed = rep.finite && rep.max_relative_error < opt.tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Logistic baseline on handcrafted image features

inline constexpr std::size_t kBaselineFeatures = 7;

/**
 * Temporal variation (mean |row n+1 - row n|, a Doppler proxy), frequency
 * variation (mean |column m+1 - column m|, a delay-spread proxy), mean and
 * spread of the magnitude rows, SNR, SNR^2 and log2(m), all from the image.
 */
inline std::array<double, kBaselineFeatures> baseline_features(const Image& img) {
    const std::size_t rows = img.rows - 1;  // magnitude rows
    const std::size_t cols = img.cols;
    double tvar = 0.0, fvar = 0.0, mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = img.at(r, c);
            mean += v;
            sq += v * v;
            if (r + 1 < rows) tvar += std::abs(img.at(r + 1, c) - v);
            if (c + 1 < cols) fvar += std::abs(img.at(r, c + 1) - v);
        }
    }
    const double n = static_cast<double>(rows * cols);
    mean /= n;
    const double spread = std::sqrt(std::max(0.0, sq / n - mean * mean));
    tvar = rows > 1 ? tvar / static_cast<double>((rows - 1) * cols) : 0.0;
    fvar = cols > 1 ? fvar / static_cast<double>(rows * (cols - 1)) : 0.0;
    const double snr = img.at(rows, 0);
    const double qam = img.at(rows, 1);
    return {tvar, fvar, mean, spread, snr, snr * snr, qam};
}

struct LogisticBaseline {
    std::array<double, kBaselineFeatures> mean{};
    std::array<double, kBaselineFeatures> scale{};
    std::array<double, kBaselineFeatures> weights{};
    double bias = 0.0;

    /// P(label = 1)
    double probability(const Image& img) const {
        const auto f = baseline_features(img);
        double z = bias;
        for (std::size_t k = 0; k < kBaselineFeatures; ++k) z += weights[k] * (f[k] - mean[k]) / scale[k];
        return 1.0 / (1.0 + std::exp(-z));
    }

    std::uint8_t predict(const Image& img) const { return probability(img) > 0.5 ? 1 : 0; }

    Decider decider() const {
        return [copy = *this](const DecisionInput& in) { return copy.predict(in.image); };
    }
};

/// Full-batch gradient descent on standardized features. `seed` jitters the start point.
inline LogisticBaseline baseline_logistic(const std::vector<Sample>& samples, std::uint64_t seed = 0,
                                          std::size_t iterations = 3000, double learning_rate = 0.5) {
    if (samples.empty()) throw InvalidArgument("baseline_logistic: empty training set");
    LogisticBaseline m;
    std::vector<std::array<double, kBaselineFeatures>> feats;
    feats.reserve(samples.size());
    for (const auto& s : samples) feats.push_back(baseline_features(s.image));
    const double n = static_cast<double>(samples.size());
    for (std::size_t k = 0; k < kBaselineFeatures; ++k) {
        double mu = 0.0, sq = 0.0;
        for (const auto& f : feats) mu += f[k];
        mu /= n;
        for (const auto& f : feats) sq += (f[k] - mu) * (f[k] - mu);
        m.mean[k] = mu;
        const double sd = std::sqrt(sq / n);
        m.scale[k] = sd > 1e-12 ? sd : 1.0;
    }
    Rng rng(seed);
    for (auto& w : m.weights) w = 1e-3 * rng.uniform(-1.0, 1.0);
    for (std::size_t it = 0; it < iterations; ++it) {
        std::array<double, kBaselineFeatures> gw{};
        double gb = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            double z = m.bias;
            for (std::size_t k = 0; k < kBaselineFeatures; ++k) z += m.weights[k] * (feats[i][k] - m.mean[k]) / m.scale[k];
            const double err = 1.0 / (1.0 + std::exp(-z)) - static_cast<double>(samples[i].label);
            gb += err;
            for (std::size_t k = 0; k < kBaselineFeatures; ++k) gw[k] += err * (feats[i][k] - m.mean[k]) / m.scale[k];
        }
        m.bias -= learning_rate * gb / n;
        for (std::size_t k = 0; k < kBaselineFeatures; ++k) m.weights[k] -= learning_rate * gw[k] / n;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Model file
//
//   "DDCN" | version u16 | in_channels u16 | height u16 | width u16 | conv1 u16 |
//   conv2 u16 | residual_blocks u16 | init_seed u64 | param_count u32 |
//   params f32 x param_count | CRC-32 u32        (little-endian)

inline constexpr std::array<char, 4> kModelMagic{'D', 'D', 'C', 'N'};
inline constexpr std::uint16_t kModelVersion = 1;

inline std::vector<std::uint8_t> encode_model(const ClassifierModel& m) {
    detail::ByteWriter w;
    w.raw(kModelMagic.data(), kModelMagic.size());
    w.u16(kModelVersion);
    const auto& a = m.arch;
    for (std::size_t v : {a.in_channels, a.height, a.width, a.conv1_channels, a.conv2_channels, a.residual_blocks}) {
        if (v > 0xffff) throw InvalidDimension("encode_model: architecture field exceeds 16 bits");
        w.u16(static_cast<std::uint16_t>(v));
    }
    w.u64(m.init_seed);
    w.u32(static_cast<std::uint32_t>(m.params.size()));
    for (float p : m.params) w.f32(p);
    w.u32(detail::crc32_of(w.bytes().data(), w.bytes().size()));
    return std::move(w.bytes());
}

inline ClassifierModel decode_model(const std::vector<std::uint8_t>& bytes) {
    constexpr std::size_t header = 4 + 2 + 6 * 2 + 8 + 4;
    if (bytes.size() < header + 4) throw TruncatedFile("model file too short");
    if (!std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) throw FormatError("not a model file (bad magic)");
    detail::ByteReader r(bytes.data() + 4, header - 4);
    const std::uint16_t version = r.u16();
    if (version != kModelVersion) throw VersionMismatch("model file version " + std::to_string(version));
    ClassifierModel m;
    m.arch.in_channels = r.u16();
    m.arch.height = r.u16();
    m.arch.width = r.u16();
    m.arch.conv1_channels = r.u16();
    m.arch.conv2_channels = r.u16();
    m.arch.residual_blocks = r.u16();
    m.init_seed = r.u64();
    const std::size_t count = r.u32();
    const std::size_t expected = header + count * 4 + 4;
    if (bytes.size() < expected) throw TruncatedFile("model file truncated");
    if (bytes.size() > expected) throw FormatError("model file has trailing bytes");
    detail::ByteReader crc(bytes.data() + expected - 4, 4);
    if (crc.u32() != detail::crc32_of(bytes.data(), expected - 4)) throw ChecksumMismatch("model file CRC-32 mismatch");
    if (nn::ParamLayout(m.arch).total != count) throw FormatError("model file parameter count does not match its architecture");
    detail::ByteReader body(bytes.data() + header, count * 4);
    m.params.resize(count);
    for (float& p : m.params) p = body.f32();
    return m;
}

inline void save_model(const ClassifierModel& m, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_model(m));
}

inline ClassifierModel load_model(const std::filesystem::path& path) {
    return decode_model(detail::read_file_bytes(path));
}

}  // namespace ddswitch
