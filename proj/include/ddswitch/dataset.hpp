#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "ddswitch/channel.hpp"
#include "ddswitch/chanmodels.hpp"
#include "ddswitch/core.hpp"
#include "ddswitch/equalizer.hpp"
#include "ddswitch/rng.hpp"

namespace ddswitch {

/// Single-channel float image, row-major.
struct Image {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> pixels;

    float at(std::size_t r, std::size_t c) const { return pixels[r * cols + c]; }
    float& at(std::size_t r, std::size_t c) { return pixels[r * cols + c]; }

    bool operator==(const Image&) const = default;
};

inline constexpr int kImageEncodingVersion = 1;
inline constexpr double kSnrPixelFloorDb = -20.0;
inline constexpr double kSnrPixelSpanDb = 50.0;

inline float snr_pixel(double rho_db) {
    return static_cast<float>(std::clamp((rho_db - kSnrPixelFloorDb) / kSnrPixelSpanDb, 0.0, 1.0));
}

inline float qam_pixel(unsigned qam) {
    return static_cast<float>(std::clamp(std::log2(static_cast<double>(qam)) / 10.0, 0.0, 1.0));
}

/**
 * (N+1) x M image of a channel estimate: rows 0..N-1 hold |H| / max|H|; the
 * last row is zero apart from the SNR pixel (column 0) and the QAM pixel
 * (column 1).
 */
inline Image encode_image(const CMatrix& h_est, double rho_db, unsigned qam) {
    if (h_est.rows() < 1 || h_est.cols() < 2) throw InvalidDimension("encode_image: grid needs M >= 2");
    Image img;
    img.rows = static_cast<std::size_t>(h_est.rows()) + 1;
    img.cols = static_cast<std::size_t>(h_est.cols());
    img.pixels.assign(img.rows * img.cols, 0.0f);
    const double peak = h_est.cwiseAbs().maxCoeff();
    if (peak > 0.0 && std::isfinite(peak)) {
        for (Eigen::Index n = 0; n < h_est.rows(); ++n) {
            for (Eigen::Index m = 0; m < h_est.cols(); ++m) {
                img.at(static_cast<std::size_t>(n), static_cast<std::size_t>(m)) =
                    static_cast<float>(std::abs(h_est(n, m)) / peak);
            }
        }
    }
    img.at(img.rows - 1, 0) = snr_pixel(rho_db);
    img.at(img.rows - 1, 1) = qam_pixel(qam);
    return img;
}

/// 0 = OTFS, 1 = OFDM. Ties go to OFDM.
inline std::uint8_t label_sample(double mse_otfs, double mse_ofdm) {
    if (std::isnan(mse_otfs) || std::isnan(mse_ofdm)) throw InvalidArgument("label_sample: NaN MSE");
    if (!std::isfinite(mse_otfs) || !std::isfinite(mse_ofdm) || mse_otfs < 0.0 || mse_ofdm < 0.0) {
        throw InvalidArgument("label_sample: MSE must be finite and >= 0");
    }
    return mse_otfs < mse_ofdm ? 0 : 1;
}

struct Sample {
    Image image;
    float rho_db = 0.0f;
    std::uint32_t qam = 0;
    std::uint8_t label = 0;
    float mse_otfs = 0.0f;
    float mse_ofdm = 0.0f;
    std::uint8_t model_id = 0;
    std::uint64_t seed = 0;

    std::string model_name() const { return model_name_from_id(model_id); }

    bool operator==(const Sample&) const = default;
};

/// Scenario draws of one interval; everything downstream is a pure function of these.
struct IntervalDraw {
    std::uint64_t seed = 0;
    ModelSpec model;
    double speed_kmh = 0.0;
    PathSet paths;
    double rho_db = 0.0;
    unsigned qam = 0;
};

inline IntervalDraw draw_interval(const ScenarioConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    IntervalDraw d;
    d.seed = seed;
    const ModelSpec& family = cfg.models[rng.below(cfg.models.size())];
    d.speed_kmh = cfg.speeds_kmh[rng.below(cfg.speeds_kmh.size())];
    d.model = family.with_speed(d.speed_kmh).with_carrier(cfg.grid.fc);
    d.paths = draw_pathset(d.model, rng);
    d.rho_db = cfg.snr_set_db[rng.below(cfg.snr_set_db.size())];
    d.qam = cfg.qam_set[rng.below(cfg.qam_set.size())];
    return d;
}

/// One simulated coherence interval: the stored sample plus the full-precision MSE pair.
struct IntervalOutcome {
    Sample sample;
    MsePair pair;
};

/// Image of the noisy channel estimate the receiver would see for this interval.
inline Image estimate_image(const PathSet& paths, const GridConfig& grid, std::uint64_t seed, double rho_db,
                            unsigned qam) {
    // separate stream so the estimate noise does not shift the scenario draws
    Rng noise(derive_seed(seed, 0x65737469ULL));
    const CMatrix h_est = inject_estimation_error(sample_tf_grid(paths, grid), db_to_linear(rho_db), noise);
    return encode_image(h_est, rho_db, qam);
}

/// True-channel MSE pair, corrupted channel estimate, image and label for one interval.
inline IntervalOutcome simulate_interval(const ScenarioConfig& cfg, const IntervalDraw& d) {
    const double rho = db_to_linear(d.rho_db);
    IntervalOutcome out;
    out.pair = PairEvaluator(d.paths, cfg.grid).evaluate(rho, d.qam);
    Sample& s = out.sample;
    s.image = estimate_image(d.paths, cfg.grid, d.seed, d.rho_db, d.qam);
    s.rho_db = static_cast<float>(d.rho_db);
    s.qam = d.qam;
    s.mse_otfs = static_cast<float>(out.pair.otfs);
    s.mse_ofdm = static_cast<float>(out.pair.ofdm);
    // labelled from the stored (rounded) values so the file is self-consistent
    s.label = label_sample(s.mse_otfs, s.mse_ofdm);
    s.model_id = model_id(d.model.name);
    s.seed = d.seed;
    return out;
}

inline Sample make_sample(const ScenarioConfig& cfg, const IntervalDraw& d) { return simulate_interval(cfg, d).sample; }

/// First sample index of the test split; train uses [0, p).
inline constexpr std::uint64_t kTestIndexOffset = 1ULL << 32;

inline std::vector<Sample> generate_dataset(const ScenarioConfig& cfg, std::size_t count, std::uint64_t master_seed,
                                            std::uint64_t first_index = 0) {
    if (count == 0) throw InvalidArgument("generate_dataset: count must be >= 1");
    cfg.validate();
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t seed = derive_seed(master_seed, first_index + i);
        out.push_back(make_sample(cfg, draw_interval(cfg, seed)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Binary sample files
//
//   header (16 bytes): "DDLK" | version u16 | N u16 | M u16 | count u32 | reserved u16
//   record: image (N+1)*M f32 | rho_db f32 | qam u32 | label u8 | mse_otfs f32 |
//           mse_ofdm f32 | model_id u8 | seed u64
//   trailer: CRC-32 of everything before it, u32
//
// All fields little-endian.

inline constexpr std::array<char, 4> kDatasetMagic{'D', 'D', 'L', 'K'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 16;

inline std::size_t record_bytes(std::size_t n, std::size_t m) { return (n + 1) * m * 4 + 4 + 4 + 1 + 4 + 4 + 1 + 8; }

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }

private:
    std::uint64_t get(int n) {
        if (pos_ + static_cast<std::size_t>(n) > size_) throw TruncatedFile("unexpected end of data");
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace detail

struct SampleFileHeader {
    std::uint16_t version = kDatasetVersion;
    std::size_t N = 0;
    std::size_t M = 0;
    std::size_t count = 0;
};

inline std::vector<std::uint8_t> encode_samples(std::size_t n, std::size_t m, const std::vector<Sample>& samples) {
    if (n == 0 || m == 0 || n > 0xffff || m > 0xffff) throw InvalidDimension("encode_samples: grid does not fit the header");
    detail::ByteWriter w;
    w.raw(kDatasetMagic.data(), kDatasetMagic.size());
    w.u16(kDatasetVersion);
    w.u16(static_cast<std::uint16_t>(n));
    w.u16(static_cast<std::uint16_t>(m));
    w.u32(static_cast<std::uint32_t>(samples.size()));
    w.u16(0);
    for (const auto& s : samples) {
        if (s.image.rows != n + 1 || s.image.cols != m) throw InvalidDimension("encode_samples: image shape mismatch");
        for (float px : s.image.pixels) w.f32(px);
        w.f32(s.rho_db);
        w.u32(s.qam);
        w.u8(s.label);
        w.f32(s.mse_otfs);
        w.f32(s.mse_ofdm);
        w.u8(s.model_id);
        w.u64(s.seed);
    }
    const std::uint32_t crc = detail::crc32_of(w.bytes().data(), w.bytes().size());
    w.u32(crc);
    return std::move(w.bytes());
}

inline SampleFileHeader decode_header(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kDatasetHeaderBytes) throw TruncatedFile("sample file shorter than its header");
    if (!std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), bytes.begin())) {
        throw FormatError("not a sample file (bad magic)");
    }
    detail::ByteReader r(bytes.data() + 4, kDatasetHeaderBytes - 4);
    SampleFileHeader h;
    h.version = r.u16();
    h.N = r.u16();
    h.M = r.u16();
    h.count = r.u32();
    if (h.version != kDatasetVersion) {
        throw VersionMismatch("sample file version " + std::to_string(h.version) + ", expected " +
                              std::to_string(kDatasetVersion));
    }
    return h;
}

inline std::vector<Sample> decode_samples(const std::vector<std::uint8_t>& bytes, SampleFileHeader* header_out = nullptr) {
    const SampleFileHeader h = decode_header(bytes);
    const std::size_t expected = kDatasetHeaderBytes + h.count * record_bytes(h.N, h.M) + 4;
    if (bytes.size() < expected) throw TruncatedFile("sample file truncated");
    if (bytes.size() > expected) throw FormatError("sample file has trailing bytes");
    detail::ByteReader tail(bytes.data() + expected - 4, 4);
    if (tail.u32() != detail::crc32_of(bytes.data(), expected - 4)) throw ChecksumMismatch("sample file CRC-32 mismatch");

    detail::ByteReader r(bytes.data() + kDatasetHeaderBytes, expected - 4 - kDatasetHeaderBytes);
    std::vector<Sample> out(h.count);
    for (auto& s : out) {
        s.image.rows = h.N + 1;
        s.image.cols = h.M;
        s.image.pixels.resize(s.image.rows * s.image.cols);
        for (float& px : s.image.pixels) px = r.f32();
        s.rho_db = r.f32();
        s.qam = r.u32();
        s.label = r.u8();
        s.mse_otfs = r.f32();
        s.mse_ofdm = r.f32();
        s.model_id = r.u8();
        s.seed = r.u64();
    }
    if (header_out) *header_out = h;
    return out;
}

inline void write_samples(const std::filesystem::path& path, std::size_t n, std::size_t m,
                          const std::vector<Sample>& samples) {
    detail::write_file_bytes(path, encode_samples(n, m, samples));
}

inline std::vector<Sample> read_samples(const std::filesystem::path& path, SampleFileHeader* header_out = nullptr) {
    return decode_samples(detail::read_file_bytes(path), header_out);
}

// ---------------------------------------------------------------------------
// Manifest + bundle

struct DatasetManifest {
    int format_version = kDatasetVersion;
    int image_encoding_version = kImageEncodingVersion;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    std::uint64_t master_seed = 0;
    std::uint64_t train_first_index = 0;
    std::uint64_t test_first_index = kTestIndexOffset;
    ScenarioConfig scenario;
    std::string train_file = "train.bin";
    std::string test_file = "test.bin";
};

inline nlohmann::json grid_to_json(const GridConfig& g) {
    return {{"N", g.N}, {"M", g.M}, {"T0_s", g.T0}, {"F0_hz", g.F0}, {"fc_hz", g.fc}, {"B_hz", g.B}};
}

inline GridConfig grid_from_json(const nlohmann::json& j) {
    GridConfig g;
    g.N = j.at("N").get<std::size_t>();
    g.M = j.at("M").get<std::size_t>();
    g.T0 = j.at("T0_s").get<double>();
    g.F0 = j.at("F0_hz").get<double>();
    g.fc = j.at("fc_hz").get<double>();
    g.B = j.at("B_hz").get<double>();
    g.validate();
    return g;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& s) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : s.models) models.push_back(model_spec_to_json(m));
    return {{"models", models},
            {"speeds_kmh", s.speeds_kmh},
            {"snr_set_db", s.snr_set_db},
            {"qam_set", s.qam_set},
            {"grid", grid_to_json(s.grid)}};
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    ScenarioConfig s;
    for (const auto& m : j.at("models")) s.models.push_back(model_spec_from_json(m));
    s.speeds_kmh = j.at("speeds_kmh").get<std::vector<double>>();
    s.snr_set_db = j.at("snr_set_db").get<std::vector<double>>();
    s.qam_set = j.at("qam_set").get<std::vector<unsigned>>();
    s.grid = grid_from_json(j.at("grid"));
    s.validate();
    return s;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["image_encoding"] = {{"version", m.image_encoding_version},
                           {"magnitude", "|H| / max|H| per image"},
                           {"snr_pixel", "(snr_db + 20) / 50, clamped to [0, 1], row N column 0"},
                           {"qam_pixel", "log2(m) / 10, row N column 1"}};
    j["train"] = {{"count", m.train_count}, {"first_index", m.train_first_index}, {"file", m.train_file}};
    j["test"] = {{"count", m.test_count}, {"first_index", m.test_first_index}, {"file", m.test_file}};
    j["master_seed"] = m.master_seed;
    j["seed_derivation"] = "splitmix64(master, index)";
    j["scenario"] = scenario_to_json(m.scenario);
    return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kDatasetVersion) {
            throw VersionMismatch("manifest format version " + std::to_string(m.format_version) + ", expected " +
                                  std::to_string(kDatasetVersion));
        }
        m.image_encoding_version = j.at("image_encoding").at("version").get<int>();
        if (m.image_encoding_version != kImageEncodingVersion) throw VersionMismatch("unsupported image encoding version");
        m.train_count = j.at("train").at("count").get<std::size_t>();
        m.train_first_index = j.at("train").at("first_index").get<std::uint64_t>();
        m.train_file = j.at("train").at("file").get<std::string>();
        m.test_count = j.at("test").at("count").get<std::size_t>();
        m.test_first_index = j.at("test").at("first_index").get<std::uint64_t>();
        m.test_file = j.at("test").at("file").get<std::string>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.scenario = scenario_from_json(j.at("scenario"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return m;
}

inline constexpr const char* kManifestFile = "manifest.json";

struct Dataset {
    DatasetManifest manifest;
    std::vector<Sample> train;
    std::vector<Sample> test;
};

/// Train split on indices [0, p), test split on [2^32, 2^32 + q): the seed ranges never meet.
inline Dataset build_dataset(const ScenarioConfig& cfg, std::size_t train_count, std::size_t test_count,
                             std::uint64_t master_seed) {
    Dataset d;
    d.manifest.train_count = train_count;
    d.manifest.test_count = test_count;
    d.manifest.master_seed = master_seed;
    d.manifest.scenario = cfg;
    if (train_count > 0) d.train = generate_dataset(cfg, train_count, master_seed, d.manifest.train_first_index);
    if (test_count > 0) d.test = generate_dataset(cfg, test_count, master_seed, d.manifest.test_first_index);
    return d;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& g = d.manifest.scenario.grid;
    write_samples(dir / d.manifest.train_file, g.N, g.M, d.train);
    write_samples(dir / d.manifest.test_file, g.N, g.M, d.test);
    const std::string text = manifest_to_json(d.manifest).dump(2) + "\n";
    detail::write_file_bytes(dir / kManifestFile, std::vector<std::uint8_t>(text.begin(), text.end()));
}

/// Manifest only; the sample files are not opened.
inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
    const std::filesystem::path p = std::filesystem::is_directory(dir) ? dir / kManifestFile : dir;
    std::ifstream in(p);
    if (!in) throw FormatError("cannot open manifest '" + p.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest '" + p.string() + "': " + e.what());
    }
    return manifest_from_json(j);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset d;
    d.manifest = read_manifest(dir);
    const auto& g = d.manifest.scenario.grid;
    auto load_split = [&](const std::string& file, std::size_t expected_count) {
        SampleFileHeader h;
        auto samples = read_samples(dir / file, &h);
        if (h.N != g.N || h.M != g.M) throw FormatError(file + ": grid differs from manifest");
        if (h.count != expected_count) throw FormatError(file + ": sample count differs from manifest");
        return samples;
    };
    d.train = load_split(d.manifest.train_file, d.manifest.train_count);
    d.test = load_split(d.manifest.test_file, d.manifest.test_count);
    return d;
}

}  // namespace ddswitch
