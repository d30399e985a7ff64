#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "ddswitch/dataset.hpp"

using namespace ddswitch;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ddswitch_test_dataset_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Sample synthetic_sample(std::size_t n, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    Sample s;
    s.image.rows = n + 1;
    s.image.cols = m;
    for (std::size_t i = 0; i < (n + 1) * m; ++i) s.image.pixels.push_back(static_cast<float>(rng.uniform()));
    s.rho_db = 5.0f;
    s.qam = 256;
    s.mse_otfs = static_cast<float>(rng.uniform());
    s.mse_ofdm = static_cast<float>(rng.uniform());
    s.label = label_sample(s.mse_otfs, s.mse_ofdm);
    s.model_id = 2;
    s.seed = rng.next_u64();
    return s;
}

const ScenarioConfig& stock() {
    static const ScenarioConfig cfg = ScenarioConfig::stock();
    return cfg;
}

}  // namespace

TEST(Image, ZeroChannel) {
    const Image img = encode_image(CMatrix::Zero(9, 135), 5.0, 16);
    EXPECT_EQ(img.rows, 10u);
    EXPECT_EQ(img.cols, 135u);
    for (std::size_t r = 0; r < 9; ++r)
        for (std::size_t c = 0; c < 135; ++c) EXPECT_EQ(img.at(r, c), 0.0f);
    EXPECT_FLOAT_EQ(img.at(9, 0), 0.5f);
    EXPECT_FLOAT_EQ(img.at(9, 1), 0.4f);
}

TEST(Image, MetaPixelEndpoints) {
    const Image img = encode_image(CMatrix::Ones(2, 3), 30.0, 1024);
    EXPECT_FLOAT_EQ(img.at(2, 0), 1.0f);
    EXPECT_FLOAT_EQ(img.at(2, 1), 1.0f);
    EXPECT_FLOAT_EQ(img.at(2, 2), 0.0f);
    EXPECT_FLOAT_EQ(snr_pixel(-20.0), 0.0f);
    EXPECT_FLOAT_EQ(snr_pixel(-40.0), 0.0f);
    EXPECT_FLOAT_EQ(snr_pixel(45.0), 1.0f);
    EXPECT_FLOAT_EQ(qam_pixel(4), 0.2f);
}

TEST(Image, MagnitudeNormalizedToPeak) {
    CMatrix h(2, 2);
    h << cplx(0, 2), cplx(1, 0), cplx(-0.5, 0), cplx(0, 0);
    const Image img = encode_image(h, 0.0, 4);
    EXPECT_FLOAT_EQ(img.at(0, 0), 1.0f);
    EXPECT_FLOAT_EQ(img.at(0, 1), 0.5f);
    EXPECT_FLOAT_EQ(img.at(1, 0), 0.25f);
    EXPECT_FLOAT_EQ(img.at(1, 1), 0.0f);
}

TEST(Image, NeedsTwoColumns) { EXPECT_THROW(encode_image(CMatrix::Ones(3, 1), 0.0, 4), InvalidDimension); }

TEST(Label, Rule) {
    EXPECT_EQ(label_sample(0.1, 0.2), 0);
    EXPECT_EQ(label_sample(0.2, 0.1), 1);
    EXPECT_EQ(label_sample(0.1, 0.1), 1);
    EXPECT_THROW(label_sample(std::nan(""), 0.1), InvalidArgument);
    EXPECT_THROW(label_sample(0.1, -1.0), InvalidArgument);
}

TEST(Generate, DeterministicAndConsistent) {
    const auto a = generate_dataset(stock(), 4, 99);
    const auto b = generate_dataset(stock(), 4, 99);
    EXPECT_EQ(a, b);
    for (const auto& s : a) {
        EXPECT_EQ(s.label, label_sample(s.mse_otfs, s.mse_ofdm));
        EXPECT_EQ(s.image.rows, 10u);
        EXPECT_EQ(s.image.cols, 135u);
        for (std::size_t c = 2; c < s.image.cols; ++c) EXPECT_EQ(s.image.at(9, c), 0.0f);
        for (float px : s.image.pixels) {
            EXPECT_GE(px, 0.0f);
            EXPECT_LE(px, 1.0f);
        }
        EXPECT_LT(s.model_id, 3);
    }
    EXPECT_NE(generate_dataset(stock(), 1, 100).front(), a.front());
}

TEST(Generate, SampleReproducibleFromStoredSeed) {
    const auto a = generate_dataset(stock(), 3, 5);
    for (const auto& s : a) {
        const IntervalDraw d = draw_interval(stock(), s.seed);
        const IntervalOutcome o = simulate_interval(stock(), d);
        EXPECT_EQ(o.sample, s);
        // both MSEs come from the one PathSet
        const MsePair p = evaluate_pair(d.paths, stock().grid, db_to_linear(d.rho_db), d.qam);
        EXPECT_EQ(static_cast<float>(p.otfs), s.mse_otfs);
        EXPECT_EQ(static_cast<float>(p.ofdm), s.mse_ofdm);
    }
}

TEST(Generate, PrefixStable) {
    const auto a = generate_dataset(stock(), 3, 17);
    const auto b = generate_dataset(stock(), 1, 17, 2);
    EXPECT_EQ(a[2], b[0]);
    EXPECT_THROW(generate_dataset(stock(), 0, 1), InvalidArgument);
}

TEST(Generate, TrainTestSeedsDisjoint) {
    std::set<std::uint64_t> train;
    for (std::uint64_t i = 0; i < 1000; ++i) train.insert(derive_seed(42, i));
    for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(train.count(derive_seed(42, kTestIndexOffset + i)), 0u);
    const Dataset d = build_dataset(stock(), 2, 2, 42);
    for (const auto& t : d.test)
        for (const auto& s : d.train) EXPECT_NE(t.seed, s.seed);
}

TEST(SampleFile, RoundTripTen) {
    std::vector<Sample> v;
    for (int i = 0; i < 10; ++i) v.push_back(synthetic_sample(3, 5, i));
    const auto bytes = encode_samples(3, 5, v);
    EXPECT_EQ(bytes.size(), kDatasetHeaderBytes + 10 * record_bytes(3, 5) + 4);
    SampleFileHeader h;
    EXPECT_EQ(decode_samples(bytes, &h), v);
    EXPECT_EQ(h.N, 3u);
    EXPECT_EQ(h.M, 5u);
    EXPECT_EQ(h.count, 10u);
}

TEST(SampleFile, LittleEndianHeader) {
    const auto bytes = encode_samples(9, 135, {synthetic_sample(9, 135, 1)});
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DDLK");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 0);
    EXPECT_EQ(bytes[6], 9);
    EXPECT_EQ(bytes[8], 135);
    EXPECT_EQ(bytes[10], 1);
}

TEST(SampleFile, Corruption) {
    std::vector<Sample> v{synthetic_sample(2, 3, 1), synthetic_sample(2, 3, 2)};
    const auto good = encode_samples(2, 3, v);

    auto flipped = good;
    flipped[kDatasetHeaderBytes + 7] ^= 0x10;
    EXPECT_THROW(decode_samples(flipped), ChecksumMismatch);

    auto magic = good;
    magic[0] = 'X';
    try {
        decode_samples(magic);
        FAIL();
    } catch (const VersionMismatch&) {
        FAIL() << "bad magic reported as version mismatch";
    } catch (const FormatError&) {
    }

    auto version = good;
    version[4] = 2;
    EXPECT_THROW(decode_samples(version), VersionMismatch);

    auto truncated = good;
    truncated.resize(truncated.size() - 5);
    EXPECT_THROW(decode_samples(truncated), TruncatedFile);
    EXPECT_THROW(decode_samples(std::vector<std::uint8_t>(good.begin(), good.begin() + 8)), TruncatedFile);

    auto trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_samples(trailing), FormatError);
}

TEST(SampleFile, ShapeMismatchOnWrite) {
    EXPECT_THROW(encode_samples(3, 3, {synthetic_sample(2, 3, 1)}), InvalidDimension);
}

TEST(Bundle, SaveLoadRoundTrip) {
    const fs::path dir = scratch_dir("bundle");
    const Dataset d = build_dataset(stock(), 6, 4, 7);
    save_dataset(d, dir);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "train.bin"));
    EXPECT_TRUE(fs::exists(dir / "test.bin"));
    const Dataset r = load_dataset(dir);
    EXPECT_EQ(r.train, d.train);
    EXPECT_EQ(r.test, d.test);
    EXPECT_EQ(r.manifest.master_seed, 7u);
    EXPECT_EQ(r.manifest.scenario.grid, d.manifest.scenario.grid);
    EXPECT_EQ(r.manifest.scenario.snr_set_db, d.manifest.scenario.snr_set_db);
    fs::remove_all(dir);
}

TEST(Bundle, ManifestOnlyRead) {
    const fs::path dir = scratch_dir("manifest_only");
    save_dataset(build_dataset(stock(), 2, 1, 3), dir);
    // the tensors are not opened: removing them does not matter
    fs::remove(dir / "train.bin");
    fs::remove(dir / "test.bin");
    const DatasetManifest m = read_manifest(dir);
    EXPECT_EQ(m.train_count, 2u);
    EXPECT_EQ(m.test_count, 1u);
    EXPECT_EQ(m.test_first_index, kTestIndexOffset);
    fs::remove_all(dir);
}

TEST(Bundle, CorruptFileDetected) {
    const fs::path dir = scratch_dir("corrupt");
    save_dataset(build_dataset(stock(), 2, 1, 3), dir);
    auto bytes = detail::read_file_bytes(dir / "train.bin");
    bytes[100] ^= 0xff;
    detail::write_file_bytes(dir / "train.bin", bytes);
    EXPECT_THROW(load_dataset(dir), ChecksumMismatch);
    fs::remove_all(dir);
}

TEST(Bundle, CountMismatchDetected) {
    const fs::path dir = scratch_dir("count");
    const Dataset d = build_dataset(stock(), 2, 1, 3);
    save_dataset(d, dir);
    write_samples(dir / "train.bin", 9, 135, {d.train[0]});
    EXPECT_THROW(load_dataset(dir), FormatError);
    fs::remove_all(dir);
}

TEST(Bundle, ManifestVersionChecked) {
    nlohmann::json j = manifest_to_json(DatasetManifest{.scenario = stock()});
    j["format_version"] = 9;
    EXPECT_THROW(manifest_from_json(j), VersionMismatch);
    j = manifest_to_json(DatasetManifest{.scenario = stock()});
    j.erase("train");
    EXPECT_THROW(manifest_from_json(j), FormatError);
}

TEST(Bundle, SaveIsByteStable) {
    const fs::path a = scratch_dir("stable_a"), b = scratch_dir("stable_b");
    save_dataset(build_dataset(stock(), 3, 2, 11), a);
    save_dataset(build_dataset(stock(), 3, 2, 11), b);
    for (const char* f : {"manifest.json", "train.bin", "test.bin"})
        EXPECT_EQ(detail::read_file_bytes(a / f), detail::read_file_bytes(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Crc, KnownVector) {
    const std::string s = "123456789";
    EXPECT_EQ(detail::crc32_of(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()), 0xCBF43926u);
}
