#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddswitch/classifier.hpp"
#include "ddswitch/dataset.hpp"
#include "ddswitch/modem.hpp"

namespace ddswitch::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kMissingFile = 3,
    kInvalidConfig = 4,
    kFormat = 5,
};

class MissingFile : public Error {
public:
    explicit MissingFile(const std::string& path) : Error("no such file or directory: '" + path + "'") {}
};

inline void require_exists(const fs::path& p) {
    if (!fs::exists(p)) throw MissingFile(p.string());
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

inline double parse_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

/// "-20:30:5" (inclusive range) or "0,10,20".
inline std::vector<double> parse_snr_list(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        const auto parts = split(spec, ':');
        if (parts.size() != 3) throw InvalidArgument("SNR range must be start:stop:step, got '" + spec + "'");
        const double a = parse_number(parts[0]), b = parse_number(parts[1]), step = parse_number(parts[2]);
        if (!(step > 0.0) || b < a) throw InvalidArgument("SNR range '" + spec + "' is empty or has a bad step");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) out.push_back(a + static_cast<double>(i) * step);
    } else {
        for (const auto& p : split(spec, ',')) out.push_back(parse_number(p));
    }
    if (out.empty()) throw InvalidArgument("empty SNR list");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& spec) {
    std::vector<double> out;
    for (const auto& p : split(spec, ',')) out.push_back(parse_number(p));
    if (out.empty()) throw InvalidArgument("empty list '" + spec + "'");
    return out;
}

inline std::vector<unsigned> parse_qam_list(const std::string& spec) {
    std::vector<unsigned> out;
    for (const auto& p : split(spec, ',')) {
        const double v = parse_number(p);
        if (v < 0 || v != std::floor(v) || !is_supported_qam_order(static_cast<unsigned>(v))) {
            throw InvalidArgument("unsupported QAM order '" + p + "'");
        }
        out.push_back(static_cast<unsigned>(v));
    }
    if (out.empty()) throw InvalidArgument("empty QAM list");
    return out;
}

/// Stock family name (case-insensitive) or a path to a model JSON file.
inline ModelSpec resolve_model(const std::string& ref) {
    const std::string key = to_upper(ref);
    if (key == "EPA" || key == "EVA" || key == "ETU") return stock_model(key);
    if (ref.size() > 5 && ref.substr(ref.size() - 5) == ".json") {
        require_exists(ref);
        return load_model_spec(ref);
    }
    throw InvalidArgument("unknown channel model '" + ref + "' (expected EPA, EVA, ETU or a .json file)");
}

inline GridConfig load_grid(const std::string& path) {
    require_exists(path);
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
        return grid_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("grid file '" + path + "': " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw Error("write failed for '" + path.string() + "'");
}

/// Resolved configuration next to an output file: <output>.json.
inline void write_sidecar(const fs::path& output, const nlohmann::json& config) {
    write_text(fs::path(output.string() + ".json"), config.dump(2) + "\n");
}

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

struct GenDatasetArgs {
    std::string models = "epa,eva,etu";
    std::size_t train = 1000;
    std::size_t test = 100;
    std::uint64_t seed = 42;
    std::string out;
    std::string grid;
    std::string speeds;
    std::string snr;
    std::string qam;
};

inline ScenarioConfig resolve_scenario(const GenDatasetArgs& a) {
    ScenarioConfig cfg = ScenarioConfig::stock();
    cfg.models.clear();
    for (const auto& m : split(a.models, ',')) cfg.models.push_back(resolve_model(m));
    if (!a.grid.empty()) cfg.grid = load_grid(a.grid);
    if (!a.speeds.empty()) cfg.speeds_kmh = parse_double_list(a.speeds);
    if (!a.snr.empty()) cfg.snr_set_db = parse_snr_list(a.snr);
    if (!a.qam.empty()) cfg.qam_set = parse_qam_list(a.qam);
    cfg.validate();
    return cfg;
}

inline int run_gen_dataset(const GenDatasetArgs& a, std::ostream& out) {
    if (a.train == 0 && a.test == 0) throw InvalidArgument("nothing to generate: --train and --test are both 0");
    const ScenarioConfig cfg = resolve_scenario(a);
    const Dataset d = build_dataset(cfg, a.train, a.test, a.seed);
    save_dataset(d, a.out);
    std::size_t otfs_train = 0;
    for (const auto& s : d.train) otfs_train += s.label == 0;
    out << "wrote " << d.train.size() << " train / " << d.test.size() << " test samples to " << a.out << "\n"
        << "train labels: " << otfs_train << " OTFS, " << d.train.size() - otfs_train << " OFDM\n";
    return kOk;
}

struct TrainArgs {
    std::string data;
    std::string out;
    TrainConfig cfg;
    std::size_t residual_blocks = 1;
    bool quiet = false;
};

inline int run_train(const TrainArgs& a, std::ostream& out) {
    require_exists(a.data);
    a.cfg.validate();
    const Dataset d = load_dataset(a.data);
    if (d.train.empty()) throw InvalidArgument("dataset '" + a.data + "' has no training samples");
    const ClassifierModel init = init_model(arch_for_grid(d.manifest.scenario.grid, a.residual_blocks), a.cfg.seed);
    const TrainResult r = train(init, d.train, a.cfg, [&](const EpochStats& e) {
        if (!a.quiet) {
            out << "epoch " << e.epoch + 1 << "/" << a.cfg.epochs << "  loss " << fmt("%.5f", e.loss) << "  train acc "
                << fmt("%.4f", e.accuracy) << "\n";
        }
    });
    save_model(r.model, a.out);
    const double test_acc = d.test.empty() ? std::nan("") : evaluate_accuracy(r.model, d.test).accuracy;
    if (!d.test.empty()) out << "test accuracy " << fmt("%.4f", test_acc) << "\n";
    out << "saved model to " << a.out << "\n";

    nlohmann::json cfg;
    cfg["command"] = "train";
    cfg["data"] = a.data;
    cfg["dataset_master_seed"] = d.manifest.master_seed;
    cfg["train_count"] = d.train.size();
    cfg["epochs"] = a.cfg.epochs;
    cfg["batch_size"] = a.cfg.batch_size;
    cfg["learning_rate"] = a.cfg.learning_rate;
    cfg["seed"] = a.cfg.seed;
    cfg["residual_blocks"] = a.residual_blocks;
    cfg["parameters"] = r.model.params.size();
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& e : r.history) hist.push_back({{"epoch", e.epoch + 1}, {"loss", e.loss}, {"train_accuracy", e.accuracy}});
    cfg["history"] = hist;
    write_sidecar(a.out, cfg);
    return kOk;
}

struct EvalArgs {
    std::string data;
    std::string model;
    std::string out;
};

inline std::string format_report(const AccuracyReport& acc, const PolicyReport& pol) {
    std::ostringstream s;
    s << "samples: " << acc.count << "\n";
    s << "accuracy: " << fmt("%.4f", acc.accuracy) << "\n";
    s << "confusion (rows true, cols predicted; 0=OTFS 1=OFDM):\n";
    s << "  true 0: " << acc.confusion[0][0] << " " << acc.confusion[0][1] << "\n";
    s << "  true 1: " << acc.confusion[1][0] << " " << acc.confusion[1][1] << "\n";
    s << "mean mse:\n";
    s << "  switched:    " << fmt("%.6e", pol.switched.mean_mse) << "\n";
    s << "  always_otfs: " << fmt("%.6e", pol.always_otfs.mean_mse) << "\n";
    s << "  always_ofdm: " << fmt("%.6e", pol.always_ofdm.mean_mse) << "\n";
    s << "  oracle:      " << fmt("%.6e", pol.oracle.mean_mse) << "\n";
    s << "mean regret:\n";
    s << "  switched:    " << fmt("%.6e", pol.switched.mean_regret) << "\n";
    s << "  always_otfs: " << fmt("%.6e", pol.always_otfs.mean_regret) << "\n";
    s << "  always_ofdm: " << fmt("%.6e", pol.always_ofdm.mean_regret) << "\n";
    s << "oracle agreement: " << fmt("%.4f", pol.agreement) << "\n";
    s << "per snr (snr_db count switched always_otfs always_ofdm oracle):\n";
    for (const auto& [snr, b] : pol.per_snr) {
        s << "  " << fmt("%g", snr) << " " << b.count << " " << fmt("%.6e", b.switched.mean_mse) << " "
          << fmt("%.6e", b.always_otfs.mean_mse) << " " << fmt("%.6e", b.always_ofdm.mean_mse) << " "
          << fmt("%.6e", b.oracle.mean_mse) << "\n";
    }
    return s.str();
}

inline int run_eval(const EvalArgs& a, std::ostream& out) {
    require_exists(a.data);
    require_exists(a.model);
    const Dataset d = load_dataset(a.data);
    if (d.test.empty()) throw InvalidArgument("dataset '" + a.data + "' has no test samples");
    const ClassifierModel model = load_model(a.model);
    check_image(model.arch, d.test.front().image);
    const Decider decide = model_decider(model);
    const AccuracyReport acc = evaluate_accuracy(decide, d.test);
    const PolicyReport pol = compare_policies(realize_on_samples(decide, d.test));
    const std::string text = format_report(acc, pol);
    out << text;
    const std::string dest = a.out.empty() ? a.model + ".eval.txt" : a.out;
    write_text(dest, text);
    write_sidecar(dest, {{"command", "eval"}, {"data", a.data}, {"model", a.model}, {"test_count", d.test.size()}});
    return kOk;
}

struct SweepArgs {
    std::string model = "EVA";
    double speed = -1.0;  // < 0: the family default
    unsigned qam = 64;
    std::string snr = "-20:30:5";
    std::string classifier;
    std::size_t draws = 25;
    std::uint64_t seed = 1;
    std::string grid;
    std::size_t threads = 0;
    std::string out;
};

struct SweepRow {
    double snr_db = 0.0;
    double mse_otfs = 0.0;
    double mse_ofdm = 0.0;
    double mse_switched = 0.0;
    double chosen_fraction_otfs = 0.0;
};

/**
 * Fig.-3-style curve: the same channel draws are reused at every SNR point,
 * each point averaged over `draws` realizations. Without a classifier the
 * switched column follows the oracle choice.
 */
inline std::vector<SweepRow> run_sweep_rows(const ModelSpec& spec, const GridConfig& grid, unsigned qam,
                                            const std::vector<double>& snrs, std::size_t draws, std::uint64_t seed,
                                            const ClassifierModel* classifier, std::size_t threads) {
    if (draws == 0) throw InvalidArgument("--draws must be >= 1");
    if (!is_supported_qam_order(qam)) throw InvalidArgument("unsupported QAM order " + std::to_string(qam));
    grid.validate();
    spec.validate();
    const std::size_t P = snrs.size();
    // [draw][snr]
    std::vector<std::vector<IntervalResult>> res(draws, std::vector<IntervalResult>(P));

    auto work = [&](std::size_t d, nn::Workspace<float>& ws) {
        const std::uint64_t s = derive_seed(seed, d);
        Rng rng(s);
        const PathSet paths = draw_pathset(spec, rng);
        const PairEvaluator ev(paths, grid);
        for (std::size_t k = 0; k < P; ++k) {
            const MsePair pair = ev.evaluate(db_to_linear(snrs[k]), qam);
            std::uint8_t choice = label_sample(pair.otfs, pair.ofdm);
            if (classifier) choice = predict(*classifier, estimate_image(paths, grid, s, snrs[k], qam), ws).label;
            res[d][k] = make_result(choice, pair.otfs, pair.ofdm, snrs[k], qam, model_id(spec.name), s);
        }
    };

    std::size_t nthreads = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    nthreads = std::min(nthreads, draws);
    if (nthreads <= 1) {
        nn::Workspace<float> ws;
        for (std::size_t d = 0; d < draws; ++d) work(d, ws);
    } else {
        std::vector<std::exception_ptr> errors(nthreads);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    nn::Workspace<float> ws;
                    for (std::size_t d = t; d < draws; d += nthreads) work(d, ws);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<SweepRow> rows(P);
    for (std::size_t k = 0; k < P; ++k) {
        std::vector<IntervalResult> col;
        for (std::size_t d = 0; d < draws; ++d) col.push_back(res[d][k]);
        const PolicyReport rep = compare_policies(col);
        rows[k] = {snrs[k], rep.always_otfs.mean_mse, rep.always_ofdm.mean_mse, rep.switched.mean_mse,
                   rep.chosen_fraction_otfs};
    }
    return rows;
}

inline constexpr const char* kSweepHeader = "snr_db,mse_otfs,mse_ofdm,mse_switched,chosen_fraction_otfs";

inline std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string s = std::string(kSweepHeader) + "\n";
    for (const auto& r : rows) {
        s += fmt("%g", r.snr_db) + "," + fmt("%.10e", r.mse_otfs) + "," + fmt("%.10e", r.mse_ofdm) + "," +
             fmt("%.10e", r.mse_switched) + "," + fmt("%.6f", r.chosen_fraction_otfs) + "\n";
    }
    return s;
}

inline int run_sweep(const SweepArgs& a, std::ostream& out) {
    ModelSpec spec = resolve_model(a.model);
    GridConfig grid = a.grid.empty() ? GridConfig::stock() : load_grid(a.grid);
    if (a.speed >= 0.0) spec = spec.with_speed(a.speed);
    spec = spec.with_carrier(grid.fc);
    const std::vector<double> snrs = parse_snr_list(a.snr);

    std::optional<ClassifierModel> classifier;
    if (!a.classifier.empty()) {
        require_exists(a.classifier);
        classifier = load_model(a.classifier);
        if (classifier->arch.height != grid.N + 1 || classifier->arch.width != grid.M) {
            throw InvalidArgument("classifier input shape does not match the sweep grid");
        }
    }
    const auto rows =
        run_sweep_rows(spec, grid, a.qam, snrs, a.draws, a.seed, classifier ? &*classifier : nullptr, a.threads);
    const std::string csv = format_sweep_csv(rows);
    if (a.out.empty()) {
        out << csv;
    } else {
        write_text(a.out, csv);
        nlohmann::json cfg;
        cfg["command"] = "sweep";
        cfg["model"] = model_spec_to_json(spec);
        cfg["qam"] = a.qam;
        cfg["snr_db"] = snrs;
        cfg["draws_per_point"] = a.draws;
        cfg["seed"] = a.seed;
        cfg["grid"] = grid_to_json(grid);
        cfg["switched_policy"] = classifier ? "classifier" : "oracle";
        if (classifier) cfg["classifier"] = a.classifier;
        write_sidecar(a.out, cfg);
        out << "wrote " << rows.size() << " SNR points to " << a.out << "\n";
    }
    return kOk;
}

struct InspectArgs {
    std::string path;
    bool samples = false;
};

inline int run_inspect(const InspectArgs& a, std::ostream& out) {
    require_exists(a.path);
    if (fs::is_regular_file(a.path) && fs::path(a.path).extension() == ".bin") {
        // a model file or a bare sample file
        const auto bytes = detail::read_file_bytes(a.path);
        if (bytes.size() >= 4 && std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
            const ClassifierModel m = decode_model(bytes);
            out << nlohmann::json{{"kind", "classifier"},
                                  {"input", {m.arch.in_channels, m.arch.height, m.arch.width}},
                                  {"conv1_channels", m.arch.conv1_channels},
                                  {"conv2_channels", m.arch.conv2_channels},
                                  {"residual_blocks", m.arch.residual_blocks},
                                  {"init_seed", m.init_seed},
                                  {"parameters", m.params.size()}}
                       .dump(2)
                << "\n";
            return kOk;
        }
        SampleFileHeader h;
        const auto s = decode_samples(bytes, &h);
        std::size_t otfs = 0;
        for (const auto& x : s) otfs += x.label == 0;
        out << nlohmann::json{{"kind", "samples"}, {"N", h.N}, {"M", h.M}, {"count", h.count}, {"label_otfs", otfs},
                              {"label_ofdm", s.size() - otfs}}
                   .dump(2)
            << "\n";
        return kOk;
    }
    const DatasetManifest m = read_manifest(a.path);
    out << manifest_to_json(m).dump(2) << "\n";
    if (a.samples) {
        const Dataset d = load_dataset(fs::is_directory(a.path) ? fs::path(a.path) : fs::path(a.path).parent_path());
        for (const auto* split : {&d.train, &d.test}) {
            std::size_t otfs = 0;
            for (const auto& s : *split) otfs += s.label == 0;
            out << (split == &d.train ? "train" : "test") << ": " << split->size() << " samples, " << otfs
                << " OTFS / " << split->size() - otfs << " OFDM labels\n";
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------

/// Runs one command line; never throws. Exit codes: see ExitCode.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"OTFS/OFDM waveform switching simulator", "ddswitch"};
    app.require_subcommand(1);

    GenDatasetArgs gen;
    auto* c_gen = app.add_subcommand("gen-dataset", "simulate labelled train/test splits");
    c_gen->add_option("--models", gen.models, "comma-separated EPA,EVA,ETU or model .json files")
        ->capture_default_str();
    c_gen->add_option("--train", gen.train, "training samples")->capture_default_str();
    c_gen->add_option("--test", gen.test, "test samples")->capture_default_str();
    c_gen->add_option("--seed", gen.seed, "master seed")->capture_default_str();
    c_gen->add_option("--out", gen.out, "output directory")->required();
    c_gen->add_option("--grid", gen.grid, "grid .json (default 9x135, 15 MHz, 4 GHz)");
    c_gen->add_option("--speeds", gen.speeds, "comma-separated speeds in km/h");
    c_gen->add_option("--snr", gen.snr, "SNR set, start:stop:step or list, in dB");
    c_gen->add_option("--qam", gen.qam, "comma-separated QAM orders");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train the waveform classifier");
    c_train->add_option("--data", tr.data, "dataset directory")->required();
    c_train->add_option("--out", tr.out, "model output file")->required();
    c_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
    c_train->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
    c_train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
    c_train->add_option("--seed", tr.cfg.seed, "init and shuffle seed")->capture_default_str();
    c_train->add_option("--res-blocks", tr.residual_blocks)->capture_default_str();
    c_train->add_flag("--quiet", tr.quiet);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "accuracy and policy report on the test split");
    c_eval->add_option("--data", ev.data, "dataset directory")->required();
    c_eval->add_option("--model", ev.model, "trained model file")->required();
    c_eval->add_option("--out", ev.out, "report file (default: <model>.eval.txt)");

    SweepArgs sw;
    auto* c_sweep = app.add_subcommand("sweep", "MSE-vs-SNR curves for one scenario");
    c_sweep->add_option("--model", sw.model, "EPA, EVA, ETU or a model .json")->capture_default_str();
    c_sweep->add_option("--speed", sw.speed, "km/h (default: the model's)");
    c_sweep->add_option("--qam", sw.qam)->capture_default_str();
    c_sweep->add_option("--snr", sw.snr, "start:stop:step or list, in dB")->capture_default_str();
    c_sweep->add_option("--classifier", sw.classifier, "model file; default switches by oracle");
    c_sweep->add_option("--draws", sw.draws, "channel draws per SNR point")->capture_default_str();
    c_sweep->add_option("--seed", sw.seed)->capture_default_str();
    c_sweep->add_option("--grid", sw.grid, "grid .json");
    c_sweep->add_option("--threads", sw.threads, "0 = hardware concurrency")->capture_default_str();
    c_sweep->add_option("--out", sw.out, "CSV path (default stdout)");

    InspectArgs in;
    auto* c_inspect = app.add_subcommand("inspect", "print a dataset manifest or file summary");
    c_inspect->add_option("path", in.path, "dataset directory, manifest, sample or model file")->required();
    c_inspect->add_flag("--samples", in.samples, "also load splits and count labels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) {
            err << app.get_subcommands().front()->help();
        } else {
            err << app.help();
        }
        return kUsage;
    }

    try {
        if (*c_gen) return run_gen_dataset(gen, out);
        if (*c_train) return run_train(tr, out);
        if (*c_eval) return run_eval(ev, out);
        if (*c_sweep) return run_sweep(sw, out);
        if (*c_inspect) return run_inspect(in, out);
    } catch (const MissingFile& e) {
        err << "error: " << e.what() << "\n";
        return kMissingFile;
    } catch (const FormatError& e) {
        err << "error: bad file format: " << e.what() << "\n";
        return kFormat;
    } catch (const InvalidArgument& e) {
        err << "error: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const InvalidDimension& e) {
        err << "error: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const InvalidChannel& e) {
        err << "error: invalid configuration: " << e.what() << "\n";
        return kInvalidConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

}  // namespace ddswitch::cli
