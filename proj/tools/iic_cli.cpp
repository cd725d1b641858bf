// iic: command-line front end for the iris intrinsic-code pipeline.
//
// Each subcommand reads and writes the on-disk formats from iic/io.hpp, so the
// stages can be chained, checkpointed and re-run independently.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iic/iic.hpp"
#include "iic/parallel.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kThreadsEnv = "IIC_THREADS";

unsigned default_threads() {
    if (const char* env = std::getenv(kThreadsEnv)) {
        try {
            return static_cast<unsigned>(std::stoul(env));
        } catch (...) {
            throw iic::usage_error(std::string(kThreadsEnv) + " is not a non-negative integer");
        }
    }
    return 0;
}

// Manifest rows are written with file names derived from ids; keep them flat.
std::string file_stem(const std::string& id) {
    if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..")
        throw iic::format_error("id '" + id + "' cannot be used as a file name");
    return id;
}

std::vector<iic::KeyPortion> load_keys(const fs::path& manifest_path, const iic::Manifest& manifest, unsigned threads) {
    std::vector<std::optional<iic::KeyPortion>> slots(manifest.size());
    iic::parallel_for(manifest.size(), threads, [&](std::size_t i) {
        const auto& row = manifest[i];
        iic::KeyPortion key = iic::read_key_portion(iic::resolve_path(manifest_path, row.path));
        if (!(key.label() == row.label))
            throw iic::format_error("manifest row " + row.sample_id + " labels " + iic::format_label(row.label) +
                                    " but the key file says " + iic::format_label(key.label()));
        slots[i].emplace(std::move(key));
    });
    std::vector<iic::KeyPortion> keys;
    keys.reserve(slots.size());
    for (auto& s : slots) keys.push_back(std::move(*s));
    return keys;
}

std::vector<iic::KeyPortion> load_keys(const fs::path& manifest_path, unsigned threads) {
    return load_keys(manifest_path, iic::read_manifest(manifest_path), threads);
}

// Writes keys as <stem>.ikp under `dir` plus a manifest listing them.
void write_key_set(const fs::path& dir, const std::vector<iic::KeyPortion>& keys, unsigned threads) {
    fs::create_directories(dir);
    iic::Manifest manifest;
    manifest.reserve(keys.size());
    for (const auto& k : keys)
        manifest.push_back({k.sample_id(), k.label(), file_stem(k.sample_id()) + ".ikp", std::nullopt});
    iic::parallel_for(keys.size(), threads, [&](std::size_t i) {
        iic::write_key_portion(dir / manifest[i].path, keys[i]);
    });
    iic::write_manifest(dir / "manifest.csv", manifest);
}

void write_text(const std::optional<fs::path>& path, const std::string& text) {
    if (path) iic::write_file(*path, text);
    else std::cout << text;
}

std::vector<std::size_t> parse_dims(const std::string& spec) {
    std::vector<std::size_t> dims;
    auto parse_one = [&](const std::string& s) -> std::size_t {
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(s, &pos);
        } catch (...) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || v == 0) throw iic::usage_error("bad dimension '" + s + "' in --dims");
        return v;
    };
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            const std::size_t lo = parse_one(item.substr(0, dots)), hi = parse_one(item.substr(dots + 2));
            if (hi < lo) throw iic::usage_error("empty range '" + item + "' in --dims");
            for (std::size_t d = lo; d <= hi; ++d) dims.push_back(d);
        } else {
            dims.push_back(parse_one(item));
        }
    }
    if (dims.empty()) throw iic::usage_error("--dims is empty");
    return dims;
}

std::vector<iic::PercentRange> parse_ranges(const std::vector<std::string>& specs) {
    if (specs.empty()) return iic::default_ranges();
    std::vector<iic::PercentRange> out;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        const auto lo = colon == std::string::npos ? std::nullopt : iic::parse_double(s.substr(0, colon));
        const auto hi = colon == std::string::npos ? std::nullopt : iic::parse_double(s.substr(colon + 1));
        if (!lo || !hi) throw iic::usage_error("bad --range '" + s + "', expected LO:HI");
        out.emplace_back(*lo, *hi);
    }
    return out;
}

// --config FILE holds `key = value` lines naming long options of the chosen
// subcommand. They are appended as flags unless the command line already sets
// them, so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::optional<std::string> config;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!config) return rest;
    std::ifstream in(*config);
    if (!in) throw iic::usage_error("cannot read config file " + *config);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        if (eq == std::string::npos) throw iic::usage_error("config line " + std::to_string(ln) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const std::string flag = "--" + key;
        bool present = false;
        for (const auto& a : rest) present = present || a == flag || a.rfind(flag + "=", 0) == 0;
        if (!present) {
            rest.push_back(flag);
            rest.push_back(value);
        }
    }
    return rest;
}

int exit_code(iic::ErrorCategory c) {
    switch (c) {
        case iic::ErrorCategory::Usage: return 1;
        case iic::ErrorCategory::Data: return 2;
        case iic::ErrorCategory::Numeric: return 3;
    }
    return 2;
}

int report(const char* category, const std::string& detail, int code) {
    std::string one_line = detail;
    for (char& c : one_line)
        if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "error: " << category << ": " << one_line << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iris indexing by intrinsic dimension"};
    app.require_subcommand(1);

    unsigned threads = 0;
    auto add_threads = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "Worker threads (0 = all cores; default from " + std::string(kThreadsEnv) + ")")
            ->check(CLI::NonNegativeNumber);
    };

    // synth
    iic::SynthConfig synth_cfg;
    std::string embedding = "linear";
    fs::path synth_out;
    std::size_t synth_images = 0;
    auto* synth = app.add_subcommand("synth", "Write a synthetic manifest and raw key portions");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--eyes", synth_cfg.n_eyes, "Number of distinct eyes")->check(CLI::Range(2, 1000000));
    synth->add_option("--dim-true", synth_cfg.d_true, "Ground-truth manifold dimension")->check(CLI::Range(1, 4096));
    synth->add_option("--samples", synth_cfg.samples_per_eye, "Samples per eye")->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_cfg.noise_sigma, "Per-pixel Gaussian noise sigma")->check(CLI::NonNegativeNumber);
    synth->add_option("--embedding", embedding, "linear or smooth")->check(CLI::IsMember({"linear", "smooth"}));
    synth->add_option("--seed", synth_cfg.seed, "Random seed");
    synth->add_option("--images", synth_images, "Also write this many synthetic eye images with circles");
    add_threads(synth);

    // normalize
    fs::path manifest_path, out_dir;
    auto* normalize = app.add_subcommand("normalize", "Unwrap eye images (manifest with circles) into 64x512 PGMs");
    normalize->add_option("--manifest", manifest_path, "Input manifest with circle columns")->required();
    normalize->add_option("--out", out_dir, "Output directory")->required();
    add_threads(normalize);

    // extract
    iic::PreprocessConfig pcfg;
    auto* extract = app.add_subcommand("extract", "Cut 16x256 raw key portions from normalized irises");
    extract->add_option("--manifest", manifest_path, "Manifest of normalized iris PGMs")->required();
    extract->add_option("--out", out_dir, "Output directory")->required();
    extract->add_option("--offset", pcfg.angular_offset_cols, "Angular column offset of the key portion")->check(CLI::Range(0, 511));
    add_threads(extract);

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "Quality-filter, range-normalize and smooth raw key portions");
    preprocess->add_option("--manifest", manifest_path, "Manifest of raw key portions")->required();
    preprocess->add_option("--out", out_dir, "Output directory")->required();
    preprocess->add_option("--mad-span", pcfg.mad_span, "Half-width of the range in MADs");
    preprocess->add_option("--saturation-count", pcfg.saturation_threshold_count, "Reject if more saturated pixels than this");
    preprocess->add_option("--saturation-level", pcfg.saturation_level, "Raw value counted as saturated");
    preprocess->add_option("--mad-min", pcfg.mad_min, "Lowest acceptable raw MAD");
    preprocess->add_option("--mad-max", pcfg.mad_max, "Highest acceptable raw MAD");
    preprocess->add_option("--kernel", pcfg.kernel_size, "Box filter size (odd)");
    add_threads(preprocess);

    // average
    auto* average = app.add_subcommand("average", "Average preprocessed key portions per eye");
    average->add_option("--manifest", manifest_path, "Manifest of preprocessed key portions")->required();
    average->add_option("--out", out_dir, "Output directory")->required();
    add_threads(average);

    // dim
    std::optional<fs::path> out_file;
    int fit_points = iic::kDefaultFitPoints;
    std::vector<std::string> range_specs;
    auto* dim = app.add_subcommand("dim", "Correlation-dimension table of averaged key portions");
    dim->add_option("--manifest", manifest_path, "Manifest of averaged key portions")->required();
    dim->add_option("--out", out_file, "CSV output (default stdout)");
    dim->add_option("--fit-points", fit_points, "Log-spaced radii per fit")->check(CLI::Range(2, 100000));
    dim->add_option("--range", range_specs, "LO:HI neighbourhood range in percent (repeatable)");
    add_threads(dim);

    // fit
    std::size_t map_dim = 4;
    fs::path map_path;
    auto* fit = app.add_subcommand("fit", "Fit the PCA map on averaged key portions");
    fit->add_option("--manifest", manifest_path, "Manifest of averaged key portions")->required();
    fit->add_option("--dim", map_dim, "Intrinsic code dimension")->check(CLI::Range(1, 4096));
    fit->add_option("--out", map_path, "Map file (IICM)")->required();
    add_threads(fit);

    // enroll
    fs::path db_path;
    auto* enroll = app.add_subcommand("enroll", "Project averaged key portions into an enrollment database");
    enroll->add_option("--map", map_path, "Map file")->required();
    enroll->add_option("--manifest", manifest_path, "Manifest of averaged key portions")->required();
    enroll->add_option("--out", db_path, "Database CSV")->required();
    add_threads(enroll);

    // query
    fs::path key_path;
    std::size_t batch = 0;
    bool stop_at_match = false;
    auto* query = app.add_subcommand("query", "Rank enrolled eyes for one key portion");
    query->add_option("--map", map_path, "Map file")->required();
    query->add_option("--db", db_path, "Database CSV")->required();
    query->add_option("--key", key_path, "Key portion file")->required();
    query->add_option("--batch", batch, "Neighbourhood growth per step (0 = whole database)");
    query->add_flag("--stop-at-match", stop_at_match, "Stop after the batch holding the query's own eye");
    add_threads(query);

    // bench
    std::size_t bins = iic::kDefaultHistogramBins;
    auto* bench = app.add_subcommand("bench", "Penetration rate of sample key portions against a database");
    bench->add_option("--map", map_path, "Map file")->required();
    bench->add_option("--db", db_path, "Database CSV")->required();
    bench->add_option("--manifest", manifest_path, "Manifest of query key portions")->required();
    bench->add_option("--out", out_dir, "Directory for per_sample.csv and histogram.csv")->required();
    bench->add_option("--bins", bins, "Histogram bins over [0,1]")->check(CLI::PositiveNumber);
    add_threads(bench);

    // sweep
    fs::path samples_path;
    std::string dims_spec = "2..6";
    auto* sweep = app.add_subcommand("sweep", "Penetration rate as a function of map dimension");
    sweep->add_option("--averages", manifest_path, "Manifest of averaged key portions")->required();
    sweep->add_option("--samples", samples_path, "Manifest of query key portions")->required();
    sweep->add_option("--dims", dims_spec, "Dimensions, e.g. 2..6 or 2,4,8");
    sweep->add_option("--out", out_file, "CSV output (default stdout)");
    add_threads(sweep);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        threads = default_threads();
        std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), 1);
    } catch (const iic::Error& e) {
        return report(iic::category_name(e.category()), e.what(), exit_code(e.category()));
    }

    try {
        if (*synth) {
            synth_cfg.embedding = embedding == "smooth" ? iic::Embedding::Smooth : iic::Embedding::Linear;
            const auto eyes = iic::gen_eyes(synth_cfg);
            const auto samples = iic::gen_samples(eyes, synth_cfg.samples_per_eye, synth_cfg.noise_sigma, synth_cfg.seed);
            fs::create_directories(synth_out / "keys");
            iic::Manifest manifest;
            for (const auto& s : samples)
                manifest.push_back({s.sample_id(), s.label(), "keys/" + file_stem(s.sample_id()) + ".ikp", std::nullopt});
            iic::parallel_for(samples.size(), threads, [&](std::size_t i) {
                iic::write_key_portion(synth_out / manifest[i].path, samples[i]);
            });
            iic::write_manifest(synth_out / "manifest.csv", manifest);

            if (synth_images > 0) {
                iic::Manifest images(synth_images, iic::ManifestRow{"", iic::EyeLabel("x", iic::Side::Left), "", std::nullopt});
                fs::create_directories(synth_out / "images");
                iic::parallel_for(synth_images, threads, [&](std::size_t i) {
                    iic::Rng rng(iic::sub_seed(synth_cfg.seed, 100, i));
                    const double r_iris = rng.uniform(90.0, 120.0);
                    const double r_pupil = rng.uniform(0.25, 0.5) * r_iris;
                    const double cx = 160.0 + rng.uniform(-10.0, 10.0), cy = 160.0 + rng.uniform(-10.0, 10.0);
                    const iic::EyeLabel label(iic::detail::synth_subject(i + 1, synth_images), i % 2 ? iic::Side::Right : iic::Side::Left);
                    const std::string id = iic::format_label(label) + "_img";
                    const auto eye = iic::gen_eye_image(320, iic::EyePattern::Radial, cx, cy, r_pupil, r_iris,
                                                        iic::sub_seed(synth_cfg.seed, 101, i), label, id);
                    iic::write_eye_image(synth_out / "images" / (id + ".pgm"), eye.image);
                    images[i] = {id, label, "images/" + id + ".pgm", iic::CirclePair{eye.pupil, eye.iris}};
                });
                iic::write_manifest(synth_out / "images.csv", images);
            }
            std::cout << "eyes=" << eyes.size() << " samples=" << samples.size() << " images=" << synth_images << "\n";
        } else if (*normalize) {
            const auto manifest = iic::read_manifest(manifest_path);
            fs::create_directories(out_dir);
            iic::Manifest out;
            for (const auto& row : manifest) {
                if (!row.circles) throw iic::format_error("row " + row.sample_id + " has no circle parameters");
                out.push_back({row.sample_id, row.label, file_stem(row.sample_id) + ".pgm", std::nullopt});
            }
            iic::parallel_for(manifest.size(), threads, [&](std::size_t i) {
                const auto& row = manifest[i];
                const iic::EyeImage img = iic::read_eye_image(iic::resolve_path(manifest_path, row.path), row.label, row.sample_id);
                iic::write_normalized_iris(out_dir / out[i].path, iic::unwrap(img, row.circles->pupil, row.circles->iris));
            });
            iic::write_manifest(out_dir / "manifest.csv", out);
            std::cout << "normalized=" << out.size() << "\n";
        } else if (*extract) {
            const auto manifest = iic::read_manifest(manifest_path);
            std::vector<std::optional<iic::KeyPortion>> slots(manifest.size());
            iic::parallel_for(manifest.size(), threads, [&](std::size_t i) {
                const auto& row = manifest[i];
                slots[i].emplace(iic::extract_key(
                    iic::read_normalized_iris(iic::resolve_path(manifest_path, row.path), row.label, row.sample_id),
                    pcfg.angular_offset_cols));
            });
            std::vector<iic::KeyPortion> keys;
            for (auto& s : slots) keys.push_back(std::move(*s));
            write_key_set(out_dir, keys, threads);
            std::cout << "extracted=" << keys.size() << "\n";
        } else if (*preprocess) {
            pcfg.validate();
            const auto manifest = iic::read_manifest(manifest_path);
            const auto raw = load_keys(manifest_path, manifest, threads);
            std::vector<std::optional<iic::PreprocessOutcome>> outcomes(raw.size());
            iic::parallel_for(raw.size(), threads, [&](std::size_t i) { outcomes[i] = iic::preprocess(raw[i], pcfg); });

            std::vector<iic::KeyPortion> kept;
            std::map<std::string, std::size_t> discarded{{"saturation_exceeded", 0}, {"mad_out_of_range", 0}};
            std::string report_csv = "sample_id,label,accepted,reason,saturated_count,mad\n";
            for (std::size_t i = 0; i < raw.size(); ++i) {
                const auto& o = *outcomes[i];
                report_csv += raw[i].sample_id() + ',' + iic::format_label(raw[i].label()) + ',' +
                              (o.report.accepted() ? "1" : "0") + ',' + iic::reason_name(o.report.reason) + ',' +
                              std::to_string(o.report.saturated_count) + ',' + iic::format_double(o.report.mad) + '\n';
                if (o.key) kept.push_back(*o.key);
                else ++discarded[iic::reason_name(o.report.reason)];
            }
            write_key_set(out_dir, kept, threads);
            iic::write_file(out_dir / "report.csv", report_csv);
            std::cout << "input=" << raw.size() << " kept=" << kept.size();
            for (const auto& [reason, n] : discarded) std::cout << " " << reason << "=" << n;
            std::cout << "\n";
        } else if (*average) {
            const auto keys = load_keys(manifest_path, threads);
            const auto avgs = iic::average_per_eye(keys);
            write_key_set(out_dir, avgs, threads);
            std::cout << "eyes=" << avgs.size() << " from=" << keys.size() << "\n";
        } else if (*dim) {
            const auto keys = load_keys(manifest_path, threads);
            std::vector<std::vector<double>> points;
            for (const auto& k : keys) points.emplace_back(k.values().begin(), k.values().end());
            const auto ranges = parse_ranges(range_specs);
            const auto table = iic::dimension_table(std::span<const std::vector<double>>(points), ranges, fit_points, threads);
            std::string csv = "lo_pct,hi_pct,dimension\n";
            for (const auto& row : table)
                csv += iic::format_double(row.lo_pct) + ',' + iic::format_double(row.hi_pct) + ',' + iic::format_double(row.slope) + '\n';
            write_text(out_file, csv);
        } else if (*fit) {
            const auto keys = load_keys(manifest_path, threads);
            const auto map = iic::fit_map(std::span<const iic::KeyPortion>(keys), map_dim);
            iic::write_map(map_path, map);
            std::cout << "d=" << map.d() << " n=" << keys.size() << " fingerprint=" << iic::fingerprint_hex(iic::map_fingerprint(map));
            std::cout << " variance=";
            for (std::size_t i = 0; i < map.d(); ++i) std::cout << (i ? "," : "") << iic::format_double(map.explained_variance()[i]);
            std::cout << "\n";
        } else if (*enroll) {
            const auto map = iic::read_map(map_path);
            const auto keys = load_keys(manifest_path, threads);
            const auto db = iic::enroll(map, keys);
            iic::write_db(db_path, db);
            std::cout << "enrolled=" << db.size() << " d=" << db.d() << "\n";
        } else if (*query) {
            const auto map = iic::read_map(map_path);
            const auto db = iic::read_db(db_path, map);
            const auto key = iic::read_key_portion(key_path);
            const auto code = iic::project(map, key);
            const std::size_t rank = iic::query_rank(db, code);
            auto search = iic::expanding_search(db, code.coords(), batch == 0 ? db.size() : batch);
            std::cout << "position,label,distance\n";
            std::size_t position = 0;
            while (!search.done()) {
                bool matched = false;
                for (const auto& c : search.next_batch()) {
                    ++position;
                    matched = matched || position == rank;
                    std::cout << position << ',' << db.name(c.entry) << ',' << iic::format_double17(c.distance) << '\n';
                }
                if (stop_at_match && matched) break;
            }
            std::cout << "# C=" << rank << " N=" << db.size() << "\n";
        } else if (*bench) {
            const auto map = iic::read_map(map_path);
            const auto db = iic::read_db(db_path, map);
            const auto keys = load_keys(manifest_path, threads);
            std::vector<iic::IntrinsicIrisCode> codes;
            codes.reserve(keys.size());
            for (const auto& k : keys) codes.push_back(iic::project(map, k));
            const auto result = iic::penetration(db, codes, bins, threads);
            std::string per_sample = "sample_id,label,rank,penetration\n";
            for (std::size_t i = 0; i < keys.size(); ++i)
                per_sample += keys[i].sample_id() + ',' + iic::format_label(keys[i].label()) + ',' +
                              std::to_string(result.ranks[i]) + ',' + iic::format_double17(result.samples[i]) + '\n';
            std::string hist = "bin_lo,bin_hi,count\n";
            for (const auto& b : result.histogram)
                hist += iic::format_double(b.lo) + ',' + iic::format_double(b.hi) + ',' + std::to_string(b.count) + '\n';
            fs::create_directories(out_dir);
            iic::write_file(out_dir / "per_sample.csv", per_sample);
            iic::write_file(out_dir / "histogram.csv", hist);
            std::cout << "P=" << iic::format_double17(result.rate) << " Q=" << result.n_queries << " N=" << result.n_enrolled << "\n";
        } else if (*sweep) {
            const auto dims = parse_dims(dims_spec);
            const auto avgs = load_keys(manifest_path, threads);
            const auto samples = load_keys(samples_path, threads);
            const auto rows = iic::dimension_sweep(avgs, samples, dims, threads);
            std::string csv = "dimension,penetration_rate\n";
            for (const auto& r : rows) csv += std::to_string(r.d) + ',' + iic::format_double17(r.rate) + '\n';
            write_text(out_file, csv);
        }
    } catch (const iic::Error& e) {
        return report(iic::category_name(e.category()), e.what(), exit_code(e.category()));
    } catch (const fs::filesystem_error& e) {
        return report("data", e.what(), 2);
    } catch (const std::exception& e) {
        return report("data", e.what(), 2);
    }
    return 0;
}
