#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "iic/embed.hpp"
#include "iic/error.hpp"
#include "iic/index.hpp"
#include "iic/map_codec.hpp"
#include "iic/model.hpp"
#include "iic/normalize.hpp"

namespace iic {

// ---------------------------------------------------------------------------
// Raw file access

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw format_error("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Locale-independent number text

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Exactly 17 significant digits.
inline std::string format_double17(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = pos + 1;
    }
    return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Manifest CSV

struct CirclePair {
    Circle pupil;
    Circle iris;

    friend bool operator==(const CirclePair&, const CirclePair&) = default;
};

struct ManifestRow {
    std::string sample_id;
    EyeLabel label;
    std::string path;
    std::optional<CirclePair> circles;

    friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

using Manifest = std::vector<ManifestRow>;

inline constexpr std::string_view kManifestHeader = "sample_id,subject_id,side,path";
inline constexpr std::string_view kManifestCircleHeader = ",pcx,pcy,pr,icx,icy,ir";

inline std::string encode_manifest(const Manifest& rows) {
    bool any_circles = false;
    for (const auto& r : rows) any_circles = any_circles || r.circles.has_value();
    std::string out(kManifestHeader);
    if (any_circles) out += kManifestCircleHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.sample_id + ',' + r.label.subject_id() + ',' + (r.label.side() == Side::Left ? "L" : "R") + ',' + r.path;
        if (r.circles) {
            const auto& [p, i] = *r.circles;
            for (double v : {p.cx, p.cy, p.r, i.cx, i.cy, i.r}) out += ',' + format_double(v);
        } else if (any_circles) {
            out += ",,,,,,";
        }
        out += '\n';
    }
    return out;
}

inline Manifest decode_manifest(std::string_view text) {
    const auto lines = detail::split_lines(text);
    if (lines.empty()) throw format_error("manifest: missing header");
    const std::string full = std::string(kManifestHeader) + std::string(kManifestCircleHeader);
    const bool has_circle_columns = lines[0] == full;
    if (lines[0] != kManifestHeader && !has_circle_columns)
        throw format_error("manifest line 1: unexpected header '" + std::string(lines[0]) + "'");

    Manifest rows;
    std::set<std::string, std::less<>> seen;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const std::string where = "manifest line " + std::to_string(ln + 1) + ": ";
        if (lines[ln].empty()) {
            if (ln + 1 == lines.size()) break;
            throw format_error(where + "empty line");
        }
        const auto f = detail::split_csv(lines[ln]);
        if (f.size() != 4 && !(has_circle_columns && f.size() == 10))
            throw format_error(where + "expected " + std::string(has_circle_columns ? "4 or 10" : "4") +
                               " fields, got " + std::to_string(f.size()));
        if (f[0].empty()) throw format_error(where + "empty sample_id");
        if (seen.contains(f[0])) throw format_error(where + "duplicate sample_id '" + std::string(f[0]) + "'");
        if (f[2] != "L" && f[2] != "R") throw format_error(where + "bad side token '" + std::string(f[2]) + "'");
        if (f[3].empty()) throw format_error(where + "empty path");
        std::optional<CirclePair> circles;
        if (f.size() == 10) {
            std::size_t present = 0;
            for (std::size_t k = 4; k < 10; ++k) present += f[k].empty() ? 0 : 1;
            if (present != 0 && present != 6) throw format_error(where + "circle columns must be all present or all absent");
            if (present == 6) {
                double v[6];
                for (std::size_t k = 0; k < 6; ++k) {
                    const auto parsed = parse_double(f[4 + k]);
                    if (!parsed) throw format_error(where + "malformed number '" + std::string(f[4 + k]) + "'");
                    v[k] = *parsed;
                }
                circles = CirclePair{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
            }
        }
        try {
            rows.push_back({std::string(f[0]), EyeLabel(std::string(f[1]), f[2] == "L" ? Side::Left : Side::Right),
                            std::string(f[3]), circles});
        } catch (const Error& e) {
            throw format_error(where + e.what());
        }
        seen.emplace(f[0]);
    }
    return rows;
}

inline Manifest read_manifest(const std::filesystem::path& path) { return decode_manifest(read_file(path)); }
inline void write_manifest(const std::filesystem::path& path, const Manifest& rows) {
    write_file(path, encode_manifest(rows));
}

/// Manifest paths are relative to the manifest's own directory unless absolute.
inline std::filesystem::path resolve_path(const std::filesystem::path& manifest_path, const std::string& entry) {
    const std::filesystem::path p(entry);
    return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // byte / 255
};

inline std::string encode_pgm(int width, int height, std::span<const double> pixels) {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + pixels.size());
    for (double v : pixels) out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
    return out;
}

inline GrayImage decode_pgm(std::string_view bytes) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&](const char* what) {
        skip_space();
        int v = 0;
        const auto res = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
        if (res.ec != std::errc() || v <= 0) throw format_error(std::string("pgm: bad ") + what);
        pos = static_cast<std::size_t>(res.ptr - bytes.data());
        return v;
    };
    if (bytes.substr(0, 2) != "P5") throw format_error("pgm: bad magic (expected P5)");
    pos = 2;
    GrayImage img;
    img.width = read_int("width");
    img.height = read_int("height");
    if (read_int("maxval") != 255) throw format_error("pgm: maxval must be 255");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        throw format_error("pgm: missing whitespace after header");
    ++pos;
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    if (bytes.size() - pos != n)
        throw format_error("pgm: expected " + std::to_string(n) + " pixel bytes, got " + std::to_string(bytes.size() - pos));
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
    return img;
}

inline void write_normalized_iris(const std::filesystem::path& path, const NormalizedIris& iris) {
    write_file(path, encode_pgm(static_cast<int>(kNormCols), static_cast<int>(kNormRows), iris.pixels()));
}

inline NormalizedIris read_normalized_iris(const std::filesystem::path& path, const EyeLabel& label,
                                           const std::string& sample_id) {
    GrayImage img = decode_pgm(read_file(path));
    if (img.width != static_cast<int>(kNormCols) || img.height != static_cast<int>(kNormRows))
        throw format_error("normalized iris " + path.string() + " must be 512x64, got " + std::to_string(img.width) +
                           "x" + std::to_string(img.height));
    return NormalizedIris(std::move(img.pixels), label, sample_id);
}

inline void write_eye_image(const std::filesystem::path& path, const EyeImage& image) {
    write_file(path, encode_pgm(image.width(), image.height(), image.pixels()));
}

inline EyeImage read_eye_image(const std::filesystem::path& path, const EyeLabel& label, const std::string& sample_id) {
    GrayImage img = decode_pgm(read_file(path));
    return EyeImage(img.width, img.height, std::move(img.pixels), label, sample_id);
}

// ---------------------------------------------------------------------------
// Key portion (IKP1)

inline constexpr char kKeyMagic[4] = {'I', 'K', 'P', '1'};

/// Layout: magic, u32 rows, u32 cols, u8 stage, 4096 f32 row-major, then the
/// formatted label and the sample id, each as u32 length + UTF-8 bytes.
inline std::string encode_key_portion(const KeyPortion& key) {
    std::string out(kKeyMagic, 4);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(kKeyRows));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(kKeyCols));
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(key.stage()));
    for (double v : key.values()) detail::put<float>(out, static_cast<float>(v));
    for (const std::string& s : {format_label(key.label()), key.sample_id()}) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
        out += s;
    }
    return out;
}

inline KeyPortion decode_key_portion(std::string_view bytes) {
    detail::ByteReader in(bytes, "key portion");
    if (in.take(4) != std::string_view(kKeyMagic, 4)) throw format_error("key portion: bad magic (expected IKP1)");
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    if (rows != kKeyRows || cols != kKeyCols)
        throw format_error("key portion: size " + std::to_string(rows) + "x" + std::to_string(cols) + ", expected 16x256");
    const auto stage = in.get<std::uint8_t>();
    if (stage > static_cast<std::uint8_t>(KeyStage::Averaged)) throw format_error("key portion: bad stage code");
    std::vector<double> values(kKeySize);
    for (double& v : values) v = static_cast<double>(in.get<float>());
    std::string strings[2];
    for (auto& s : strings) {
        const auto len = in.get<std::uint32_t>();
        s = std::string(in.take(len));
    }
    if (!in.at_end()) throw format_error("key portion: trailing bytes");
    return KeyPortion(std::move(values), parse_label(strings[0]), std::move(strings[1]), static_cast<KeyStage>(stage));
}

inline void write_key_portion(const std::filesystem::path& path, const KeyPortion& key) {
    write_file(path, encode_key_portion(key));
}

inline KeyPortion read_key_portion(const std::filesystem::path& path) {
    try {
        return decode_key_portion(read_file(path));
    } catch (const Error& e) {
        if (e.category() != ErrorCategory::Data) throw;
        throw format_error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Intrinsic map (IICM) and enrollment database CSV

inline void write_map(const std::filesystem::path& path, const IntrinsicMap& map) { write_file(path, encode_map(map)); }
inline IntrinsicMap read_map(const std::filesystem::path& path) { return decode_map(read_file(path)); }

inline std::string fingerprint_hex(std::uint64_t fp) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, fp >>= 4) out[static_cast<std::size_t>(i)] = digits[fp & 0xf];
    return out;
}

inline std::string encode_db(const EnrollmentDB& db) {
    std::string out = "# map=" + fingerprint_hex(db.map_fingerprint()) + "\nlabel";
    for (std::size_t i = 1; i <= db.d(); ++i) out += ",c" + std::to_string(i);
    out += '\n';
    for (std::size_t e = 0; e < db.size(); ++e) {
        out += db.name(e);
        for (double c : db.entry(e).coords) out += ',' + format_double17(c);
        out += '\n';
    }
    return out;
}

inline EnrollmentDB decode_db(std::string_view text) {
    const auto lines = detail::split_lines(text);
    if (lines.size() < 2 || !lines[0].starts_with("# map=")) throw format_error("db line 1: missing '# map=' comment");
    const std::string_view hex = lines[0].substr(6);
    std::uint64_t fp = 0;
    const auto res = std::from_chars(hex.data(), hex.data() + hex.size(), fp, 16);
    if (hex.size() != 16 || res.ec != std::errc() || res.ptr != hex.data() + hex.size())
        throw format_error("db line 1: malformed fingerprint");
    const auto header = detail::split_csv(lines[1]);
    if (header.size() < 2 || header[0] != "label") throw format_error("db line 2: bad header");
    const std::size_t d = header.size() - 1;
    for (std::size_t i = 1; i <= d; ++i) {
        if (header[i] != "c" + std::to_string(i)) throw format_error("db line 2: bad column name");
    }
    std::vector<Enrollment> entries;
    for (std::size_t ln = 2; ln < lines.size(); ++ln) {
        const std::string where = "db line " + std::to_string(ln + 1) + ": ";
        if (lines[ln].empty()) {
            if (ln + 1 == lines.size()) break;
            throw format_error(where + "empty line");
        }
        const auto f = detail::split_csv(lines[ln]);
        if (f.size() != d + 1) throw format_error(where + "expected " + std::to_string(d + 1) + " fields");
        std::vector<double> coords(d);
        for (std::size_t i = 0; i < d; ++i) {
            const auto v = parse_double(f[i + 1]);
            if (!v) throw format_error(where + "malformed number '" + std::string(f[i + 1]) + "'");
            coords[i] = *v;
        }
        try {
            entries.push_back({parse_label(f[0]), std::move(coords)});
        } catch (const Error& e) {
            throw format_error(where + e.what());
        }
    }
    return EnrollmentDB(std::move(entries), fp);
}

inline void write_db(const std::filesystem::path& path, const EnrollmentDB& db) { write_file(path, encode_db(db)); }
inline EnrollmentDB read_db(const std::filesystem::path& path) { return decode_db(read_file(path)); }

/// Throws unless `db` was produced by `map`.
inline void check_compatible(const EnrollmentDB& db, const IntrinsicMap& map) {
    const std::uint64_t fp = map_fingerprint(map);
    if (fp != db.map_fingerprint())
        throw compatibility_error("database was enrolled with map " + fingerprint_hex(db.map_fingerprint()) +
                                  ", not " + fingerprint_hex(fp));
    if (db.d() != map.d()) throw compatibility_error("database dimension differs from map dimension");
}

inline EnrollmentDB read_db(const std::filesystem::path& path, const IntrinsicMap& map) {
    EnrollmentDB db = read_db(path);
    check_compatible(db, map);
    return db;
}

}  // namespace iic
