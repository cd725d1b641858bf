#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "iic/embed.hpp"
#include "iic/error.hpp"

namespace iic {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline constexpr char kMapMagic[4] = {'I', 'I', 'C', 'M'};

namespace detail {

template <class T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        const auto view = bytes_.substr(pos_, n);
        pos_ += n;
        return view;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw format_error(what_ + ": truncated at byte " + std::to_string(pos_));
    }

    std::string_view bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// IICM layout: magic, u32 d, 4096 f64 mean, d x 4096 f64 components,
/// d f64 variances; little-endian throughout.
inline std::string encode_map(const IntrinsicMap& map) {
    if (map.input_dim() != kKeySize) throw format_error("IICM maps must have 4096-dimensional inputs");
    std::string out(kMapMagic, 4);
    out.reserve(4 + 4 + 8 * (kKeySize * (map.d() + 1) + map.d()));
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(map.d()));
    for (double v : map.mean()) detail::put(out, v);
    for (std::size_t i = 0; i < map.d(); ++i) {
        for (double v : map.component(i)) detail::put(out, v);
    }
    for (double v : map.explained_variance()) detail::put(out, v);
    return out;
}

inline IntrinsicMap decode_map(std::string_view bytes) {
    detail::ByteReader in(bytes, "map");
    if (in.take(4) != std::string_view(kMapMagic, 4)) throw format_error("map: bad magic (expected IICM)");
    const auto d = in.get<std::uint32_t>();
    if (d < 1 || d > kKeySize) throw format_error("map: invalid dimension " + std::to_string(d));
    if (in.remaining() != 8 * (kKeySize * (d + 1) + d)) throw format_error("map: payload size does not match d");
    std::vector<double> mean(kKeySize);
    for (double& v : mean) v = in.get<double>();
    std::vector<std::vector<double>> components(d, std::vector<double>(kKeySize));
    for (auto& c : components) {
        for (double& v : c) v = in.get<double>();
    }
    std::vector<double> variance(d);
    for (double& v : variance) v = in.get<double>();
    return IntrinsicMap(std::move(mean), std::move(components), std::move(variance));
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Fingerprint of a map: FNV-1a over its serialized IICM bytes.
inline std::uint64_t map_fingerprint(const IntrinsicMap& map) { return fnv1a64(encode_map(map)); }

}  // namespace iic
