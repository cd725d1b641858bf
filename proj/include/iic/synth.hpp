#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "iic/error.hpp"
#include "iic/model.hpp"
#include "iic/normalize.hpp"
#include "iic/random.hpp"

namespace iic {

enum class Embedding { Linear, Smooth };

struct SynthConfig {
    std::size_t n_eyes = 100;
    std::size_t d_true = 4;
    std::size_t samples_per_eye = 5;
    double noise_sigma = 0.02;
    Embedding embedding = Embedding::Linear;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_eyes < 2) throw usage_error("synthetic data needs at least 2 eyes");
        if (d_true < 1 || d_true > kKeySize) throw usage_error("d_true must be in [1,4096]");
        if (samples_per_eye < 1) throw usage_error("samples_per_eye must be >= 1");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw usage_error("noise_sigma must be >= 0");
    }
};

/// Scale applied to the orthonormal embedding columns.
inline constexpr double kLinearScale = 0.4;
inline constexpr double kSmoothAmplitude = 0.4;

namespace detail {

// Sub-stream identifiers, so that changing one generator never shifts another.
enum : std::uint64_t { kStreamBasis = 1, kStreamLatent = 2, kStreamNoise = 3, kStreamSmooth = 4, kStreamImage = 5 };

inline std::string synth_subject(std::size_t index, std::size_t count) {
    std::string digits = std::to_string(index);
    const std::size_t width = std::max<std::size_t>(4, std::to_string(count).size());
    return "synth_" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

// kKeySize x d matrix (column-major) with orthonormal columns.
inline std::vector<double> orthonormal_basis(std::size_t d, std::uint64_t seed) {
    Rng rng(sub_seed(seed, kStreamBasis));
    std::vector<double> basis(kKeySize * d);
    for (double& v : basis) v = rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
        double* col = basis.data() + j * kKeySize;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < j; ++p) {
                const double* prev = basis.data() + p * kKeySize;
                double dot = 0.0;
                for (std::size_t k = 0; k < kKeySize; ++k) dot += col[k] * prev[k];
                for (std::size_t k = 0; k < kKeySize; ++k) col[k] -= dot * prev[k];
            }
            double norm = 0.0;
            for (std::size_t k = 0; k < kKeySize; ++k) norm += col[k] * col[k];
            norm = std::sqrt(norm);
            for (std::size_t k = 0; k < kKeySize; ++k) col[k] /= norm;
        }
    }
    return basis;
}

}  // namespace detail

/// Latent coordinates of eye `index`, uniform on the unit hypercube.
inline std::vector<double> synth_latent(const SynthConfig& cfg, std::size_t index) {
    Rng rng(sub_seed(cfg.seed, detail::kStreamLatent, index));
    std::vector<double> z(cfg.d_true);
    for (double& v : z) v = rng.uniform();
    return z;
}

/// One averaged key portion per synthetic eye, lying on a d_true-dimensional
/// manifold. Linear: 0.5 + 0.4*Q(z - 0.5) for a seeded Q with orthonormal
/// columns, so the latent cube is embedded isometrically up to scale. Smooth:
/// each pixel is a seeded sum of sinusoids of the latent coordinates.
inline std::vector<KeyPortion> gen_eyes(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.d_true;
    std::vector<double> basis;
    std::vector<double> freq, phase;
    if (cfg.embedding == Embedding::Linear) {
        basis = detail::orthonormal_basis(d, cfg.seed);
    } else {
        Rng rng(sub_seed(cfg.seed, detail::kStreamSmooth));
        freq.resize(kKeySize * d);
        phase.resize(kKeySize * d);
        for (std::size_t i = 0; i < freq.size(); ++i) {
            freq[i] = rng.uniform(std::numbers::pi, 3.0 * std::numbers::pi);
            phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    }

    std::vector<KeyPortion> eyes;
    eyes.reserve(cfg.n_eyes);
    for (std::size_t e = 0; e < cfg.n_eyes; ++e) {
        const std::vector<double> z = synth_latent(cfg, e);
        std::vector<double> key(kKeySize, 0.5);
        for (std::size_t k = 0; k < kKeySize; ++k) {
            double acc = 0.0;
            if (cfg.embedding == Embedding::Linear) {
                for (std::size_t j = 0; j < d; ++j) acc += basis[j * kKeySize + k] * (z[j] - 0.5);
                acc *= kLinearScale;
            } else {
                for (std::size_t j = 0; j < d; ++j) acc += std::sin(freq[k * d + j] * z[j] + phase[k * d + j]);
                acc *= kSmoothAmplitude / static_cast<double>(d);
            }
            key[k] = std::clamp(0.5 + acc, 0.0, 1.0);
        }
        const std::string subject = detail::synth_subject(e + 1, cfg.n_eyes);
        eyes.emplace_back(std::move(key), EyeLabel(subject, Side::Left), subject + "_L", KeyStage::Averaged);
    }
    return eyes;
}

/// Noisy raw observations of each eye: key + N(0, sigma^2) per pixel, clamped
/// to [0,1]. Sample (e, s) draws from its own counter-derived stream.
inline std::vector<KeyPortion> gen_samples(std::span<const KeyPortion> eyes, std::size_t samples_per_eye,
                                           double noise_sigma, std::uint64_t seed) {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw usage_error("noise_sigma must be >= 0");
    if (samples_per_eye < 1) throw usage_error("samples_per_eye must be >= 1");
    std::vector<KeyPortion> out;
    out.reserve(eyes.size() * samples_per_eye);
    for (std::size_t e = 0; e < eyes.size(); ++e) {
        for (std::size_t s = 0; s < samples_per_eye; ++s) {
            Rng rng(sub_seed(seed, detail::kStreamNoise, e * samples_per_eye + s));
            std::vector<double> values(eyes[e].values().begin(), eyes[e].values().end());
            if (noise_sigma > 0.0) {
                for (double& v : values) v = std::clamp(v + noise_sigma * rng.normal(), 0.0, 1.0);
            }
            std::string id = std::to_string(s + 1);
            id = format_label(eyes[e].label()) + "_s" + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id;
            out.emplace_back(std::move(values), eyes[e].label(), std::move(id), KeyStage::Raw);
        }
    }
    return out;
}

enum class EyePattern { Radial, Uniform };

struct SynthEyeImage {
    EyeImage image;
    Circle pupil;
    Circle iris;
};

/// Square test image with concentric pupil/iris circles. Radial: intensity is
/// 0.5 + 0.3*sin(rho/12 + phase) of the distance rho to the center, with a
/// seeded phase. Uniform: constant 0.5.
inline SynthEyeImage gen_eye_image(int size, EyePattern pattern, double cx, double cy, double r_pupil, double r_iris,
                                   std::uint64_t seed, const EyeLabel& label = EyeLabel("synth_eye", Side::Left),
                                   const std::string& sample_id = "synth_eye_L_img") {
    if (size <= 0) throw usage_error("image size must be positive");
    if (!(r_pupil > 0.0) || !(r_pupil < r_iris))
        throw invalid_geometry_error("need 0 < r_pupil < r_iris for a synthetic eye");
    if (cx - r_iris < 0.0 || cy - r_iris < 0.0 || cx + r_iris > size - 1 || cy + r_iris > size - 1)
        throw invalid_geometry_error("iris circle does not fit inside the image");

    Rng rng(sub_seed(seed, detail::kStreamImage));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::vector<double> pixels(static_cast<std::size_t>(size) * size, 0.5);
    if (pattern == EyePattern::Radial) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double rho = std::hypot(x - cx, y - cy);
                pixels[static_cast<std::size_t>(y) * size + x] = 0.5 + 0.3 * std::sin(rho / 12.0 + phase);
            }
        }
    }
    return {EyeImage(size, size, std::move(pixels), label, sample_id), Circle{cx, cy, r_pupil}, Circle{cx, cy, r_iris}};
}

}  // namespace iic
