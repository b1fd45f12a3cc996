#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace kjm {

inline constexpr std::size_t kImageSize = 227;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImagePixels = kImageChannels * kImageSize * kImageSize;

enum class CenterMode { PerTrial, None };

/// Per-axis linear map fitted on a training set; frozen into model bundles.
struct ScalerParams {
    CenterMode center = CenterMode::PerTrial;
    std::array<double, 3> axis_min{};
    std::array<double, 3> axis_max{};

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

/// 227 x 227 RGB image, channel-major (R = x, G = y, B = z), values in [0, 255].
struct EncodedImage {
    std::vector<float> pixels = std::vector<float>(kImagePixels, 0.0f);

    [[nodiscard]] float at(std::size_t channel, std::size_t row, std::size_t col) const {
        return pixels[(channel * kImageSize + row) * kImageSize + col];
    }
    float& at(std::size_t channel, std::size_t row, std::size_t col) {
        return pixels[(channel * kImageSize + row) * kImageSize + col];
    }

    friend bool operator==(const EncodedImage&, const EncodedImage&) = default;
};

/// Mean position over all markers and samples, per axis.
std::array<double, 3> trial_center(std::span<const double> predictor);

/// `rows` is n x 3,000 row-major.
ScalerParams fit_scaler(std::span<const float> rows);

/// Pre-warp 8-wide x 125-high grid per channel (channel, sample, marker), clamped to [0, 255].
std::vector<double> channel_grid(std::span<const double> predictor, const ScalerParams& scaler);

EncodedImage encode_trial(std::span<const double> predictor, const ScalerParams& scaler);
EncodedImage encode_trial(std::span<const float> predictor, const ScalerParams& scaler);

/// Inverse warp and inverse linear map; returns centred 8 x 125 x 3 coordinates.
std::vector<double> decode_image(const EncodedImage& image, const ScalerParams& scaler);

/// 8-bit RGB PNG, values rounded.
void write_png(const EncodedImage& image, const std::filesystem::path& path);

}  // namespace kjm
