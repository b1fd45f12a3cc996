#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kjm/cnn.hpp"
#include "kjm/image_codec.hpp"
#include "kjm/pca.hpp"

namespace kjm {

inline constexpr std::uint16_t kModelVersion = 1;

/// Everything needed to go from a 3,000-feature predictor row to a waveform.
struct ModelBundle {
    cnn::WeightStore network;
    /// one entry per waveform the network predicts (one in practice)
    std::vector<PcaModel> pca;
    ScalerParams scaler;
    /// network targets are PCA coefficients divided by this
    double target_scale = 1.0;
    /// free-form provenance: fold signature, dataset kind, split seed, ...
    std::map<std::string, std::string> info;

    friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

/// "KWT1" container; layout documented in docs/file_formats.md.
std::vector<std::uint8_t> encode_model(const ModelBundle& bundle);
ModelBundle decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace kjm
