#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kjm/trial_prep.hpp"

namespace kjm {

inline constexpr std::uint16_t kDatasetVersion = 1;

/// "KTB1" container; layout documented in docs/file_formats.md.
std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace kjm
