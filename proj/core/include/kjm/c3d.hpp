#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kjm/motion.hpp"

namespace kjm::c3d {

enum class ScalarType : std::int8_t {
    Char = -1,
    Int8 = 1,
    Int16 = 2,
    Float32 = 4,
};

std::size_t type_width(ScalarType type);

/// One parameter of the parameter section. Payload holds the raw little-endian bytes.
struct ParameterRecord {
    std::string group_name;
    std::string name;
    ScalarType type = ScalarType::Int16;
    std::vector<int> dimensions;
    std::vector<std::uint8_t> payload;
    std::string description;

    [[nodiscard]] std::size_t element_count() const;
    [[nodiscard]] std::vector<float> as_floats() const;
    [[nodiscard]] std::vector<std::int16_t> as_int16() const;
    /// Char arrays: splits on the first dimension, trailing blanks removed.
    [[nodiscard]] std::vector<std::string> as_strings() const;

    static ParameterRecord floats(std::string group, std::string name, std::vector<int> dims,
                                  std::span<const float> values);
    static ParameterRecord int16s(std::string group, std::string name, std::vector<int> dims,
                                  std::span<const std::int16_t> values);
    /// Fixed-width char matrix; width 0 uses the longest string.
    static ParameterRecord strings(std::string group, std::string name, std::span<const std::string> values,
                                   int width = 0);

    friend bool operator==(const ParameterRecord&, const ParameterRecord&) = default;
};

struct Header {
    int point_count = 0;
    int analog_channels = 0;
    int analog_samples_per_frame = 0;
    int first_frame = 1;
    int last_frame = 1;
    /// Magnitude of the point scale; the storage format is an encoding detail.
    float point_scale = 1.0f;
    float point_rate = 0.0f;
    int data_start_block = 0;

    friend bool operator==(const Header&, const Header&) = default;
};

struct PointSample {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;
    /// Negative marks an invalid sample.
    float residual = 0.0f;

    friend bool operator==(const PointSample&, const PointSample&) = default;
};

struct File {
    Header header;
    std::vector<ParameterRecord> parameters;
    /// frames x points
    std::vector<PointSample> point_frames;
    /// frames x subsamples x channels, raw units
    std::vector<float> analog_frames;

    [[nodiscard]] std::size_t frame_count() const;
    [[nodiscard]] double analog_rate() const;
    [[nodiscard]] const ParameterRecord* find(std::string_view group, std::string_view name) const;
    ParameterRecord* find(std::string_view group, std::string_view name);
    /// Replaces an existing group/name pair or appends.
    void set(ParameterRecord record);

    [[nodiscard]] const PointSample& point(std::size_t frame, std::size_t index) const {
        return point_frames[frame * static_cast<std::size_t>(header.point_count) + index];
    }

    /// Checks the type invariants; throws MalformedHeader / MalformedParameter.
    void validate() const;

    friend bool operator==(const File&, const File&) = default;
};

File parse(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write(const File& file);

File read_file(const std::filesystem::path& path);
void write_file(const File& file, const std::filesystem::path& path);

/// Analog samples (frame-major, subsample, channel) after (raw - offset) * scale * gen_scale.
std::vector<double> calibrated_analog(const File& file);

struct LabelMatch {
    /// Optional subject prefix, e.g. "P012:".
    std::string prefix;
};

/// Point labels normalized for matching: trimmed, upper-case.
std::string normalize_label(std::string_view label);

std::optional<std::size_t> find_point(const File& file, std::string_view label, const LabelMatch& match = {});

MarkerTrajectorySet extract_markers(const File& file, const LabelMatch& match = {});

/// Any single point trajectory (e.g. a model output such as knee moments), frames x xyz.
std::vector<Vec3> extract_point_series(const File& file, std::string_view label, const LabelMatch& match = {});

ForcePlateRecord extract_force_plate(const File& file, std::size_t plate_index);

}  // namespace kjm::c3d
