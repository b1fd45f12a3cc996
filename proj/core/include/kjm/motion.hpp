#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kjm {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class Limb { Left, Right };

char to_char(Limb limb);
Limb limb_from_char(char c);
Limb opposite(Limb limb);

inline constexpr std::size_t kMarkerCount = 8;

/// Canonical marker order; also the image column order.
inline constexpr std::array<std::string_view, kMarkerCount> kCanonicalMarkers = {
    "C7", "SACR", "LMT1", "RMT1", "LCAL", "RCAL", "LLMAL", "RLMAL"};

enum MarkerIndex : std::size_t {
    kC7 = 0,
    kSACR = 1,
    kLMT1 = 2,
    kRMT1 = 3,
    kLCAL = 4,
    kRCAL = 5,
    kLLMAL = 6,
    kRLMAL = 7,
};

std::size_t mt1_index(Limb limb);
std::size_t cal_index(Limb limb);
std::size_t lmal_index(Limb limb);

/// Eight labelled trajectories in canonical order, positions in mm.
struct MarkerTrajectorySet {
    std::array<std::string, kMarkerCount> labels;
    /// frames x 8, row-major
    std::vector<Vec3> positions;
    double rate = 0.0;

    [[nodiscard]] std::size_t frame_count() const { return positions.size() / kMarkerCount; }
    [[nodiscard]] const Vec3& at(std::size_t frame, std::size_t marker) const {
        return positions[frame * kMarkerCount + marker];
    }
    Vec3& at(std::size_t frame, std::size_t marker) { return positions[frame * kMarkerCount + marker]; }

    static MarkerTrajectorySet with_frames(std::size_t frames, double rate);
};

enum PlateChannel : std::size_t { kFx = 0, kFy, kFz, kMx, kMy, kMz };

inline constexpr std::array<std::string_view, 6> kPlateChannelNames = {"Fx", "Fy", "Fz", "Mx", "My", "Mz"};

/// Six calibrated force-plate channels (N, N*mm) plus the plate outline.
struct ForcePlateRecord {
    /// samples x 6, row-major in PlateChannel order
    std::vector<double> channels;
    double rate = 0.0;
    std::array<Vec2, 4> corners{};

    [[nodiscard]] std::size_t sample_count() const { return channels.size() / 6; }
    [[nodiscard]] double at(std::size_t sample, PlateChannel ch) const { return channels[sample * 6 + ch]; }
    [[nodiscard]] std::vector<double> channel(PlateChannel ch) const;
};

/// True when the four corners form a simple (non self-intersecting) quadrilateral.
bool is_simple_quadrilateral(const std::array<Vec2, 4>& corners);

}  // namespace kjm
