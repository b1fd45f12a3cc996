#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "kjm/motion.hpp"

namespace kjm {

enum class FootOrientation { HeelDown, Flat, ToeDown };

const char* to_string(FootOrientation o);
FootOrientation orientation_from_string(std::string_view s);

struct EventThresholds {
    double fs_force = 20.0;  // N
    double fs_hold = 0.025;  // s
    double to_force = 10.0;  // N

    void validate() const;
};

struct GaitEvents {
    /// analog sample indices
    std::size_t foot_strike = 0;
    std::size_t toe_off = 0;
    /// the same events on the marker timeline
    std::size_t fs_frame = 0;
    std::size_t to_frame = 0;
    Limb stance_limb = Limb::Right;
    FootOrientation orientation = FootOrientation::Flat;
};

/// First index i with fz[j] > fs_force for every j in [i, i + round(fs_hold * rate)).
std::size_t detect_foot_strike(std::span<const double> fz, double rate, const EventThresholds& th = {});

/// First index i > after with fz[i] < to_force.
std::size_t detect_toe_off(std::span<const double> fz, double rate, std::size_t after,
                           const EventThresholds& th = {});

/// Analog sample -> nearest marker frame.
std::size_t analog_to_frame(std::size_t sample, double analog_rate, double marker_rate);

/// Boundary-inclusive point-in-quadrilateral test on the horizontal centroid
/// of the limb's MT1, CAL and LMAL markers.
bool foot_within_plate(const MarkerTrajectorySet& markers, Limb limb, std::size_t frame,
                       const std::array<Vec2, 4>& corners);

FootOrientation classify_foot_orientation(const MarkerTrajectorySet& markers, Limb limb, std::size_t fs,
                                          std::size_t to);

/// Full event pass: Fz thresholds, plate-contact limb, orientation at contact.
GaitEvents detect_events(const ForcePlateRecord& plate, const MarkerTrajectorySet& markers,
                         const EventThresholds& th = {});

}  // namespace kjm
