#include "kjm/gait_events.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kjm/error.hpp"

namespace kjm {

const char* to_string(FootOrientation o) {
    switch (o) {
        case FootOrientation::HeelDown: return "HD";
        case FootOrientation::Flat: return "FL";
        case FootOrientation::ToeDown: return "TD";
    }
    return "?";
}

FootOrientation orientation_from_string(std::string_view s) {
    if (s == "HD") {
        return FootOrientation::HeelDown;
    }
    if (s == "FL") {
        return FootOrientation::Flat;
    }
    if (s == "TD") {
        return FootOrientation::ToeDown;
    }
    fail(ErrorCode::InvalidArgument, "unknown foot orientation '" + std::string(s) + "'");
}

void EventThresholds::validate() const {
    if (!(to_force > 0.0) || !(fs_force > to_force)) {
        fail(ErrorCode::InvalidArgument, "thresholds require fs_force > to_force > 0");
    }
    if (!(fs_hold > 0.0)) {
        fail(ErrorCode::InvalidArgument, "fs_hold must be positive");
    }
}

std::size_t detect_foot_strike(std::span<const double> fz, double rate, const EventThresholds& th) {
    th.validate();
    if (!(rate > 0.0) || fz.empty()) {
        fail(ErrorCode::InvalidArgument, "foot strike needs a positive rate and a non-empty series");
    }
    const auto hold = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(th.fs_hold * rate)));
    std::size_t run = 0;
    for (std::size_t i = 0; i < fz.size(); ++i) {
        run = fz[i] > th.fs_force ? run + 1 : 0;
        if (run == hold) {
            return i + 1 - hold;
        }
    }
    fail(ErrorCode::NoEvent, "Fz never held above " + std::to_string(th.fs_force) + " N for " +
                                 std::to_string(hold) + " samples");
}

std::size_t detect_toe_off(std::span<const double> fz, double rate, std::size_t after, const EventThresholds& th) {
    th.validate();
    if (!(rate > 0.0)) {
        fail(ErrorCode::InvalidArgument, "toe off needs a positive rate");
    }
    for (std::size_t i = after + 1; i < fz.size(); ++i) {
        if (fz[i] < th.to_force) {
            return i;
        }
    }
    fail(ErrorCode::NoEvent, "Fz never fell below " + std::to_string(th.to_force) + " N after foot strike");
}

std::size_t analog_to_frame(std::size_t sample, double analog_rate, double marker_rate) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(sample) * marker_rate / analog_rate));
}

namespace {

Vec2 foot_centroid(const MarkerTrajectorySet& markers, Limb limb, std::size_t frame) {
    const auto& a = markers.at(frame, mt1_index(limb));
    const auto& b = markers.at(frame, cal_index(limb));
    const auto& c = markers.at(frame, lmal_index(limb));
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
    if (std::fabs(cross) > 1e-9 * std::max(1.0, len2)) {
        return false;
    }
    const double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    return dot >= -1e-12 && dot <= len2 * (1.0 + 1e-12);
}

bool inside_inclusive(const Vec2& p, const std::array<Vec2, 4>& poly) {
    for (std::size_t i = 0; i < 4; ++i) {
        if (on_segment(p, poly[i], poly[(i + 1) % 4])) {
            return true;
        }
    }
    int winding = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % 4];
        const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if (a.y <= p.y) {
            if (b.y > p.y && side > 0) {
                ++winding;
            }
        } else if (b.y <= p.y && side < 0) {
            --winding;
        }
    }
    return winding != 0;
}

}  // namespace

bool foot_within_plate(const MarkerTrajectorySet& markers, Limb limb, std::size_t frame,
                       const std::array<Vec2, 4>& corners) {
    if (frame >= markers.frame_count()) {
        return false;
    }
    return inside_inclusive(foot_centroid(markers, limb, frame), corners);
}

FootOrientation classify_foot_orientation(const MarkerTrajectorySet& markers, Limb limb, std::size_t fs,
                                          std::size_t to) {
    if (to <= fs || to - fs < 4) {
        fail(ErrorCode::DegenerateStance, "stance shorter than 4 frames");
    }
    if (to >= markers.frame_count()) {
        fail(ErrorCode::WindowOutOfRange, "toe off beyond marker record");
    }
    const std::size_t cal = cal_index(limb);
    const std::size_t mt1 = mt1_index(limb);
    auto height_gap = [&](std::size_t f) { return markers.at(f, cal).z - markers.at(f, mt1).z; };

    const double stance = static_cast<double>(to - fs);
    const double lo = static_cast<double>(fs) + 0.25 * stance;
    const double hi = static_cast<double>(fs) + 0.30 * stance;
    auto first = static_cast<std::size_t>(std::ceil(lo));
    auto last = static_cast<std::size_t>(std::floor(hi));
    if (first > last) {
        first = last = static_cast<std::size_t>(std::llround(0.5 * (lo + hi)));
    }
    double band = 0.0;
    for (std::size_t f = first; f <= last; ++f) {
        band += std::fabs(height_gap(f));
    }
    band /= static_cast<double>(last - first + 1);

    double zmin = markers.at(fs, cal).z;
    double zmax = zmin;
    for (std::size_t f = fs; f <= to; ++f) {
        for (std::size_t m : {cal, mt1}) {
            zmin = std::min(zmin, markers.at(f, m).z);
            zmax = std::max(zmax, markers.at(f, m).z);
        }
    }
    const double tolerance = 0.01 * (zmax - zmin);
    const double gap = height_gap(fs);
    if (gap > band + tolerance) {
        return FootOrientation::HeelDown;
    }
    if (gap < -(band + tolerance)) {
        return FootOrientation::ToeDown;
    }
    return FootOrientation::Flat;
}

GaitEvents detect_events(const ForcePlateRecord& plate, const MarkerTrajectorySet& markers,
                         const EventThresholds& th) {
    const auto fz = plate.channel(kFz);
    GaitEvents ev;
    ev.foot_strike = detect_foot_strike(fz, plate.rate, th);
    ev.toe_off = detect_toe_off(fz, plate.rate, ev.foot_strike, th);
    ev.fs_frame = analog_to_frame(ev.foot_strike, plate.rate, markers.rate);
    ev.to_frame = analog_to_frame(ev.toe_off, plate.rate, markers.rate);
    if (ev.to_frame >= markers.frame_count()) {
        fail(ErrorCode::WindowOutOfRange, "toe off beyond marker record");
    }
    const bool left = foot_within_plate(markers, Limb::Left, ev.fs_frame, plate.corners);
    const bool right = foot_within_plate(markers, Limb::Right, ev.fs_frame, plate.corners);
    if (left == right) {
        fail(ErrorCode::FootOffPlate, left ? "both feet within plate corners at foot strike"
                                           : "no foot within plate corners at foot strike");
    }
    ev.stance_limb = left ? Limb::Left : Limb::Right;
    ev.orientation = classify_foot_orientation(markers, ev.stance_limb, ev.fs_frame, ev.to_frame);
    return ev;
}

}  // namespace kjm
