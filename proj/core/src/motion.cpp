#include "kjm/motion.hpp"

#include "kjm/error.hpp"

namespace kjm {

char to_char(Limb limb) { return limb == Limb::Left ? 'L' : 'R'; }

Limb limb_from_char(char c) {
    if (c == 'L' || c == 'l') {
        return Limb::Left;
    }
    if (c == 'R' || c == 'r') {
        return Limb::Right;
    }
    fail(ErrorCode::InvalidArgument, std::string("limb must be L or R, got '") + c + "'");
}

Limb opposite(Limb limb) { return limb == Limb::Left ? Limb::Right : Limb::Left; }

std::size_t mt1_index(Limb limb) { return limb == Limb::Left ? kLMT1 : kRMT1; }
std::size_t cal_index(Limb limb) { return limb == Limb::Left ? kLCAL : kRCAL; }
std::size_t lmal_index(Limb limb) { return limb == Limb::Left ? kLLMAL : kRLMAL; }

MarkerTrajectorySet MarkerTrajectorySet::with_frames(std::size_t frames, double rate) {
    MarkerTrajectorySet set;
    for (std::size_t m = 0; m < kMarkerCount; ++m) {
        set.labels[m] = std::string(kCanonicalMarkers[m]);
    }
    set.positions.assign(frames * kMarkerCount, Vec3{});
    set.rate = rate;
    return set;
}

std::vector<double> ForcePlateRecord::channel(PlateChannel ch) const {
    std::vector<double> out(sample_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = at(i, ch);
    }
    return out;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace

bool is_simple_quadrilateral(const std::array<Vec2, 4>& c) {
    // opposite edges must not cross, and the outline must enclose area
    if (segments_intersect(c[0], c[1], c[2], c[3]) || segments_intersect(c[1], c[2], c[3], c[0])) {
        return false;
    }
    double area = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = c[i];
        const auto& b = c[(i + 1) % 4];
        area += a.x * b.y - b.x * a.y;
    }
    return area != 0.0;
}

}  // namespace kjm
