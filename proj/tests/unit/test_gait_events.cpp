#include <gtest/gtest.h>

#include "kjm/error.hpp"
#include "kjm/gait_events.hpp"
#include "kjm/synthetic.hpp"

using namespace kjm;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoError;
}

MarkerTrajectorySet foot_at(Limb limb, double x, double y) {
    auto m = MarkerTrajectorySet::with_frames(1, 250.0);
    for (auto idx : {mt1_index(limb), cal_index(limb), lmal_index(limb)}) m.at(0, idx) = {x, y, 0.0};
    return m;
}

const std::array<Vec2, 4> kSquare = {{{0.0, 0.0}, {400.0, 0.0}, {400.0, 300.0}, {0.0, 300.0}}};

}  // namespace

TEST(FootStrike, StepAtSample100) {
    std::vector<double> fz(400, 0.0);
    std::fill(fz.begin() + 100, fz.end(), 30.0);
    EXPECT_EQ(detect_foot_strike(fz, 2000.0), 100u);
}

TEST(FootStrike, NeverAboveThreshold) {
    const std::vector<double> fz(400, 5.0);
    EXPECT_EQ(code_of([&] { detect_foot_strike(fz, 2000.0); }), ErrorCode::NoEvent);
}

TEST(FootStrike, PulseShorterThanHold) {
    // 0.025 s at 2000 Hz needs 50 samples above 20 N
    std::vector<double> fz(400, 0.0);
    std::fill(fz.begin() + 100, fz.begin() + 130, 30.0);
    EXPECT_EQ(code_of([&] { detect_foot_strike(fz, 2000.0); }), ErrorCode::NoEvent);
    std::fill(fz.begin() + 200, fz.begin() + 250, 30.0);
    EXPECT_EQ(detect_foot_strike(fz, 2000.0), 200u);
}

TEST(ToeOff, DropAfterStance) {
    std::vector<double> fz(800, 0.0);
    std::fill(fz.begin() + 100, fz.begin() + 600, 30.0);
    EXPECT_EQ(detect_toe_off(fz, 2000.0, 100), 600u);
}

TEST(ToeOff, ForceNeverDrops) {
    std::vector<double> fz(800, 0.0);
    std::fill(fz.begin() + 100, fz.end(), 30.0);
    EXPECT_EQ(code_of([&] { detect_toe_off(fz, 2000.0, 100); }), ErrorCode::NoEvent);
}

TEST(ToeOff, ShortPulseWithReducedHold) {
    std::vector<double> fz(300, 0.0);
    std::fill(fz.begin() + 50, fz.begin() + 70, 25.0);
    EventThresholds th;
    th.fs_hold = 0.005;  // 10 samples
    const auto fs = detect_foot_strike(fz, 2000.0, th);
    EXPECT_EQ(fs, 50u);
    EXPECT_EQ(detect_toe_off(fz, 2000.0, fs, th), 70u);
}

TEST(FootWithinPlate, InsideOutsideAndEdge) {
    EXPECT_TRUE(foot_within_plate(foot_at(Limb::Right, 200.0, 150.0), Limb::Right, 0, kSquare));
    EXPECT_FALSE(foot_within_plate(foot_at(Limb::Right, 1200.0, 150.0), Limb::Right, 0, kSquare));
    EXPECT_TRUE(foot_within_plate(foot_at(Limb::Left, 400.0, 100.0), Limb::Left, 0, kSquare));
    EXPECT_TRUE(foot_within_plate(foot_at(Limb::Left, 0.0, 0.0), Limb::Left, 0, kSquare));
}

TEST(FootOrientation, ConstructedGeometries) {
    auto set = [](double heel_at_contact, double toe_at_contact) {
        auto m = MarkerTrajectorySet::with_frames(100, 250.0);
        for (std::size_t f = 0; f < 100; ++f) {
            const double fade = f < 20 ? 1.0 - static_cast<double>(f) / 20.0 : 0.0;
            m.at(f, cal_index(Limb::Right)) = {0.0, 0.0, 40.0 + heel_at_contact * fade};
            m.at(f, mt1_index(Limb::Right)) = {200.0, 0.0, 40.0 + toe_at_contact * fade};
        }
        return m;
    };
    EXPECT_EQ(classify_foot_orientation(set(40.0, 0.0), Limb::Right, 10, 90), FootOrientation::HeelDown);
    EXPECT_EQ(classify_foot_orientation(set(0.0, 0.0), Limb::Right, 10, 90), FootOrientation::Flat);
    EXPECT_EQ(classify_foot_orientation(set(0.0, 40.0), Limb::Right, 10, 90), FootOrientation::ToeDown);
}

TEST(DetectEvents, OracleWalkIsExactAndHeelDown) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (auto limb : {Limb::Left, Limb::Right}) {
            synth::DrawOptions opt;
            opt.stance_limb = limb;
            const auto t = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Walk, seed, opt));
            const auto ev = detect_events(t.input.plate, t.input.markers);
            EXPECT_EQ(ev.foot_strike, t.fs_sample);
            EXPECT_EQ(ev.toe_off, t.to_sample);
            EXPECT_EQ(ev.fs_frame, t.fs_frame);
            EXPECT_EQ(ev.to_frame, t.to_frame);
            EXPECT_EQ(ev.stance_limb, limb);
            EXPECT_EQ(ev.orientation, FootOrientation::HeelDown);
        }
    }
}

TEST(DetectEvents, AnalogToFrame) {
    EXPECT_EQ(analog_to_frame(800, 2000.0, 250.0), 100u);
    EXPECT_EQ(analog_to_frame(803, 2000.0, 250.0), 100u);
    EXPECT_EQ(analog_to_frame(805, 2000.0, 250.0), 101u);
}
