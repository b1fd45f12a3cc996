#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "kjm/error.hpp"
#include "kjm/spline.hpp"
#include "kjm/synthetic.hpp"
#include "kjm/trial_prep.hpp"

using namespace kjm;

namespace {

/// Straight path along +x at `speed`, optionally bending by `turn_deg` at stance midpoint.
MarkerTrajectorySet path(double speed, double turn_deg, std::size_t frames = 200) {
    auto m = MarkerTrajectorySet::with_frames(frames, 250.0);
    const double mid = static_cast<double>(frames) / 2.0;
    const double heading = turn_deg * M_PI / 180.0;
    for (std::size_t f = 0; f < frames; ++f) {
        const double t = static_cast<double>(f);
        double x = speed * 1000.0 * t / 250.0;
        double y = 0.0;
        if (t > mid) {
            const double d = speed * 1000.0 * (t - mid) / 250.0;
            x = speed * 1000.0 * mid / 250.0 + d * std::cos(heading);
            y = d * std::sin(heading);
        }
        for (std::size_t k = 0; k < kMarkerCount; ++k) m.at(f, k) = {x, y, 1000.0};
    }
    return m;
}

}  // namespace

TEST(Spline, ReproducesKnotsAndLines) {
    const std::vector<double> line = {1.0, 3.0, 5.0, 7.0, 9.0};
    NaturalCubicSpline s(line);
    EXPECT_NEAR(s(2.5), 6.0, 1e-12);
    EXPECT_NEAR(s(0.0), 1.0, 1e-12);
    const auto r = resample(line, 0.0, 4.0, 9);
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], 1.0 + static_cast<double>(i), 1e-12);
}

TEST(Spline, NaturalSplineMatchesHandSolution) {
    // knots (0,0), (1,1), (2,0): natural end conditions give M1 = -3, so
    // S(0.5) = 0.5 + (-3) * (0.125 - 0.5) / 6 = 0.6875
    const std::vector<double> y = {0.0, 1.0, 0.0};
    EXPECT_NEAR(NaturalCubicSpline(y)(0.5), 0.6875, 1e-12);
}

TEST(ClassifyMovement, WalkRunAndSidestep) {
    EXPECT_EQ(classify_movement(path(1.5, 0.0), 60, 140, Limb::Right), Movement::Walk);
    EXPECT_EQ(classify_movement(path(3.0, 0.0), 60, 140, Limb::Right), Movement::Run);
    EXPECT_EQ(classify_movement(path(3.0, 30.0), 60, 140, Limb::Right), Movement::SidestepL);
    EXPECT_EQ(classify_movement(path(3.0, -30.0), 60, 140, Limb::Left), Movement::SidestepR);
    EXPECT_EQ(classify_movement(path(3.0, -30.0), 60, 140, Limb::Right), Movement::Crossover);
    EXPECT_NEAR(estimate_motion(path(3.0, 30.0), 60, 140).approach_speed, 3.0, 1e-9);
    EXPECT_NEAR(estimate_motion(path(3.0, 30.0), 60, 140).turn_angle, 30.0, 1e-9);
}

TEST(NormalizeMarkers, WindowArithmetic) {
    // start = 50 - 0.66 * 63 = 8.42; a ramp x = frame exposes the sampled positions
    auto m = MarkerTrajectorySet::with_frames(120, 250.0);
    for (std::size_t f = 0; f < 120; ++f) {
        for (std::size_t k = 0; k < kMarkerCount; ++k) m.at(f, k) = {static_cast<double>(f), 7.0, 0.0};
    }
    const auto p = normalize_markers(m, 50, 113);
    ASSERT_EQ(p.size(), kPredictorFeatures);
    EXPECT_NEAR(p[0], 8.42, 1e-9);
    EXPECT_NEAR(p[(0 * kPredictorSamples + 124) * 3], 113.0, 1e-9);
    EXPECT_NEAR(p[(3 * kPredictorSamples + 62) * 3], 8.42 + 62.0 * (113.0 - 8.42) / 124.0, 1e-9);
    EXPECT_EQ(p[(5 * kPredictorSamples + 10) * 3 + 1], 7.0);
}

TEST(NormalizeMarkers, InsufficientLeadIn) {
    const auto m = MarkerTrajectorySet::with_frames(120, 250.0);
    try {
        normalize_markers(m, 10, 100);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientLeadIn);
    }
}

TEST(NormalizeMarkers, SinusoidMatchesClosedForm) {
    auto m = MarkerTrajectorySet::with_frames(200, 250.0);
    auto f_of = [](double frame) { return 100.0 * std::sin(2.0 * M_PI * 2.0 * frame / 250.0) + 500.0; };
    for (std::size_t f = 0; f < 200; ++f) {
        for (std::size_t k = 0; k < kMarkerCount; ++k) m.at(f, k) = {f_of(static_cast<double>(f)), 0.0, 0.0};
    }
    const auto p = normalize_markers(m, 80, 180);
    const double start = 80.0 - 0.66 * 100.0;
    for (std::size_t i = 0; i < kPredictorSamples; ++i) {
        const double frame = start + static_cast<double>(i) * (180.0 - start) / 124.0;
        const double want = f_of(frame);
        EXPECT_NEAR(p[i * 3], want, 1e-3 * std::abs(want));
    }
}

TEST(NormalizeResponse, GrfmWindowAndConstantKjm) {
    std::vector<double> ramp(800);
    std::iota(ramp.begin(), ramp.end(), 0.0);
    const auto g = normalize_response(ramp, 1, 100.0, 600.0, ResponseKind::GRFM);
    ASSERT_EQ(g.size(), kGrfmLength);
    EXPECT_NEAR(g.front(), 20.0, 1e-9);
    EXPECT_NEAR(g.back(), 600.0, 1e-9);

    const std::vector<double> flat(300, 50.0);
    const auto k = normalize_response(flat, 1, 20.0, 250.0, ResponseKind::KJM);
    ASSERT_EQ(k.size(), kKjmLength);
    for (double v : k) EXPECT_NEAR(v, 50.0, 1e-12);
}

TEST(PrepareTrial, OracleKjmMatchesClosedForm) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto t = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Sidestep, seed));
        if (t.expected_movement == Movement::Crossover) continue;
        const auto s = prepare_trial(t.input);
        const auto* block = s.response(ResponseKind::KJM);
        ASSERT_NE(block, nullptr);
        const auto truth = synth::kjm_waveforms(t.recipe);
        double peak = 0.0;
        for (double v : truth) peak = std::max(peak, std::abs(v));
        for (std::size_t i = 0; i < truth.size(); ++i) EXPECT_NEAR(block->values[i], truth[i], 1e-3 * peak);
        EXPECT_EQ(s.movement, t.expected_movement);
        EXPECT_EQ(s.orientation, t.recipe.contact);
    }
}

TEST(AssembleDataset, DuplicatesNonFiniteAndCrossovers) {
    std::vector<TrialSample> trials;
    for (std::uint64_t seed = 1; trials.size() < 3; ++seed) {
        const auto t = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Walk, seed),
                                             "walk_" + std::to_string(seed));
        trials.push_back(prepare_trial(t.input));
    }
    trials.push_back(trials[0]);
    trials.back().source_id = "copy";
    trials.push_back(trials[1]);
    trials.back().source_id = "bad";
    trials.back().predictor[0] += 1.0;
    trials.back().responses[0].values[3] = std::nan("");
    trials.push_back(trials[2]);
    trials.back().source_id = "cross";
    trials.back().movement = Movement::Crossover;

    HygieneLog log;
    const auto ds = assemble_dataset(trials, Movement::Walk, Limb::Right, ResponseKind::KJM, &log);
    EXPECT_EQ(ds.rows(), 3u);
    EXPECT_EQ(ds.X.size(), 3 * kPredictorFeatures);
    EXPECT_EQ(ds.waveform_names, kjm_waveform_names(Limb::Right));
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& r : log) got.insert({r.source_id, r.reason});
    EXPECT_EQ(got, (std::set<std::pair<std::string, std::string>>{
                       {"copy", "Duplicate"}, {"bad", "NonFinite"}, {"cross", "Crossover"}}));
}

TEST(Split, EightyTwentyArithmeticAndRounding) {
    const auto p = split_indices(1527, 0.8, 3);
    EXPECT_EQ(p.train.size(), 1222u);
    EXPECT_EQ(p.test.size(), 305u);
    const auto small = split_indices(5, 0.8, 3);
    EXPECT_EQ(small.train.size(), 4u);
    EXPECT_EQ(small.test.size(), 1u);
    const auto again = split_indices(1527, 0.8, 3);
    EXPECT_EQ(p.train, again.train);
    EXPECT_EQ(p.test, again.test);
    std::vector<std::size_t> all = p.train;
    all.insert(all.end(), p.test.begin(), p.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(Kfold, BalancedDisjointCover) {
    const auto ten = kfold_indices(10, 5, 1);
    std::vector<int> hits(10, 0);
    for (const auto& p : ten) {
        EXPECT_EQ(p.test.size(), 2u);
        EXPECT_EQ(p.train.size(), 8u);
        for (auto r : p.test) ++hits[r];
    }
    for (int h : hits) EXPECT_EQ(h, 1);

    const auto big = kfold_indices(1527, 5, 1);
    std::vector<std::size_t> sizes;
    for (const auto& p : big) sizes.push_back(p.test.size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{306, 306, 305, 305, 305}));
}
