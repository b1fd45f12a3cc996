#include <gtest/gtest.h>

#include <set>

#include "kjm/gait_events.hpp"
#include "kjm/synthetic.hpp"
#include "kjm/trial_prep.hpp"

using namespace kjm;

namespace {

std::size_t partner(std::size_t marker) {
    // C7 and SACR sit on the midline; the limb markers come in L/R pairs
    return marker < 2 ? marker : (marker % 2 == 0 ? marker + 1 : marker - 1);
}

}  // namespace

TEST(Synthetic, SameRecipeSameTrial) {
    const auto r = synth::draw_recipe(synth::TrialKind::Sidestep, 42);
    const auto a = synth::generate_trial(r, "a");
    const auto b = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Sidestep, 42), "a");
    EXPECT_EQ(a.input.markers.positions, b.input.markers.positions);
    EXPECT_EQ(a.input.plate.channels, b.input.plate.channels);
    EXPECT_EQ(c3d::write(synth::to_c3d(a)), c3d::write(synth::to_c3d(b)));
}

TEST(Synthetic, NoiseIsSeeded) {
    synth::DrawOptions opt;
    opt.noise_sd = 1.0;
    const auto a = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Walk, 3, opt));
    const auto b = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Walk, 3, opt));
    const auto clean = synth::generate_trial(synth::draw_recipe(synth::TrialKind::Walk, 3));
    EXPECT_EQ(a.input.markers.positions, b.input.markers.positions);
    EXPECT_NE(a.input.markers.positions, clean.input.markers.positions);
}

TEST(Synthetic, KindsClassifyAsScripted) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        for (auto kind : {synth::TrialKind::Walk, synth::TrialKind::Run, synth::TrialKind::Sidestep}) {
            const auto t = synth::generate_trial(synth::draw_recipe(kind, seed));
            const auto s = prepare_trial(t.input);
            EXPECT_EQ(s.movement, t.expected_movement) << synth::to_string(kind) << " seed " << seed;
            EXPECT_EQ(s.orientation, t.recipe.contact);
            if (kind == synth::TrialKind::Walk) {
                EXPECT_EQ(s.movement, Movement::Walk);
                EXPECT_EQ(s.orientation, FootOrientation::HeelDown);
            }
        }
    }
}

TEST(Synthetic, MirrorReflectsGeometryAndKeepsMoments) {
    const auto r = synth::draw_recipe(synth::TrialKind::Sidestep, 9);
    const auto m = synth::mirror(r);
    EXPECT_EQ(m.stance_limb, Limb::Left);
    EXPECT_EQ(synth::mirror(m).stance_limb, r.stance_limb);
    EXPECT_EQ(synth::mirror(m).turn_angle, r.turn_angle);
    EXPECT_EQ(synth::kjm_waveforms(m), synth::kjm_waveforms(r));

    const auto a = synth::generate_trial(r);
    const auto b = synth::generate_trial(m);
    ASSERT_EQ(a.input.markers.frame_count(), b.input.markers.frame_count());
    for (std::size_t f = 0; f < a.input.markers.frame_count(); ++f) {
        for (std::size_t k = 0; k < kMarkerCount; ++k) {
            const auto& p = a.input.markers.at(f, k);
            const auto& q = b.input.markers.at(f, partner(k));
            EXPECT_NEAR(q.x, p.x, 1e-9);
            EXPECT_NEAR(q.y, -p.y, 1e-9);
            EXPECT_NEAR(q.z, p.z, 1e-9);
        }
    }
    const auto sa = prepare_trial(a.input);
    const auto sb = prepare_trial(b.input);
    EXPECT_EQ(sb.stance_limb, Limb::Left);
    EXPECT_EQ(sa.movement == Movement::SidestepL, sb.movement == Movement::SidestepR);
}

TEST(Synthetic, SidestepBatchBookkeeping) {
    const auto recipes = synth::draw_recipes(1500, synth::TrialKind::Sidestep, 20240611);
    ASSERT_EQ(recipes.size(), 1500u);
    std::set<std::uint64_t> seeds;
    std::size_t crossovers = 0;
    for (const auto& r : recipes) {
        seeds.insert(r.seed);
        // a right-limb sidestep cuts left; turning right is a crossover
        if (r.turn_angle < 0.0) ++crossovers;
        EXPECT_GE(std::abs(r.turn_angle), 25.0);
        EXPECT_LE(std::abs(r.turn_angle), 55.0);
    }
    EXPECT_EQ(seeds.size(), 1500u);
    // 5 % nominal rate; binomial sd is about 8.4
    EXPECT_GT(crossovers, 40u);
    EXPECT_LT(crossovers, 110u);
    EXPECT_EQ(synth::source_id(synth::TrialKind::Sidestep, 42), "sidestep_000042");
}

TEST(Synthetic, ClosedFormMomentsAreSampledEvenly) {
    const auto r = synth::draw_recipe(synth::TrialKind::Run, 5);
    const auto w = synth::kjm_waveforms(r, 5);
    ASSERT_EQ(w.size(), 15u);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto v = synth::kjm_at(r, static_cast<double>(i) / 4.0);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(w[c * 5 + i], v[c]);
    }
    const auto g = synth::grfm_at(r, 1.5);
    for (double v : g) EXPECT_EQ(v, 0.0);
}
