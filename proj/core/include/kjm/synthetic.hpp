#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "kjm/c3d.hpp"
#include "kjm/gait_events.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm::synth {

inline constexpr double kMarkerRate = 250.0;
inline constexpr double kAnalogRate = 2000.0;
inline constexpr std::size_t kSubsamples = 8;
inline constexpr std::size_t kShapeCount = 6;
/// Force at the scripted contact sample; comfortably above the 20 N strike threshold.
inline constexpr double kContactForce = 40.0;

enum class TrialKind { Walk, Run, Sidestep };

const char* to_string(TrialKind k);
TrialKind trial_kind_from_string(std::string_view s);

struct TrialRecipe {
    TrialKind kind = TrialKind::Walk;
    Limb stance_limb = Limb::Right;
    double approach_speed = 1.5;    // m/s
    double turn_angle = 0.0;        // degrees, positive = left
    std::size_t stance_frames = 150;
    /// trunk lean x / y, pelvis bounce, step width, swing lift, toe-out; each in [-1, 1]
    std::array<double, kShapeCount> shape{};
    FootOrientation contact = FootOrientation::HeelDown;
    double noise_sd = 0.0;        // mm, marker noise
    double force_noise_sd = 0.0;  // N, plate noise
    std::uint64_t seed = 0;

    [[nodiscard]] double stance_duration() const { return static_cast<double>(stance_frames) / kMarkerRate; }
    void validate() const;
};

struct DrawOptions {
    Limb stance_limb = Limb::Right;
    double noise_sd = 0.0;
    double force_noise_sd = 0.0;
    /// share of sidestep draws that turn toward the stance side
    double crossover_rate = 0.05;
};

TrialRecipe draw_recipe(TrialKind kind, std::uint64_t seed, const DrawOptions& options = {});

/// Same trial reflected through the sagittal plane (y -> -y, left <-> right).
TrialRecipe mirror(const TrialRecipe& recipe);

struct SyntheticTrial {
    TrialRecipe recipe;
    TrialInput input;
    /// scripted events
    std::size_t fs_sample = 0;
    std::size_t to_sample = 0;
    std::size_t fs_frame = 0;
    std::size_t to_frame = 0;
    Movement expected_movement = Movement::Walk;
};

SyntheticTrial generate_trial(const TrialRecipe& recipe, std::string source_id = {});

/// Knee moments (x, y, z) in N*mm at stance fraction s; defined for any real s.
std::array<double, 3> kjm_at(const TrialRecipe& recipe, double s);
/// 3 x length, sampled at `length` equally spaced points over [0, 1].
std::vector<double> kjm_waveforms(const TrialRecipe& recipe, std::size_t length = kKjmLength);
/// Plate channels (Fx, Fy, Fz, Mx, My, Mz) at stance fraction s in [0, 1); zero outside.
std::array<double, 6> grfm_at(const TrialRecipe& recipe, double s);

std::vector<TrialRecipe> draw_recipes(std::size_t n, TrialKind kind, std::uint64_t seed,
                                      const DrawOptions& options = {});

struct SyntheticSample {
    SyntheticTrial trial;
    /// closed-form 3 x 90 knee moments for the stance limb
    std::vector<double> kjm;
};

std::vector<SyntheticSample> generate_dataset(std::size_t n, TrialKind kind, std::uint64_t seed,
                                              const DrawOptions& options = {});

/// Markers as points, knee moments as "RKneeMoment"/"LKneeMoment" points, one force plate.
c3d::File to_c3d(const SyntheticTrial& trial);

/// source id of the n-th trial of a run, e.g. "sidestep_000042"
std::string source_id(TrialKind kind, std::size_t index);

}  // namespace kjm::synth
