#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kjm/gait_events.hpp"
#include "kjm/motion.hpp"

namespace kjm {

inline constexpr std::size_t kPredictorSamples = 125;
inline constexpr std::size_t kPredictorFeatures = kMarkerCount * kPredictorSamples * 3;  // 3,000
inline constexpr std::size_t kKjmLength = 90;
inline constexpr std::size_t kGrfmLength = 700;
inline constexpr double kMarkerLeadFraction = 0.66;
inline constexpr double kForceLeadFraction = 0.16;

enum class Movement { Walk, Run, SidestepL, SidestepR, Crossover };

const char* to_string(Movement m);
Movement movement_from_string(std::string_view s);

enum class ResponseKind { KJM, GRFM };

const char* to_string(ResponseKind k);
ResponseKind response_kind_from_string(std::string_view s);

struct MovementRule {
    double walk_run_speed = 2.16;   // m/s
    double sidestep_angle = 20.0;   // degrees
    double approach_window = 0.2;   // fraction of stance
    double departure_window = 0.2;  // fraction of stance

    void validate() const;
};

struct MotionEstimate {
    double approach_speed = 0.0;  // m/s
    double turn_angle = 0.0;      // degrees, positive turns left (counter-clockwise from above)
};

MotionEstimate estimate_motion(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to,
                               const MovementRule& rule = {});

Movement classify_movement(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to, Limb stance_limb,
                           const MovementRule& rule = {});

/// 8 x 125 x 3 predictor, index (marker * 125 + sample) * 3 + axis, spanning
/// [fs - 0.66 (to - fs), to] on the marker timeline.
std::vector<double> normalize_markers(const MarkerTrajectorySet& markers, std::size_t fs, std::size_t to);

/// `series` is samples x waveforms (row-major). fs/to are sample indices on the
/// series' own timeline. Returns waveforms x L, L = 90 (KJM, stance only) or
/// 700 (GRFM, from fs - 0.16 (to - fs)).
std::vector<double> normalize_response(std::span<const double> series, std::size_t waveforms, double fs, double to,
                                       ResponseKind kind);

std::vector<std::string> kjm_waveform_names(Limb limb);
std::vector<std::string> grfm_waveform_names();

struct ResponseBlock {
    ResponseKind kind = ResponseKind::KJM;
    std::vector<std::string> names;
    std::size_t length = 0;
    /// names.size() x length
    std::vector<double> values;
};

struct TrialSample {
    std::vector<double> predictor;
    std::vector<ResponseBlock> responses;
    Movement movement = Movement::Walk;
    Limb stance_limb = Limb::Right;
    FootOrientation orientation = FootOrientation::Flat;
    std::string source_id;

    [[nodiscard]] const ResponseBlock* response(ResponseKind kind) const;
};

/// Everything one capture contributes to the pipeline.
struct TrialInput {
    std::string source_id;
    MarkerTrajectorySet markers;
    ForcePlateRecord plate;
    /// knee moments (x, y, z) per marker frame, indexed by Limb; empty when absent
    std::array<std::vector<Vec3>, 2> knee_moments;
};

struct PrepOptions {
    EventThresholds thresholds;
    MovementRule rule;
};

/// Events, classification, orientation and both normalizations for one capture.
TrialSample prepare_trial(const TrialInput& input, const PrepOptions& options = {});

struct TrialMeta {
    Movement movement = Movement::Walk;
    Limb stance_limb = Limb::Right;
    FootOrientation orientation = FootOrientation::Flat;
    std::string source_id;

    friend bool operator==(const TrialMeta&, const TrialMeta&) = default;
};

struct Dataset {
    ResponseKind kind = ResponseKind::KJM;
    std::size_t waveform_length = kKjmLength;
    std::vector<std::string> waveform_names;
    /// rows x 3,000
    std::vector<float> X;
    /// rows x (W * L)
    std::vector<float> Y;
    std::vector<TrialMeta> meta;

    [[nodiscard]] std::size_t rows() const { return meta.size(); }
    [[nodiscard]] std::size_t response_width() const { return waveform_names.size() * waveform_length; }
    [[nodiscard]] std::span<const float> x_row(std::size_t i) const;
    [[nodiscard]] std::span<const float> y_row(std::size_t i) const;
    [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;
    [[nodiscard]] std::optional<std::size_t> waveform_index(std::string_view name) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct Rejection {
    std::string source_id;
    std::string reason;
};

using HygieneLog = std::vector<Rejection>;

/// Stacks trials into X/Y after hygiene: crossovers excluded, non-finite rows and
/// exact-duplicate predictors removed (first occurrence kept).
Dataset assemble_dataset(std::span<const TrialSample> trials, Movement movement, Limb stance_limb, ResponseKind kind,
                         HygieneLog* log = nullptr);

struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle; train gets round(ratio * n) rows. Index lists are sorted.
Partition split_indices(std::size_t n, double ratio, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint64_t seed);

/// k balanced folds; the first n % k folds carry one extra row.
std::vector<Partition> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<std::pair<Dataset, Dataset>> kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed);

/// FNV-1a over the sorted source ids of train and test rows.
std::string fold_signature(const Dataset& dataset, const Partition& partition);

}  // namespace kjm
