#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kjm/motion.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm {

inline constexpr double kDefaultEvalWindow = 0.33;

double pearson_r(std::span<const double> a, std::span<const double> b);

/// 100 x RMSE / mean of the two peak-to-peak ranges.
double rrmse(std::span<const double> truth, std::span<const double> pred);

/// ceil(window * length), computed so that 0.33 x 90 gives 30.
std::size_t window_length(double window, std::size_t length);

struct WaveformScore {
    std::string name;
    double mean_r = 0.0;
    double mean_rrmse = 0.0;
    std::vector<double> trial_r;
    std::vector<double> trial_rrmse;

    friend bool operator==(const WaveformScore&, const WaveformScore&) = default;
};

struct EvaluationReport {
    Movement movement = Movement::SidestepR;
    Limb stance_limb = Limb::Right;
    double window = kDefaultEvalWindow;
    std::size_t slice_length = 0;
    std::vector<WaveformScore> waveforms;
    double kjm_mean_r = 0.0;
    double kjm_mean_rrmse = 0.0;
    /// trial with the highest mean r across waveforms
    std::size_t best_trial = 0;
    /// trials whose prediction or truth was constant on the slice (scored r = 0)
    std::size_t degenerate_trials = 0;
    std::string fold_signature;

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// `preds` and `truths` are n x W x L row-major.
EvaluationReport evaluate(std::span<const double> preds, std::span<const double> truths, std::size_t trials,
                          const std::vector<std::string>& waveform_names, std::size_t length,
                          double window = kDefaultEvalWindow);

struct MannWhitney {
    double u = 0.0;
    double p_two_sided = 1.0;
    bool exact = false;
};

/// U for sample A (pairs where A beats B, ties count one half).
MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

struct WaveformDelta {
    std::string name;
    double r_a = 0.0;
    double r_b = 0.0;
    /// (r_b - r_a) / r_a x 100
    double improvement = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

struct Comparison {
    std::vector<WaveformDelta> waveforms;
    WaveformDelta mean;
};

inline constexpr double kSignificanceLevel = 0.01;

/// Relative change in percent.
double relative_improvement(double before, double after);

Comparison compare_runs(const EvaluationReport& a, const EvaluationReport& b);

/// "+4.2" style, one decimal.
std::string format_improvement(double percent);

/// Table-shaped markdown: movement, limb, r (rRMSE %) per component, mean, optional improvement.
std::string report_markdown(const std::vector<EvaluationReport>& reports, const Comparison* comparison = nullptr);
std::string report_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);
std::string comparison_json(const Comparison& comparison);

}  // namespace kjm
