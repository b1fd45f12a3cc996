#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kjm {

/// Natural cubic spline (zero second derivative at both ends) through
/// samples at unit spacing: knot i sits at position i.
class NaturalCubicSpline {
public:
    explicit NaturalCubicSpline(std::span<const double> samples);

    /// Position is clamped to [0, n-1].
    [[nodiscard]] double operator()(double position) const;

    [[nodiscard]] std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
    std::vector<double> second_;
};

/// Evaluates the spline through `samples` at `count` equally spaced positions
/// spanning [start, end] (sample-index units, real valued).
std::vector<double> resample(std::span<const double> samples, double start, double end, std::size_t count);

/// Output position i maps to input position i * (in - 1) / (out - 1).
std::vector<double> stretch(std::span<const double> samples, std::size_t count);

}  // namespace kjm
