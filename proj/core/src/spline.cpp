#include "kjm/spline.hpp"

#include <algorithm>
#include <cmath>

#include "kjm/error.hpp"

namespace kjm {

NaturalCubicSpline::NaturalCubicSpline(std::span<const double> samples)
    : values_(samples.begin(), samples.end()), second_(samples.size(), 0.0) {
    if (values_.empty()) {
        fail(ErrorCode::InvalidArgument, "spline needs at least one sample");
    }
    const std::size_t n = values_.size();
    if (n < 3) {
        return;
    }
    // Thomas algorithm on the unit-spacing system  M[i-1] + 4 M[i] + M[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1])
    const std::size_t m = n - 2;
    std::vector<double> c(m, 0.0);
    std::vector<double> d(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double rhs = 6.0 * (values_[i + 2] - 2.0 * values_[i + 1] + values_[i]);
        if (i == 0) {
            c[i] = 1.0 / 4.0;
            d[i] = rhs / 4.0;
        } else {
            const double denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    second_[m] = d[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) {
        second_[i + 1] = d[i] - c[i] * second_[i + 2];
    }
}

double NaturalCubicSpline::operator()(double position) const {
    const std::size_t n = values_.size();
    if (n == 1) {
        return values_[0];
    }
    const double x = std::clamp(position, 0.0, static_cast<double>(n - 1));
    auto i = static_cast<std::size_t>(std::floor(x));
    if (i >= n - 1) {
        i = n - 2;
    }
    const double t = x - static_cast<double>(i);
    if (t == 0.0) {
        return values_[i];
    }
    const double a = 1.0 - t;
    const double y0 = values_[i];
    const double y1 = values_[i + 1];
    const double m0 = second_[i];
    const double m1 = second_[i + 1];
    return a * y0 + t * y1 + ((a * a * a - a) * m0 + (t * t * t - t) * m1) / 6.0;
}

std::vector<double> resample(std::span<const double> samples, double start, double end, std::size_t count) {
    if (count == 0) {
        return {};
    }
    const NaturalCubicSpline spline(samples);
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = spline(start);
        return out;
    }
    const double step = (end - start) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = spline(start + static_cast<double>(i) * step);
    }
    return out;
}

std::vector<double> stretch(std::span<const double> samples, std::size_t count) {
    return resample(samples, 0.0, static_cast<double>(samples.size()) - 1.0, count);
}

}  // namespace kjm
