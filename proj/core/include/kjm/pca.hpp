#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace kjm {

inline constexpr double kDefaultPcaThreshold = 0.999;

/// Variance-thresholded PCA of one waveform block.
struct PcaModel {
    std::string waveform_name;
    std::size_t length = 0;
    std::vector<double> mean;
    /// length x k, column-major: column j occupies [j * length, (j + 1) * length)
    std::vector<double> basis;
    std::size_t k = 0;
    double threshold = kDefaultPcaThreshold;
    /// cumulative variance ratios, size k
    std::vector<double> explained;
    /// retained eigenvalues (sample covariance), size k
    std::vector<double> eigenvalues;

    [[nodiscard]] std::span<const double> column(std::size_t j) const {
        return std::span<const double>(basis).subspan(j * length, length);
    }

    friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// Splits n x (W * length) into W blocks of n x length (row-major each).
std::vector<std::vector<double>> deinterlace(std::span<const double> y, std::size_t rows, std::size_t waveforms,
                                             std::size_t length);
std::vector<double> interlace(const std::vector<std::vector<double>>& blocks, std::size_t rows, std::size_t length);

/// `rows` is n x length row-major, n >= 2.
PcaModel fit_pca(std::span<const double> rows, std::size_t length, double threshold = kDefaultPcaThreshold,
                 std::string waveform_name = {});

std::vector<double> project(const PcaModel& model, std::span<const double> waveform);
std::vector<double> reconstruct(const PcaModel& model, std::span<const double> coefficients);

}  // namespace kjm
