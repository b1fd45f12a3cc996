#include "kjm/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "kjm/error.hpp"

namespace kjm {

std::vector<std::vector<double>> deinterlace(std::span<const double> y, std::size_t rows, std::size_t waveforms,
                                             std::size_t length) {
    if (length == 0 || waveforms == 0 || y.size() != rows * waveforms * length) {
        fail(ErrorCode::ShapeMismatch, "response matrix is not rows x (waveforms x length)");
    }
    std::vector<std::vector<double>> out(waveforms, std::vector<double>(rows * length));
    const std::size_t width = waveforms * length;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t w = 0; w < waveforms; ++w) {
            std::copy_n(y.begin() + static_cast<std::ptrdiff_t>(r * width + w * length), length,
                        out[w].begin() + static_cast<std::ptrdiff_t>(r * length));
        }
    }
    return out;
}

std::vector<double> interlace(const std::vector<std::vector<double>>& blocks, std::size_t rows, std::size_t length) {
    const std::size_t waveforms = blocks.size();
    std::vector<double> out(rows * waveforms * length);
    for (std::size_t w = 0; w < waveforms; ++w) {
        if (blocks[w].size() != rows * length) {
            fail(ErrorCode::ShapeMismatch, "block size mismatch");
        }
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(blocks[w].begin() + static_cast<std::ptrdiff_t>(r * length), length,
                        out.begin() + static_cast<std::ptrdiff_t>(r * waveforms * length + w * length));
        }
    }
    return out;
}

PcaModel fit_pca(std::span<const double> rows, std::size_t length, double threshold, std::string waveform_name) {
    if (length == 0 || rows.size() % length != 0) {
        fail(ErrorCode::ShapeMismatch, "rows are not n x length");
    }
    const std::size_t n = rows.size() / length;
    if (n < 2) {
        fail(ErrorCode::TooFewSamples, "PCA needs at least two rows");
    }
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        fail(ErrorCode::InvalidArgument, "threshold must lie in (0, 1]");
    }
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const Mat> data(rows.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(length));
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Mat centered = data.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        fail(ErrorCode::InvalidArgument, "eigen decomposition failed");
    }
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    const auto dim = static_cast<std::size_t>(values.size());

    // descending order, negatives from round-off treated as zero
    std::vector<double> lambda(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        lambda[i] = std::max(0.0, values(static_cast<Eigen::Index>(dim - 1 - i)));
    }
    double total = 0.0;
    for (double v : lambda) {
        total += v;
    }

    PcaModel model;
    model.waveform_name = std::move(waveform_name);
    model.length = length;
    model.threshold = threshold;
    model.mean.assign(mean.data(), mean.data() + length);
    if (total <= 0.0) {
        return model;  // constant data: nothing to retain
    }
    const double rank_floor = 1e-12 * lambda[0];
    const std::size_t rank = std::min<std::size_t>(
        static_cast<std::size_t>(std::count_if(lambda.begin(), lambda.end(), [&](double v) { return v > rank_floor; })),
        n - 1);
    double cumulative = 0.0;
    for (std::size_t j = 0; j < rank; ++j) {
        cumulative += lambda[j];
        model.explained.push_back(cumulative / total);
        model.eigenvalues.push_back(lambda[j]);
        ++model.k;
        if (cumulative / total >= threshold - 1e-12) {
            break;
        }
    }
    model.basis.resize(length * model.k);
    for (std::size_t j = 0; j < model.k; ++j) {
        const auto src = static_cast<Eigen::Index>(dim - 1 - j);
        Eigen::Index arg = 0;
        vectors.col(src).cwiseAbs().maxCoeff(&arg);
        const double sign = vectors(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < length; ++i) {
            model.basis[j * length + i] = sign * vectors(static_cast<Eigen::Index>(i), src);
        }
    }
    return model;
}

std::vector<double> project(const PcaModel& model, std::span<const double> waveform) {
    if (waveform.size() != model.length) {
        fail(ErrorCode::ShapeMismatch, "waveform length differs from the model");
    }
    std::vector<double> z(model.k, 0.0);
    for (std::size_t j = 0; j < model.k; ++j) {
        const auto col = model.column(j);
        double acc = 0.0;
        for (std::size_t i = 0; i < model.length; ++i) {
            acc += col[i] * (waveform[i] - model.mean[i]);
        }
        z[j] = acc;
    }
    return z;
}

std::vector<double> reconstruct(const PcaModel& model, std::span<const double> coefficients) {
    if (coefficients.size() != model.k) {
        fail(ErrorCode::ShapeMismatch, "coefficient count differs from k");
    }
    std::vector<double> y = model.mean;
    for (std::size_t j = 0; j < model.k; ++j) {
        const auto col = model.column(j);
        for (std::size_t i = 0; i < model.length; ++i) {
            y[i] += col[i] * coefficients[j];
        }
    }
    return y;
}

}  // namespace kjm
