#include "kjm/image_codec.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <zlib.h>

#include "kjm/error.hpp"
#include "kjm/spline.hpp"
#include "kjm/trial_prep.hpp"

namespace kjm {

namespace {

constexpr double kFull = 255.0;

std::size_t feature(std::size_t marker, std::size_t sample, std::size_t axis) {
    return (marker * kPredictorSamples + sample) * 3 + axis;
}

void check_predictor(std::size_t size) {
    if (size != kPredictorFeatures) {
        fail(ErrorCode::ShapeMismatch, "predictor must have 3000 features");
    }
}

}  // namespace

std::array<double, 3> trial_center(std::span<const double> predictor) {
    check_predictor(predictor.size());
    std::array<double, 3> c{};
    for (std::size_t i = 0; i < predictor.size(); ++i) {
        c[i % 3] += predictor[i];
    }
    for (auto& v : c) {
        v /= static_cast<double>(kMarkerCount * kPredictorSamples);
    }
    return c;
}

ScalerParams fit_scaler(std::span<const float> rows) {
    if (rows.empty() || rows.size() % kPredictorFeatures != 0) {
        fail(ErrorCode::ShapeMismatch, "scaler needs n >= 1 rows of 3000 features");
    }
    ScalerParams p;
    p.axis_min.fill(std::numeric_limits<double>::infinity());
    p.axis_max.fill(-std::numeric_limits<double>::infinity());
    std::vector<double> row(kPredictorFeatures);
    for (std::size_t r = 0; r < rows.size() / kPredictorFeatures; ++r) {
        for (std::size_t i = 0; i < kPredictorFeatures; ++i) {
            row[i] = rows[r * kPredictorFeatures + i];
        }
        const auto c = trial_center(row);
        for (std::size_t i = 0; i < kPredictorFeatures; ++i) {
            const double v = row[i] - c[i % 3];
            p.axis_min[i % 3] = std::min(p.axis_min[i % 3], v);
            p.axis_max[i % 3] = std::max(p.axis_max[i % 3], v);
        }
    }
    for (std::size_t a = 0; a < 3; ++a) {
        if (!(p.axis_max[a] > p.axis_min[a])) {
            fail(ErrorCode::DegenerateAxis, "axis " + std::to_string(a) + " has no spread in the training set");
        }
    }
    return p;
}

std::vector<double> channel_grid(std::span<const double> predictor, const ScalerParams& scaler) {
    check_predictor(predictor.size());
    std::array<double, 3> center{};
    if (scaler.center == CenterMode::PerTrial) {
        center = trial_center(predictor);
    }
    std::vector<double> grid(kImageChannels * kPredictorSamples * kMarkerCount);
    for (std::size_t a = 0; a < 3; ++a) {
        const double lo = scaler.axis_min[a];
        const double span = scaler.axis_max[a] - lo;
        for (std::size_t s = 0; s < kPredictorSamples; ++s) {
            for (std::size_t m = 0; m < kMarkerCount; ++m) {
                const double v = (predictor[feature(m, s, a)] - center[a] - lo) / span * kFull;
                grid[(a * kPredictorSamples + s) * kMarkerCount + m] = std::clamp(v, 0.0, kFull);
            }
        }
    }
    return grid;
}

EncodedImage encode_trial(std::span<const double> predictor, const ScalerParams& scaler) {
    const auto grid = channel_grid(predictor, scaler);
    EncodedImage img;
    std::vector<double> column(kPredictorSamples);
    std::vector<double> tall(kImageSize * kMarkerCount);
    std::vector<double> row(kMarkerCount);
    for (std::size_t c = 0; c < kImageChannels; ++c) {
        // height first: 125 -> 227 for every marker column
        for (std::size_t m = 0; m < kMarkerCount; ++m) {
            for (std::size_t s = 0; s < kPredictorSamples; ++s) {
                column[s] = grid[(c * kPredictorSamples + s) * kMarkerCount + m];
            }
            const auto stretched = stretch(column, kImageSize);
            for (std::size_t r = 0; r < kImageSize; ++r) {
                tall[r * kMarkerCount + m] = stretched[r];
            }
        }
        // then width: 8 -> 227 for every row
        for (std::size_t r = 0; r < kImageSize; ++r) {
            std::copy_n(tall.begin() + static_cast<std::ptrdiff_t>(r * kMarkerCount), kMarkerCount, row.begin());
            const auto wide = stretch(row, kImageSize);
            for (std::size_t col = 0; col < kImageSize; ++col) {
                img.at(c, r, col) = static_cast<float>(std::clamp(wide[col], 0.0, kFull));
            }
        }
    }
    return img;
}

EncodedImage encode_trial(std::span<const float> predictor, const ScalerParams& scaler) {
    const std::vector<double> p(predictor.begin(), predictor.end());
    return encode_trial(std::span<const double>(p), scaler);
}

std::vector<double> decode_image(const EncodedImage& image, const ScalerParams& scaler) {
    if (image.pixels.size() != kImagePixels) {
        fail(ErrorCode::ShapeMismatch, "image must be 3 x 227 x 227");
    }
    std::vector<double> out(kPredictorFeatures);
    std::vector<double> row(kImageSize);
    std::vector<double> narrow(kImageSize * kMarkerCount);
    std::vector<double> column(kImageSize);
    const double col_step = static_cast<double>(kImageSize - 1) / static_cast<double>(kMarkerCount - 1);
    const double row_step = static_cast<double>(kImageSize - 1) / static_cast<double>(kPredictorSamples - 1);
    for (std::size_t c = 0; c < kImageChannels; ++c) {
        for (std::size_t r = 0; r < kImageSize; ++r) {
            for (std::size_t col = 0; col < kImageSize; ++col) {
                row[col] = image.at(c, r, col);
            }
            const NaturalCubicSpline spline(row);
            for (std::size_t m = 0; m < kMarkerCount; ++m) {
                narrow[r * kMarkerCount + m] = spline(static_cast<double>(m) * col_step);
            }
        }
        const double lo = scaler.axis_min[c];
        const double span = scaler.axis_max[c] - lo;
        for (std::size_t m = 0; m < kMarkerCount; ++m) {
            for (std::size_t r = 0; r < kImageSize; ++r) {
                column[r] = narrow[r * kMarkerCount + m];
            }
            const NaturalCubicSpline spline(column);
            for (std::size_t s = 0; s < kPredictorSamples; ++s) {
                const double v = spline(static_cast<double>(s) * row_step);
                out[feature(m, s, c)] = v / kFull * span + lo;
            }
        }
    }
    return out;
}

namespace {

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
    }
}

void put_chunk(std::vector<unsigned char>& out, const char* type, const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const EncodedImage& image, const std::filesystem::path& path) {
    std::vector<unsigned char> raw;
    raw.reserve(kImageSize * (1 + kImageSize * 3));
    for (std::size_t r = 0; r < kImageSize; ++r) {
        raw.push_back(0);
        for (std::size_t col = 0; col < kImageSize; ++col) {
            for (std::size_t c = 0; c < 3; ++c) {
                raw.push_back(static_cast<unsigned char>(std::lround(std::clamp(image.at(c, r, col), 0.0f, 255.0f))));
            }
        }
    }
    uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> packed(packed_len);
    if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        fail(ErrorCode::IoError, "zlib compression failed");
    }
    packed.resize(packed_len);

    std::vector<unsigned char> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    std::vector<unsigned char> ihdr;
    put_be32(ihdr, kImageSize);
    put_be32(ihdr, kImageSize);
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", packed);
    put_chunk(png, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        fail(ErrorCode::IoError, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

}  // namespace kjm
