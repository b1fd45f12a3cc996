#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kjm {

enum class ErrorCode {
    // c3d
    MagicMismatch,
    UnsupportedProcessor,
    TruncatedFile,
    MalformedParameter,
    MalformedHeader,
    UnrepresentableValue,
    MissingMarker,
    GappedTrajectory,
    MissingPlate,
    ChannelCountMismatch,
    InvalidPlateGeometry,
    // gait events
    NoEvent,
    DegenerateStance,
    FootOffPlate,
    // trial prep
    InsufficientLeadIn,
    InsufficientFollowThrough,
    WindowOutOfRange,
    EmptyDataset,
    TooFewSamples,
    InvalidArgument,
    // image codec
    DegenerateAxis,
    // pca / generic shapes
    ShapeMismatch,
    // cnn
    IncompatibleArchitecture,
    DivergenceDetected,
    CorruptFile,
    // evaluation
    DegenerateSeries,
    DegenerateRange,
    EmptySample,
    FoldMismatch,
    // io
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a stable code; the message adds context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace kjm
