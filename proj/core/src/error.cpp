#include "kjm/error.hpp"

namespace kjm {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MagicMismatch: return "MagicMismatch";
        case ErrorCode::UnsupportedProcessor: return "UnsupportedProcessor";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::MalformedParameter: return "MalformedParameter";
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::UnrepresentableValue: return "UnrepresentableValue";
        case ErrorCode::MissingMarker: return "MissingMarker";
        case ErrorCode::GappedTrajectory: return "GappedTrajectory";
        case ErrorCode::MissingPlate: return "MissingPlate";
        case ErrorCode::ChannelCountMismatch: return "ChannelCountMismatch";
        case ErrorCode::InvalidPlateGeometry: return "InvalidPlateGeometry";
        case ErrorCode::NoEvent: return "NoEvent";
        case ErrorCode::DegenerateStance: return "DegenerateStance";
        case ErrorCode::FootOffPlate: return "FootOffPlate";
        case ErrorCode::InsufficientLeadIn: return "InsufficientLeadIn";
        case ErrorCode::InsufficientFollowThrough: return "InsufficientFollowThrough";
        case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateAxis: return "DegenerateAxis";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::IncompatibleArchitecture: return "IncompatibleArchitecture";
        case ErrorCode::DivergenceDetected: return "DivergenceDetected";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::DegenerateSeries: return "DegenerateSeries";
        case ErrorCode::DegenerateRange: return "DegenerateRange";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::FoldMismatch: return "FoldMismatch";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace kjm
