#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rgbd {

enum class ErrorCode {
    AngleNearPi,
    InvalidDepth,
    OutOfBounds,
    BehindCamera,
    InvalidIntrinsics,
    InvalidConfig,
    ParseError,
    MixedKind,
    KindMismatch,
    TooFewCandidates,
    DegenerateConfiguration,
    TooFewInliers,
    InsufficientCorrespondences,
    NoConsensus,
    MissingSigmas,
    UnstableGeometry,
    TimestampMismatch,
    ManifestError,
    MissingFile,
    BadRasterFormat,
    DatasetError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. Thrown by library operations
/// whose contract names an error; the pipeline converts the recoverable ones
/// into failure records instead of propagating them.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace rgbd
