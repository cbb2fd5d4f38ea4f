#include "rgbd/error.hpp"

namespace rgbd {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::AngleNearPi: return "AngleNearPi";
        case ErrorCode::InvalidDepth: return "InvalidDepth";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::InvalidIntrinsics: return "InvalidIntrinsics";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MixedKind: return "MixedKind";
        case ErrorCode::KindMismatch: return "KindMismatch";
        case ErrorCode::TooFewCandidates: return "TooFewCandidates";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::TooFewInliers: return "TooFewInliers";
        case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
        case ErrorCode::NoConsensus: return "NoConsensus";
        case ErrorCode::MissingSigmas: return "MissingSigmas";
        case ErrorCode::UnstableGeometry: return "UnstableGeometry";
        case ErrorCode::TimestampMismatch: return "TimestampMismatch";
        case ErrorCode::ManifestError: return "ManifestError";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::BadRasterFormat: return "BadRasterFormat";
        case ErrorCode::DatasetError: return "DatasetError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace rgbd
