#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rgbd/camera.hpp"
#include "rgbd/kernels.hpp"

namespace rgbd {

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double response = 0.0;
    double depth = 0.0;  // meters
};

enum class DescriptorKind { binary, real };

/// Non-owning view of one descriptor inside a FeatureSet.
struct DescriptorView {
    DescriptorKind kind = DescriptorKind::binary;
    std::span<const std::uint64_t> bits;
    std::span<const float> values;
};

/// Keypoints with descriptors stored contiguously, one row per keypoint.
/// Binary descriptors occupy ceil(length / 64) words per row.
class FeatureSet {
public:
    FeatureSet() = default;
    FeatureSet(DescriptorKind kind, int length, long frame_index = 0);

    DescriptorKind kind() const { return kind_; }
    int length() const { return length_; }
    std::size_t words() const { return words_; }
    long frame_index() const { return frame_index_; }
    void set_frame_index(long index) { frame_index_ = index; }

    std::size_t size() const { return keypoints_.size(); }
    bool empty() const { return keypoints_.empty(); }

    const std::vector<Keypoint>& keypoints() const { return keypoints_; }
    const Keypoint& keypoint(std::size_t i) const { return keypoints_[i]; }
    DescriptorView descriptor(std::size_t i) const;

    std::span<const std::uint64_t> binary_data() const { return binary_; }
    std::span<const float> real_data() const { return real_; }

    void add_binary(const Keypoint& kp, std::span<const std::uint64_t> bits);
    void add_real(const Keypoint& kp, std::span<const float> values);

private:
    DescriptorKind kind_ = DescriptorKind::binary;
    int length_ = 256;
    std::size_t words_ = 4;
    long frame_index_ = 0;
    std::vector<Keypoint> keypoints_;
    std::vector<std::uint64_t> binary_;
    std::vector<float> real_;
};

struct DetectorConfig {
    int threshold = 20;       // intensity levels
    int arc_length = 9;       // contiguous circle pixels
    double nms_radius = 4.0;  // pixels
    std::size_t max_features = 1000;
    int patch_radius = 16;    // descriptor support incl. smoothing
    Exec exec = Exec::parallel;
};

/// Segment-test corners with valid depth outside the border margin, sorted by
/// descending response and thinned so no two lie closer than nms_radius.
std::vector<Keypoint> detect(const RgbdFrame& frame, const CameraIntrinsics& k,
                             const DetectorConfig& cfg = {});

/// 256-bit pairwise-comparison descriptor on a 5x5 box-smoothed 31x31 patch.
/// Keypoints whose patch leaves the image are dropped; order is preserved.
FeatureSet describe(const RgbdFrame& frame, const std::vector<Keypoint>& keypoints,
                    const DetectorConfig& cfg = {});

/// The fixed sampling pattern, 256 pairs of (dx1, dy1, dx2, dy2) in [-15, 15].
std::span<const std::array<std::int8_t, 4>> descriptor_pattern();

/// Depth at the pixel nearest (x, y), falling back to the closest valid
/// neighbour within one pixel. Returns 0 when none is valid.
double sample_depth(const RgbdFrame& frame, double x, double y);

/// CSV feature file: header "binary <bits>" or "real <dims>", rows
/// "x, y, depth_m, payload". Throws ParseError (with line number) or MixedKind.
FeatureSet load_features(const std::filesystem::path& path);
FeatureSet parse_features(std::istream& in, const std::string& source = "<stream>");
void save_features(const FeatureSet& set, const std::filesystem::path& path);

}  // namespace rgbd
