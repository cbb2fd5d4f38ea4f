#include "rgbd/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "rgbd/error.hpp"

namespace rgbd {

namespace {

constexpr int kDescriptorBits = 256;
constexpr int kPatchHalf = 15;
constexpr std::uint32_t kPatternSeed = 0x9E3779B9u;

std::array<std::array<std::int8_t, 4>, kDescriptorBits> make_pattern() {
    std::array<std::array<std::int8_t, 4>, kDescriptorBits> pattern{};
    std::mt19937 gen(kPatternSeed);
    auto coord = [&gen] { return static_cast<std::int8_t>(static_cast<int>(gen() % 31u) - kPatchHalf); };
    for (auto& p : pattern) {
        do {
            p = {coord(), coord(), coord(), coord()};
        } while (p[0] == p[2] && p[1] == p[3]);
    }
    return pattern;
}

const std::array<std::array<std::int8_t, 4>, kDescriptorBits>& pattern_table() {
    static const auto table = make_pattern();
    return table;
}

[[noreturn]] void parse_error(const std::string& source, std::size_t line, const std::string& what) {
    std::ostringstream msg;
    msg << source << ":" << line << ": " << what;
    throw Error(ErrorCode::ParseError, msg.str());
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

bool looks_real(std::string_view payload) {
    return payload.find(';') != std::string_view::npos || payload.find('.') != std::string_view::npos;
}

bool looks_hex(std::string_view payload) {
    bool has_letter = false;
    for (char c : payload) {
        const int v = hex_value(c);
        if (v < 0) return false;
        if (v >= 10 && c != 'e' && c != 'E') has_letter = true;
    }
    return has_letter;
}

}  // namespace

FeatureSet::FeatureSet(DescriptorKind kind, int length, long frame_index)
    : kind_(kind), length_(length), frame_index_(frame_index) {
    if (length <= 0) throw Error(ErrorCode::InvalidConfig, "descriptor length must be positive");
    words_ = kind == DescriptorKind::binary ? (static_cast<std::size_t>(length) + 63) / 64 : 0;
}

DescriptorView FeatureSet::descriptor(std::size_t i) const {
    DescriptorView v;
    v.kind = kind_;
    if (kind_ == DescriptorKind::binary) {
        v.bits = std::span<const std::uint64_t>(binary_).subspan(i * words_, words_);
    } else {
        const auto dims = static_cast<std::size_t>(length_);
        v.values = std::span<const float>(real_).subspan(i * dims, dims);
    }
    return v;
}

void FeatureSet::add_binary(const Keypoint& kp, std::span<const std::uint64_t> bits) {
    if (kind_ != DescriptorKind::binary || bits.size() != words_) {
        throw Error(ErrorCode::KindMismatch, "binary descriptor does not fit this feature set");
    }
    keypoints_.push_back(kp);
    binary_.insert(binary_.end(), bits.begin(), bits.end());
}

void FeatureSet::add_real(const Keypoint& kp, std::span<const float> values) {
    if (kind_ != DescriptorKind::real || values.size() != static_cast<std::size_t>(length_)) {
        throw Error(ErrorCode::KindMismatch, "real descriptor does not fit this feature set");
    }
    keypoints_.push_back(kp);
    real_.insert(real_.end(), values.begin(), values.end());
}

std::span<const std::array<std::int8_t, 4>> descriptor_pattern() {
    return pattern_table();
}

double sample_depth(const RgbdFrame& frame, double x, double y) {
    const int ix = static_cast<int>(std::lround(x));
    const int iy = static_cast<int>(std::lround(y));
    if (frame.valid_at(ix, iy)) return frame.depth(ix, iy);
    double best_d2 = 1e300;
    double best = 0.0;
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const int px = ix + dx;
            const int py = iy + dy;
            if (!frame.valid_at(px, py)) continue;
            const double d2 = (px - x) * (px - x) + (py - y) * (py - y);
            if (d2 > 2.0 + 1e-9 || d2 >= best_d2) continue;
            best_d2 = d2;
            best = frame.depth(px, py);
        }
    }
    return best;
}

std::vector<Keypoint> detect(const RgbdFrame& frame, const CameraIntrinsics& k, const DetectorConfig& cfg) {
    if (frame.intensity.width() != k.width || frame.intensity.height() != k.height) {
        throw Error(ErrorCode::InvalidIntrinsics, "frame dimensions do not match intrinsics");
    }
    const int border = std::max(k.border_margin, 3);
    const Image<float> scores =
        cfg.exec == Exec::parallel
            ? parallel::segment_test_scores(frame.intensity, frame.valid, cfg.threshold, cfg.arc_length, border)
            : serial::segment_test_scores(frame.intensity, frame.valid, cfg.threshold, cfg.arc_length, border);

    struct Candidate {
        int score;
        int x;
        int y;
    };
    // Scores are integer intensity sums, so a stable counting sort on the
    // scan-ordered candidates gives descending score with (y, x) tie-breaks.
    std::vector<Candidate> scanned;
    int max_score = 0;
    for (int y = 0; y < scores.height(); ++y) {
        auto row = scores.row(y);
        for (int x = 0; x < scores.width(); ++x) {
            const float v = row[static_cast<std::size_t>(x)];
            if (v > 0.0f) {
                scanned.push_back({static_cast<int>(v), x, y});
                max_score = std::max(max_score, scanned.back().score);
            }
        }
    }
    std::vector<std::size_t> start(static_cast<std::size_t>(max_score) + 2, 0);
    for (const Candidate& c : scanned) ++start[static_cast<std::size_t>(max_score - c.score) + 1];
    for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
    std::vector<Candidate> candidates(scanned.size());
    for (const Candidate& c : scanned) candidates[start[static_cast<std::size_t>(max_score - c.score)]++] = c;

    // Greedy suppression on a grid of radius-sized cells.
    const double radius = cfg.nms_radius;
    const int cell = std::max(1, static_cast<int>(std::ceil(radius)));
    const int gw = k.width / cell + 1;
    const int gh = k.height / cell + 1;
    std::vector<std::vector<std::pair<int, int>>> grid(static_cast<std::size_t>(gw * gh));

    std::vector<Keypoint> out;
    for (const Candidate& c : candidates) {
        if (out.size() >= cfg.max_features) break;
        const int gx = c.x / cell;
        const int gy = c.y / cell;
        bool suppressed = false;
        for (int ny = std::max(0, gy - 1); ny <= std::min(gh - 1, gy + 1) && !suppressed; ++ny) {
            for (int nx = std::max(0, gx - 1); nx <= std::min(gw - 1, gx + 1) && !suppressed; ++nx) {
                for (const auto& [px, py] : grid[static_cast<std::size_t>(ny * gw + nx)]) {
                    const double dx = px - c.x;
                    const double dy = py - c.y;
                    if (dx * dx + dy * dy < radius * radius) {
                        suppressed = true;
                        break;
                    }
                }
            }
        }
        if (suppressed) continue;
        const double z = sample_depth(frame, c.x, c.y);
        if (!(z > 0.0)) continue;
        grid[static_cast<std::size_t>(gy * gw + gx)].emplace_back(c.x, c.y);
        out.push_back({static_cast<double>(c.x), static_cast<double>(c.y), static_cast<double>(c.score), z});
    }
    return out;
}

FeatureSet describe(const RgbdFrame& frame, const std::vector<Keypoint>& keypoints, const DetectorConfig& cfg) {
    FeatureSet set(DescriptorKind::binary, kDescriptorBits, frame.index);
    if (keypoints.empty()) return set;
    const Image<std::uint16_t> smooth =
        cfg.exec == Exec::parallel ? parallel::box_sum5(frame.intensity) : serial::box_sum5(frame.intensity);
    const auto& pattern = pattern_table();
    const int r = std::max(cfg.patch_radius, kPatchHalf);
    const int w = frame.intensity.width();
    const int h = frame.intensity.height();
    std::array<std::uint64_t, kDescriptorBits / 64> bits{};
    for (const Keypoint& kp : keypoints) {
        const int x = static_cast<int>(std::lround(kp.x));
        const int y = static_cast<int>(std::lround(kp.y));
        if (x < r || y < r || x >= w - r || y >= h - r) continue;
        bits.fill(0);
        for (std::size_t b = 0; b < pattern.size(); ++b) {
            const auto& p = pattern[b];
            if (smooth(x + p[0], y + p[1]) < smooth(x + p[2], y + p[3])) bits[b / 64] |= std::uint64_t{1} << (b % 64);
        }
        set.add_binary(kp, bits);
    }
    return set;
}

FeatureSet parse_features(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<FeatureSet> set;
    std::vector<std::uint64_t> bits;
    std::vector<float> values;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = trim(line);
        if (text.empty() || text.front() == '#') continue;

        if (!set) {
            std::istringstream header{std::string(text)};
            std::string kind;
            long length = 0;
            std::string extra;
            if (!(header >> kind >> length) || (header >> extra) || length <= 0) {
                parse_error(source, line_no, "expected header 'binary <bits>' or 'real <dims>'");
            }
            if (kind == "binary") {
                if (length % 8 != 0) parse_error(source, line_no, "binary length must be a multiple of 8 bits");
                set.emplace(DescriptorKind::binary, static_cast<int>(length));
            } else if (kind == "real") {
                set.emplace(DescriptorKind::real, static_cast<int>(length));
            } else {
                parse_error(source, line_no, "unknown descriptor kind '" + kind + "'");
            }
            continue;
        }

        std::array<std::string_view, 4> fields;
        std::string_view rest = text;
        for (int f = 0; f < 3; ++f) {
            const auto comma = rest.find(',');
            if (comma == std::string_view::npos) parse_error(source, line_no, "expected 'x, y, depth_m, payload'");
            fields[static_cast<std::size_t>(f)] = rest.substr(0, comma);
            rest.remove_prefix(comma + 1);
        }
        fields[3] = trim(rest);
        if (fields[3].find(',') != std::string_view::npos) parse_error(source, line_no, "too many fields");

        Keypoint kp;
        if (!parse_double(fields[0], kp.x) || !parse_double(fields[1], kp.y) || !parse_double(fields[2], kp.depth)) {
            parse_error(source, line_no, "malformed number in keypoint fields");
        }
        const std::string_view payload = fields[3];

        if (set->kind() == DescriptorKind::binary) {
            if (looks_real(payload)) {
                throw Error(ErrorCode::MixedKind, source + ":" + std::to_string(line_no) + ": real payload in binary file");
            }
            const std::size_t hex_chars = static_cast<std::size_t>(set->length()) / 4;
            if (payload.size() != hex_chars) {
                parse_error(source, line_no,
                            "expected " + std::to_string(hex_chars) + " hex chars, got " + std::to_string(payload.size()));
            }
            bits.assign(set->words(), 0);
            for (std::size_t byte = 0; byte < hex_chars / 2; ++byte) {
                const int hi = hex_value(payload[2 * byte]);
                const int lo = hex_value(payload[2 * byte + 1]);
                if (hi < 0 || lo < 0) parse_error(source, line_no, "invalid hex digit in payload");
                const auto v = static_cast<std::uint64_t>((hi << 4) | lo);
                const std::size_t bit = byte * 8;
                bits[bit / 64] |= v << (bit % 64);
            }
            set->add_binary(kp, bits);
        } else {
            values.clear();
            std::string_view vs = payload;
            bool ok = true;
            while (true) {
                const auto semi = vs.find(';');
                double v = 0.0;
                if (!parse_double(vs.substr(0, semi), v)) {
                    ok = false;
                    break;
                }
                values.push_back(static_cast<float>(v));
                if (semi == std::string_view::npos) break;
                vs.remove_prefix(semi + 1);
            }
            if (!ok && looks_hex(payload)) {
                throw Error(ErrorCode::MixedKind, source + ":" + std::to_string(line_no) + ": hex payload in real file");
            }
            if (!ok) parse_error(source, line_no, "malformed real payload");
            if (values.size() != static_cast<std::size_t>(set->length())) {
                parse_error(source, line_no,
                            "expected " + std::to_string(set->length()) + " values, got " + std::to_string(values.size()));
            }
            set->add_real(kp, values);
        }
    }
    if (!set) parse_error(source, line_no, "missing header");
    return std::move(*set);
}

FeatureSet load_features(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    return parse_features(in, path.string());
}

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

void save_features(const FeatureSet& set, const std::filesystem::path& path) {
    std::string out = set.kind() == DescriptorKind::binary ? "binary " : "real ";
    out += std::to_string(set.length());
    out += '\n';
    static constexpr char kHex[] = "0123456789abcdef";
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Keypoint& kp = set.keypoint(i);
        append_number(out, kp.x);
        out += ", ";
        append_number(out, kp.y);
        out += ", ";
        append_number(out, kp.depth);
        out += ", ";
        const DescriptorView d = set.descriptor(i);
        if (set.kind() == DescriptorKind::binary) {
            const std::size_t hex_chars = static_cast<std::size_t>(set.length()) / 4;
            for (std::size_t c = 0; c < hex_chars; ++c) {
                const std::size_t bit = (c / 2) * 8 + (c % 2 == 0 ? 4 : 0);
                out += kHex[(d.bits[bit / 64] >> (bit % 64)) & 0xF];
            }
        } else {
            for (std::size_t v = 0; v < d.values.size(); ++v) {
                if (v) out += ';';
                append_number(out, d.values[v]);
            }
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f << out;
}

}  // namespace rgbd
