#include "rgbd/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <Eigen/Geometry>

#include "rgbd/error.hpp"

namespace rgbd {

using nlohmann::json;

namespace {

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<unsigned char>& bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

// ---- PGM ----

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t offset = 0;
};

PgmHeader parse_pgm_header(const std::vector<unsigned char>& b, const fs::path& path) {
    auto bad = [&](const std::string& why) { return Error(ErrorCode::BadRasterFormat, quoted(path) + ": " + why); };
    if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw bad("not a binary PGM (P5) or PNG file");
    std::size_t pos = 2;
    std::array<long, 3> fields{};
    for (long& f : fields) {
        while (pos < b.size()) {
            if (b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
            } else if (std::isspace(b[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < b.size() && std::isdigit(b[pos])) ++pos;
        if (pos == start) throw bad("truncated header");
        f = std::stol(std::string(b.begin() + static_cast<std::ptrdiff_t>(start), b.begin() + static_cast<std::ptrdiff_t>(pos)));
    }
    if (pos >= b.size() || !std::isspace(b[pos])) throw bad("truncated header");
    ++pos;
    PgmHeader h{static_cast<int>(fields[0]), static_cast<int>(fields[1]), static_cast<int>(fields[2]), pos};
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) throw bad("invalid dimensions or maxval");
    const std::size_t bpp = h.maxval > 255 ? 2 : 1;
    if (b.size() - pos < static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * bpp) {
        throw bad("pixel data truncated");
    }
    return h;
}

void write_pgm_bytes(const fs::path& path, int w, int h, int maxval, const unsigned char* data, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + quoted(path));
    out << "P5\n" << w << ' ' << h << '\n' << maxval << '\n';
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + quoted(path));
}

// ---- PNG (classic libpng API; setjmp-safe: only caller-owned objects are touched) ----

struct PngSource {
    const std::vector<unsigned char>* bytes;
    std::size_t pos;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->pos + n > src->bytes->size()) png_error(png, "unexpected end of data");
    std::memcpy(out, src->bytes->data() + src->pos, n);
    src->pos += n;
}

struct PngDecoded {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    std::vector<unsigned char> data;  // rows packed, 16-bit samples in native order
    char message[256] = {0};
};

// Decodes to one gray channel. want16: require a 16-bit gray source, else an 8-bit one.
bool decode_png(const std::vector<unsigned char>& bytes, bool want16, PngDecoded& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    PngSource src{&bytes, 0};
    if (setjmp(png_jmpbuf(png))) {
        if (out.message[0] == 0) std::snprintf(out.message, sizeof out.message, "corrupt PNG data");
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &src, png_read_mem);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (want16 && !(depth == 16 && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA))) {
        std::snprintf(out.message, sizeof out.message, "expected 16-bit grayscale, got %d-bit color type %d", depth,
                      color);
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    if (!want16 && depth == 16) {
        std::snprintf(out.message, sizeof out.message, "intensity must be 8-bit, got 16-bit");
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (want16) {
        const unsigned probe = 1;
        if (*reinterpret_cast<const unsigned char*>(&probe) == 1) png_set_swap(png);
    }
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = want16 ? 16 : 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    const std::size_t expected = static_cast<std::size_t>(out.width) * (want16 ? 2 : 1);
    if (rowbytes != expected || png_get_channels(png, info) != 1) {
        std::snprintf(out.message, sizeof out.message, "unsupported PNG layout");
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    out.data.resize(rowbytes * static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) png_read_row(png, out.data.data() + rowbytes * static_cast<std::size_t>(y), nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

struct PngWriteState {
    std::vector<unsigned char> rows;
    std::FILE* file = nullptr;
};

bool encode_png16(const Image<std::uint16_t>& img, PngWriteState& st) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, st.file);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 16,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(img.width()) * 2;
    for (int y = 0; y < img.height(); ++y) png_write_row(png, st.rows.data() + stride * static_cast<std::size_t>(y));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

// ---- text helpers ----

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, where + ": expected a number, got '" + s + "'");
    }
    return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

const char* shape_name(TrajectoryShape s) {
    switch (s) {
        case TrajectoryShape::stationary: return "stationary";
        case TrajectoryShape::line: return "line";
        case TrajectoryShape::orbit: return "orbit";
    }
    return "line";
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json matrix_json(const Mat6& m) {
    json a = json::array();
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) a.push_back(m(r, c));
    return a;
}

Mat6 matrix_from(const json& j) {
    Mat6 m = Mat6::Zero();
    if (j.is_null()) return m;
    if (!j.is_array() || j.size() != 36) throw Error(ErrorCode::ParseError, "covariance must have 36 entries");
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) m(r, c) = j[static_cast<std::size_t>(r * 6 + c)].get<double>();
    return m;
}

FailureReason failure_from(const std::string& s) {
    for (FailureReason r : {FailureReason::none, FailureReason::too_few_features, FailureReason::too_few_matches,
                            FailureReason::no_consensus, FailureReason::unstable_geometry}) {
        if (to_string(r) == s) return r;
    }
    throw Error(ErrorCode::ParseError, "unknown failure reason '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------- rasters

GrayImage read_gray(const fs::path& path) {
    const auto bytes = read_bytes(path);
    if (is_png(bytes)) {
        PngDecoded d;
        if (!decode_png(bytes, false, d)) throw Error(ErrorCode::BadRasterFormat, quoted(path) + ": " + d.message);
        GrayImage img(d.width, d.height);
        std::copy(d.data.begin(), d.data.end(), img.pixels().begin());
        return img;
    }
    const PgmHeader h = parse_pgm_header(bytes, path);
    if (h.maxval > 255) throw Error(ErrorCode::BadRasterFormat, quoted(path) + ": intensity must be 8-bit");
    GrayImage img(h.width, h.height);
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), img.pixels().size(), img.pixels().begin());
    return img;
}

Image<std::uint16_t> read_gray16(const fs::path& path) {
    const auto bytes = read_bytes(path);
    if (is_png(bytes)) {
        PngDecoded d;
        if (!decode_png(bytes, true, d)) throw Error(ErrorCode::BadRasterFormat, quoted(path) + ": " + d.message);
        Image<std::uint16_t> img(d.width, d.height);
        std::memcpy(img.pixels().data(), d.data.data(), d.data.size());
        return img;
    }
    const PgmHeader h = parse_pgm_header(bytes, path);
    if (h.maxval <= 255) throw Error(ErrorCode::BadRasterFormat, quoted(path) + ": depth must be 16-bit");
    Image<std::uint16_t> img(h.width, h.height);
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint16_t>((bytes[h.offset + 2 * i] << 8) | bytes[h.offset + 2 * i + 1]);
    }
    return img;
}

DepthImage read_depth_mm(const fs::path& path) {
    const Image<std::uint16_t> mm = read_gray16(path);
    DepthImage d(mm.width(), mm.height(), 0.0f);
    auto src = mm.pixels();
    auto dst = d.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 1000.0f;
    return d;
}

Image<std::uint16_t> depth_to_mm(const DepthImage& depth) {
    Image<std::uint16_t> mm(depth.width(), depth.height(), 0);
    auto src = depth.pixels();
    auto dst = mm.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double z = src[i];
        if (!std::isfinite(z) || z <= 0.0) continue;
        dst[i] = static_cast<std::uint16_t>(std::min(65535.0, std::round(z * 1000.0)));
    }
    return mm;
}

void write_pgm(const GrayImage& img, const fs::path& path) {
    write_pgm_bytes(path, img.width(), img.height(), 255, img.pixels().data(), img.pixels().size());
}

void write_pgm16(const Image<std::uint16_t>& img, const fs::path& path) {
    std::vector<unsigned char> be(img.pixels().size() * 2);
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        be[2 * i] = static_cast<unsigned char>(px[i] >> 8);
        be[2 * i + 1] = static_cast<unsigned char>(px[i] & 0xff);
    }
    write_pgm_bytes(path, img.width(), img.height(), 65535, be.data(), be.size());
}

void write_png16(const Image<std::uint16_t>& img, const fs::path& path) {
    PngWriteState st;
    auto px = img.pixels();
    st.rows.resize(px.size() * 2);
    for (std::size_t i = 0; i < px.size(); ++i) {
        st.rows[2 * i] = static_cast<unsigned char>(px[i] >> 8);
        st.rows[2 * i + 1] = static_cast<unsigned char>(px[i] & 0xff);
    }
    st.file = std::fopen(path.c_str(), "wb");
    if (!st.file) throw Error(ErrorCode::IoError, "cannot write " + quoted(path));
    const bool ok = encode_png16(img, st);
    const bool closed = std::fclose(st.file) == 0;
    if (!ok || !closed) throw Error(ErrorCode::IoError, "PNG encoding failed for " + quoted(path));
}

// ---------------------------------------------------------------- intrinsics

PixelShift load_shift_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));
    std::string tag;
    int w = 0;
    int h = 0;
    if (!(in >> tag >> w >> h) || tag != "shift" || w <= 0 || h <= 0) {
        throw Error(ErrorCode::ParseError, quoted(path) + ":1: expected 'shift <width> <height>'");
    }
    std::vector<Vec2> table(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (std::size_t i = 0; i < table.size(); ++i) {
        double dx = 0.0;
        double dy = 0.0;
        if (!(in >> dx >> dy)) {
            throw Error(ErrorCode::ParseError, quoted(path) + ":" + std::to_string(i + 2) + ": expected 'dx dy'");
        }
        table[i] = {dx, dy};
    }
    return PixelShift(w, h, std::move(table));
}

CameraIntrinsics intrinsics_from_json(const json& j, const fs::path& base) {
    static const std::set<std::string> known{"fx",     "fy",    "cx",    "cy",           "width",
                                             "height", "z_min", "z_max", "border_margin", "sigma_disparity",
                                             "disparity_slope", "shift_table"};
    if (!j.is_object()) throw Error(ErrorCode::InvalidIntrinsics, "intrinsics must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::InvalidIntrinsics, "unknown intrinsics key '" + key + "'");
    }
    CameraIntrinsics k = CameraIntrinsics::standard();
    try {
        k.fx = j.value("fx", k.fx);
        k.fy = j.value("fy", k.fy);
        k.cx = j.value("cx", k.cx);
        k.cy = j.value("cy", k.cy);
        k.width = j.value("width", k.width);
        k.height = j.value("height", k.height);
        k.z_min = j.value("z_min", k.z_min);
        k.z_max = j.value("z_max", k.z_max);
        k.border_margin = j.value("border_margin", k.border_margin);
        k.noise.sigma_disparity = j.value("sigma_disparity", k.noise.sigma_disparity);
        k.noise.disparity_slope = j.value("disparity_slope", k.noise.disparity_slope);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidIntrinsics, e.what());
    }
    if (j.contains("shift_table")) k.shift = load_shift_table(resolve(base, j.at("shift_table").get<std::string>()));
    k.validate();
    return k;
}

CameraIntrinsics load_intrinsics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, quoted(path) + ": " + e.what());
    }
    return intrinsics_from_json(j, path.parent_path());
}

json intrinsics_to_json(const CameraIntrinsics& k) {
    return json{{"fx", k.fx},
                {"fy", k.fy},
                {"cx", k.cx},
                {"cy", k.cy},
                {"width", k.width},
                {"height", k.height},
                {"z_min", k.z_min},
                {"z_max", k.z_max},
                {"border_margin", k.border_margin},
                {"sigma_disparity", k.noise.sigma_disparity},
                {"disparity_slope", k.noise.disparity_slope}};
}

// ---------------------------------------------------------------- pipeline config

void apply_config_json(const json& j, PipelineConfig& cfg) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "ratio") cfg.match.lambda_ratio = v.get<double>();
            else if (key == "inlier") cfg.ransac.lambda_inlier = v.get<double>();
            else if (key == "ransac_iters") cfg.ransac.max_iterations = v.get<int>();
            else if (key == "refine") cfg.ransac.refine = v.get<bool>();
            else if (key == "refine_rounds") cfg.ransac.max_refine_rounds = v.get<int>();
            else if (key == "min_inliers") cfg.ransac.min_inliers = v.get<std::size_t>();
            else if (key == "triplet_model") cfg.ransac.use_triplet_model = v.get<bool>();
            else if (key == "perturbations") cfg.perturbations = v.get<int>();
            else if (key == "multiplier") cfg.multiplier = v.get<double>();
            else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
            else if (key == "fast_threshold") cfg.detector.threshold = v.get<int>();
            else if (key == "arc_length") cfg.detector.arc_length = v.get<int>();
            else if (key == "nms_radius") cfg.detector.nms_radius = v.get<double>();
            else if (key == "max_features") cfg.detector.max_features = v.get<std::size_t>();
            else if (key == "border_margin") {
                if (v.is_null()) cfg.border_margin.reset();
                else cfg.border_margin = v.get<int>();
            } else if (key == "exec") {
                const auto s = v.get<std::string>();
                if (s != "serial" && s != "parallel") throw Error(ErrorCode::InvalidConfig, "exec must be serial|parallel");
                cfg.set_exec(s == "serial" ? Exec::serial : Exec::parallel);
            } else {
                throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
}

json config_to_json(const PipelineConfig& cfg) {
    return json{{"ratio", cfg.match.lambda_ratio},
                {"inlier", cfg.ransac.lambda_inlier},
                {"ransac_iters", cfg.ransac.max_iterations},
                {"refine", cfg.ransac.refine},
                {"refine_rounds", cfg.ransac.max_refine_rounds},
                {"min_inliers", cfg.ransac.min_inliers},
                {"triplet_model", cfg.ransac.use_triplet_model},
                {"perturbations", cfg.perturbations},
                {"multiplier", cfg.multiplier},
                {"seed", cfg.seed},
                {"fast_threshold", cfg.detector.threshold},
                {"arc_length", cfg.detector.arc_length},
                {"nms_radius", cfg.detector.nms_radius},
                {"max_features", cfg.detector.max_features},
                {"border_margin", cfg.border_margin ? json(*cfg.border_margin) : json(nullptr)},
                {"exec", cfg.exec == Exec::serial ? "serial" : "parallel"}};
}

// ---------------------------------------------------------------- dataset

Dataset load_dataset(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open manifest " + quoted(manifest));
    Dataset d;
    d.root = manifest.parent_path();
    auto require = [&](const fs::path& p) {
        if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, "missing file " + quoted(p));
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        const std::string where = manifest.string() + ":" + std::to_string(lineno);
        if (tok[0] == "intrinsics" || tok[0] == "groundtruth") {
            if (tok.size() != 2) throw Error(ErrorCode::ManifestError, where + ": expected '" + tok[0] + " <path>'");
            const fs::path p = resolve(d.root, tok[1]);
            require(p);
            if (tok[0] == "intrinsics") d.intrinsics_path = p;
            else d.groundtruth = p;
            continue;
        }
        DatasetEntry e;
        try {
            e.timestamp = parse_double(tok[0], where);
        } catch (const Error&) {
            throw Error(ErrorCode::ManifestError, where + ": expected a timestamp, got '" + tok[0] + "'");
        }
        if (tok.size() == 2) {
            e.features = resolve(d.root, tok[1]);
            require(e.features);
        } else if (tok.size() == 3) {
            e.intensity = resolve(d.root, tok[1]);
            e.depth = resolve(d.root, tok[2]);
            require(e.intensity);
            require(e.depth);
        } else {
            throw Error(ErrorCode::ManifestError, where + ": expected 'timestamp intensity depth' or 'timestamp features'");
        }
        if (!d.entries.empty()) {
            if (d.entries.front().features.empty() != e.features.empty()) {
                throw Error(ErrorCode::ManifestError, where + ": raster and feature entries cannot be mixed");
            }
            if (!(e.timestamp > d.entries.back().timestamp)) {
                throw Error(ErrorCode::ManifestError, where + ": timestamps must be strictly increasing");
            }
        }
        d.entries.push_back(std::move(e));
    }
    if (d.intrinsics_path.empty()) throw Error(ErrorCode::ManifestError, quoted(manifest) + ": no 'intrinsics' line");
    d.intrinsics = load_intrinsics(d.intrinsics_path);
    return d;
}

void write_manifest(const Dataset& d, const fs::path& manifest) {
    std::ofstream out(manifest);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + quoted(manifest));
    const fs::path base = manifest.parent_path();
    auto rel = [&](const fs::path& p) { return fs::relative(p, base).generic_string(); };
    out << "# timestamp intensity depth | timestamp features\n";
    out << "intrinsics " << rel(d.intrinsics_path) << '\n';
    if (d.groundtruth) out << "groundtruth " << rel(*d.groundtruth) << '\n';
    for (const DatasetEntry& e : d.entries) {
        out << format_number(e.timestamp);
        if (e.features.empty()) out << ' ' << rel(e.intensity) << ' ' << rel(e.depth) << '\n';
        else out << ' ' << rel(e.features) << '\n';
    }
}

RgbdFrame read_frame(const Dataset& d, std::size_t i) {
    const DatasetEntry& e = d.entries.at(i);
    GrayImage gray = read_gray(e.intensity);
    DepthImage depth = read_depth_mm(e.depth);
    if (gray.width() != depth.width() || gray.height() != depth.height()) {
        throw Error(ErrorCode::BadRasterFormat, quoted(e.depth) + ": size differs from " + quoted(e.intensity));
    }
    return make_frame(std::move(gray), std::move(depth), d.intrinsics, e.timestamp, static_cast<long>(i));
}

FrameFeatures read_frame_features(const Dataset& d, std::size_t i, const PipelineConfig& cfg) {
    const DatasetEntry& e = d.entries.at(i);
    FrameFeatures f;
    f.index = static_cast<long>(i);
    f.timestamp = e.timestamp;
    if (!e.features.empty()) {
        f.features = load_features(e.features);
    } else {
        f.features = extract_features(read_frame(d, i), d.intrinsics, cfg, &f.detect_ms, &f.describe_ms);
    }
    f.features.set_frame_index(f.index);
    return f;
}

// ---------------------------------------------------------------- estimates

json estimate_to_json(const OdometryEstimate& e, bool with_timings) {
    json j;
    j["frame_a"] = e.frame_a;
    j["frame_b"] = e.frame_b;
    j["t_a"] = e.t_a;
    j["t_b"] = e.t_b;
    j["status"] = e.ok() ? "Ok" : "Failed";
    j["reason"] = e.ok() ? json(nullptr) : json(std::string(to_string(e.failure)));
    if (e.twist) {
        const Vec6 v = e.twist->vector();
        j["xi"] = json::array({v[0], v[1], v[2], v[3], v[4], v[5]});
        j["sigma_hat"] = matrix_json(e.sigma_hat);
        j["sigma_scaled"] = matrix_json(e.sigma_scaled);
    } else {
        j["xi"] = nullptr;
        j["sigma_hat"] = nullptr;
        j["sigma_scaled"] = nullptr;
    }
    j["inliers"] = e.inliers;
    j["matches"] = e.matches;
    j["features_a"] = e.features_a;
    j["features_b"] = e.features_b;
    j["inlier_threshold"] = e.inlier_threshold;
    if (with_timings) {
        const StageTimings& t = e.timings;
        j["timings_ms"] = json{{"detect", t.detect_ms},   {"describe", t.describe_ms}, {"match", t.match_ms},
                               {"reconstruct", t.reconstruct_ms}, {"ransac", t.ransac_ms},
                               {"covariance", t.covariance_ms},   {"total", t.total_ms}};
    } else {
        j["timings_ms"] = nullptr;
    }
    return j;
}

OdometryEstimate estimate_from_json(const json& j) {
    OdometryEstimate e;
    try {
        e.frame_a = j.at("frame_a").get<long>();
        e.frame_b = j.at("frame_b").get<long>();
        e.t_a = j.at("t_a").get<double>();
        e.t_b = j.at("t_b").get<double>();
        const auto status = j.at("status").get<std::string>();
        if (status == "Ok") {
            e.failure = FailureReason::none;
        } else {
            e.failure = failure_from(j.value("reason", std::string("NoConsensus")));
            if (e.failure == FailureReason::none) throw Error(ErrorCode::ParseError, "failed estimate without reason");
        }
        if (!j.at("xi").is_null()) {
            Vec6 v;
            for (int i = 0; i < 6; ++i) v[i] = j["xi"][static_cast<std::size_t>(i)].get<double>();
            e.twist = PoseTwist::from_vector(v);
        }
        e.sigma_hat = matrix_from(j.value("sigma_hat", json(nullptr)));
        e.sigma_scaled = matrix_from(j.value("sigma_scaled", json(nullptr)));
        e.inliers = j.value("inliers", std::size_t{0});
        e.matches = j.value("matches", std::size_t{0});
        e.features_a = j.value("features_a", std::size_t{0});
        e.features_b = j.value("features_b", std::size_t{0});
        e.inlier_threshold = j.value("inlier_threshold", 0.0);
        if (j.contains("timings_ms") && j["timings_ms"].is_object()) {
            const json& t = j["timings_ms"];
            e.timings.detect_ms = t.value("detect", 0.0);
            e.timings.describe_ms = t.value("describe", 0.0);
            e.timings.match_ms = t.value("match", 0.0);
            e.timings.reconstruct_ms = t.value("reconstruct", 0.0);
            e.timings.ransac_ms = t.value("ransac", 0.0);
            e.timings.covariance_ms = t.value("covariance", 0.0);
            e.timings.total_ms = t.value("total", 0.0);
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::ParseError, ex.what());
    }
    if (e.ok() && !e.twist) throw Error(ErrorCode::ParseError, "Ok estimate without xi");
    return e;
}

void write_estimates(std::ostream& out, const SequenceResult& r, const json& header, bool with_timings) {
    out << json{{"config", header}}.dump() << '\n';
    // Interleave gap records with estimates in frame order.
    std::size_t g = 0;
    for (const OdometryEstimate& e : r.estimates) {
        while (g < r.gaps.size() && r.gaps[g].frame < e.frame_b) {
            out << json{{"gap", {{"frame", r.gaps[g].frame}, {"reason", r.gaps[g].reason}}}}.dump() << '\n';
            ++g;
        }
        out << estimate_to_json(e, with_timings).dump() << '\n';
    }
    for (; g < r.gaps.size(); ++g) {
        out << json{{"gap", {{"frame", r.gaps[g].frame}, {"reason", r.gaps[g].reason}}}}.dump() << '\n';
    }
}

std::vector<OdometryEstimate> read_estimates(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));
    std::vector<OdometryEstimate> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            if (j.contains("config") || j.contains("gap")) continue;
            out.push_back(estimate_from_json(j));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------- trajectories

Trajectory read_tum(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + quoted(path));
    Trajectory t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0][0] == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (tok.size() != 8) throw Error(ErrorCode::ParseError, where + ": expected 8 fields");
        std::array<double, 8> v{};
        for (std::size_t i = 0; i < 8; ++i) v[i] = parse_double(tok[i], where);
        Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
        if (q.norm() < 1e-9) throw Error(ErrorCode::ParseError, where + ": zero quaternion");
        q.normalize();
        if (!t.poses.empty() && !(v[0] > t.poses.back().timestamp)) {
            throw Error(ErrorCode::ParseError, where + ": timestamps must be strictly increasing");
        }
        t.poses.push_back({v[0], {q.toRotationMatrix(), Vec3(v[1], v[2], v[3])}});
        t.gap.push_back(false);
    }
    return t;
}

void write_tum(const Trajectory& t, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + quoted(path));
    out << "# timestamp tx ty tz qx qy qz qw\n";
    for (const StampedPose& p : t.poses) {
        Eigen::Quaterniond q(p.pose.rotation);
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        out << format_number(p.timestamp) << ' ' << format_number(p.pose.translation.x()) << ' '
            << format_number(p.pose.translation.y()) << ' ' << format_number(p.pose.translation.z()) << ' '
            << format_number(q.x()) << ' ' << format_number(q.y()) << ' ' << format_number(q.z()) << ' '
            << format_number(q.w()) << '\n';
    }
}

json coverage_to_json(const CoverageReport& r) {
    static constexpr std::array<const char*, 6> axes{"tx", "ty", "tz", "wx", "wy", "wz"};
    auto table = [&](const std::array<std::array<double, 6>, 3>& f) {
        json j = json::object();
        for (std::size_t k = 0; k < 3; ++k) {
            json row = json::object();
            for (std::size_t a = 0; a < 6; ++a) row[axes[a]] = f[k][a];
            j[std::to_string(k + 1) + "sigma"] = row;
        }
        return j;
    };
    auto joint = [](const std::array<double, 3>& f) {
        return json{{"1sigma", f[0]}, {"2sigma", f[1]}, {"3sigma", f[2]}};
    };
    return json{{"samples", r.samples},
                {"singular", r.singular},
                {"multiplier", r.multiplier},
                {"per_axis", {{"sigma_hat", table(r.per_axis)}, {"scaled", table(r.per_axis_scaled)}}},
                {"joint", {{"sigma_hat", joint(r.joint)}, {"scaled", joint(r.joint_scaled)}}},
                {"nees",
                 {{"reference", 6},
                  {"mean", r.nees_mean},
                  {"mean_scaled", r.nees_mean_scaled},
                  {"p50", r.nees_p50},
                  {"p90", r.nees_p90},
                  {"p99", r.nees_p99}}},
                {"spikes", r.spikes}};
}

SynthConfig synth_config_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "synth config must be a JSON object");
    SynthConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "landmarks") c.landmarks = v.get<std::size_t>();
            else if (key == "box_min") c.box_min = vec_from(v, "box_min");
            else if (key == "box_max") c.box_max = vec_from(v, "box_max");
            else if (key == "shape") {
                const auto s = v.get<std::string>();
                if (s == "stationary" || s == "static") c.shape = TrajectoryShape::stationary;
                else if (s == "line") c.shape = TrajectoryShape::line;
                else if (s == "orbit") c.shape = TrajectoryShape::orbit;
                else throw Error(ErrorCode::InvalidConfig, "unknown shape '" + s + "'");
            } else if (key == "frames") c.frames = v.get<std::size_t>();
            else if (key == "frame_rate") c.frame_rate = v.get<double>();
            else if (key == "speed") c.speed = v.get<double>();
            else if (key == "direction") c.direction = vec_from(v, "direction");
            else if (key == "angular_rate") c.angular_rate = v.get<double>();
            else if (key == "noise") c.noise = v.get<bool>();
            else if (key == "outlier_rate") c.outlier_rate = v.get<double>();
            else if (key == "descriptor_flip") c.descriptor_flip = v.get<double>();
            else if (key == "render") c.render = v.get<bool>();
            else if (key == "texture_cell") c.texture_cell = v.get<double>();
            else if (key == "wall_depth") c.wall_depth = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "intrinsics") continue;  // consumed by the caller
            else throw Error(ErrorCode::InvalidConfig, "unknown synth key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

void write_synth_dataset(const SynthScene& scene, const SynthConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "intrinsics.json");
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + quoted(dir / "intrinsics.json"));
        out << intrinsics_to_json(scene.intrinsics).dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "synth_config.json");
        out << json{{"landmarks", cfg.landmarks},
                    {"box_min", vec_json(cfg.box_min)},
                    {"box_max", vec_json(cfg.box_max)},
                    {"shape", shape_name(cfg.shape)},
                    {"frames", cfg.frames},
                    {"frame_rate", cfg.frame_rate},
                    {"speed", cfg.speed},
                    {"direction", vec_json(cfg.direction)},
                    {"angular_rate", cfg.angular_rate},
                    {"noise", cfg.noise},
                    {"outlier_rate", cfg.outlier_rate},
                    {"descriptor_flip", cfg.descriptor_flip},
                    {"render", cfg.render},
                    {"texture_cell", cfg.texture_cell},
                    {"wall_depth", cfg.wall_depth},
                    {"seed", cfg.seed}}
                   .dump(2)
            << '\n';
    }
    write_tum(scene.truth, dir / "groundtruth.txt");

    Dataset d;
    d.root = dir;
    d.intrinsics_path = dir / "intrinsics.json";
    d.groundtruth = dir / "groundtruth.txt";
    auto stem = [](std::size_t i) {
        std::ostringstream s;
        s << std::setw(6) << std::setfill('0') << i;
        return s.str();
    };
    if (cfg.render) {
        fs::create_directories(dir / "intensity");
        fs::create_directories(dir / "depth");
        for (std::size_t i = 0; i < scene.frames.size(); ++i) {
            DatasetEntry e;
            e.timestamp = scene.truth.poses[i].timestamp;
            e.intensity = dir / "intensity" / (stem(i) + ".pgm");
            e.depth = dir / "depth" / (stem(i) + ".png");
            write_pgm(scene.frames[i].intensity, e.intensity);
            write_png16(depth_to_mm(scene.frames[i].depth), e.depth);
            d.entries.push_back(e);
        }
    } else {
        fs::create_directories(dir / "features");
        for (std::size_t i = 0; i < scene.features.size(); ++i) {
            DatasetEntry e;
            e.timestamp = scene.truth.poses[i].timestamp;
            e.features = dir / "features" / (stem(i) + ".csv");
            save_features(scene.features[i], e.features);
            d.entries.push_back(e);
        }
    }
    write_manifest(d, dir / "manifest.txt");
}

std::string format_number(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("nan");
}

}  // namespace rgbd
