#include "rgbd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Cholesky>

#include "rgbd/error.hpp"
#include "rgbd/random.hpp"

namespace rgbd {

namespace {

constexpr std::uint64_t kLandmarkStream = 0;
constexpr std::uint64_t kObservationStream = 1000;

std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finaliser, used only to hash texture cells.
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint8_t cell_intensity(std::uint64_t seed, int plane, std::int64_t u, std::int64_t v) {
    const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(plane) ^ mix(static_cast<std::uint64_t>(u) ^
                                                                                     mix(static_cast<std::uint64_t>(v)))));
    return static_cast<std::uint8_t>(20 + h % 216);
}

double median_period(const Trajectory& t) {
    if (t.size() < 2) return 0.0;
    std::vector<double> dt;
    dt.reserve(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) dt.push_back(t.poses[i].timestamp - t.poses[i - 1].timestamp);
    std::nth_element(dt.begin(), dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2), dt.end());
    return dt[dt.size() / 2];
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

void SynthConfig::validate() const {
    std::ostringstream msg;
    if (frames < 1) msg << "frames must be >= 1; ";
    if (!(frame_rate > 0.0)) msg << "frame_rate must be positive; ";
    if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) msg << "outlier_rate must be in [0, 1]; ";
    if (!(descriptor_flip >= 0.0 && descriptor_flip <= 0.5)) msg << "descriptor_flip must be in [0, 0.5]; ";
    if (!(box_max.array() > box_min.array()).all()) msg << "landmark box is empty; ";
    if (!(texture_cell > 0.0) || !(wall_depth > 0.0)) msg << "render geometry must be positive; ";
    if (shape == TrajectoryShape::line && direction.norm() == 0.0 && speed != 0.0) msg << "line direction is zero; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidConfig, msg.str());
}

Trajectory synth_trajectory(const SynthConfig& cfg) {
    Trajectory t;
    const double zc = 0.5 * (cfg.box_min.z() + cfg.box_max.z());
    const Vec3 center(0.0, 0.0, zc);
    for (std::size_t i = 0; i < cfg.frames; ++i) {
        const double s = static_cast<double>(i);
        StampedPose p;
        p.timestamp = s / cfg.frame_rate;
        switch (cfg.shape) {
            case TrajectoryShape::stationary:
                break;
            case TrajectoryShape::line:
                p.pose.rotation = rot_y(cfg.angular_rate * s);
                p.pose.translation = cfg.speed == 0.0 ? Vec3::Zero() : Vec3(cfg.direction.normalized() * cfg.speed * s);
                break;
            case TrajectoryShape::orbit: {
                const double angle = cfg.speed * s / zc;
                p.pose.rotation = rot_y(angle);
                p.pose.translation = center - p.pose.rotation * Vec3(0.0, 0.0, zc);
                break;
            }
        }
        t.poses.push_back(p);
        t.gap.push_back(false);
    }
    return t;
}

FeatureSet observe_landmarks(const std::vector<Landmark>& landmarks, const RigidTransform& pose,
                             const CameraIntrinsics& k, bool noise, double flip, Rng* rng) {
    FeatureSet set(DescriptorKind::binary, 256);
    const RigidTransform world_to_cam = invert(pose);
    const double lo_x = k.border_margin;
    const double lo_y = k.border_margin;
    const double hi_x = k.width - k.border_margin;
    const double hi_y = k.height - k.border_margin;
    auto visible = [&](const Vec2& px, double z) {
        return px.x() >= lo_x && px.y() >= lo_y && px.x() < hi_x && px.y() < hi_y && k.depth_in_range(z);
    };

    for (const Landmark& lm : landmarks) {
        Vec3 p = world_to_cam.apply(lm.position);
        if (!(p.z() > 0.0)) continue;
        Vec2 px = project(p, k);
        if (!visible(px, p.z())) continue;
        if (noise && rng) {
            const Vec3 sigma = noise_sigma(px.x(), px.y(), p.z(), k);
            for (int c = 0; c < 3; ++c) p[c] += sigma[c] * rng->normal();
            if (!(p.z() > 0.0)) continue;
            px = project(p, k);
            if (!visible(px, p.z())) continue;
        }
        std::array<std::uint64_t, 4> bits = lm.descriptor;
        if (rng && flip > 0.0) {
            for (int b = 0; b < 256; ++b) {
                if (rng->uniform() < flip) bits[static_cast<std::size_t>(b / 64)] ^= std::uint64_t{1} << (b % 64);
            }
        }
        set.add_binary({px.x(), px.y(), 1.0, p.z()}, bits);
    }
    return set;
}

RgbdFrame render_frame(const RigidTransform& pose, const CameraIntrinsics& k, const SynthConfig& cfg,
                       Rng* depth_noise, double timestamp, long index) {
    struct Plane {
        int axis;       // 0 = x, 1 = y, 2 = z
        double offset;  // plane: p[axis] == offset
    };
    const double half_w = 0.9 * cfg.wall_depth;
    const std::array<Plane, 5> planes{{
        {2, cfg.wall_depth},  // back wall
        {1, 0.6 * cfg.wall_depth},   // floor (camera y points down)
        {1, -0.6 * cfg.wall_depth},  // ceiling
        {0, -half_w},
        {0, half_w},
    }};

    GrayImage gray(k.width, k.height, 0);
    DepthImage depth(k.width, k.height, 0.0f);
    const Vec3 origin = pose.translation;
    for (int y = 0; y < k.height; ++y) {
        for (int x = 0; x < k.width; ++x) {
            const Vec3 ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
            const Vec3 ray = pose.rotation * ray_cam;
            double best_t = std::numeric_limits<double>::infinity();
            int best_plane = -1;
            for (int pi = 0; pi < static_cast<int>(planes.size()); ++pi) {
                const Plane& pl = planes[static_cast<std::size_t>(pi)];
                const double denom = ray[pl.axis];
                if (std::abs(denom) < 1e-12) continue;
                const double t = (pl.offset - origin[pl.axis]) / denom;
                if (t > 1e-6 && t < best_t) {
                    best_t = t;
                    best_plane = pi;
                }
            }
            if (best_plane < 0) continue;
            const Vec3 hit = origin + best_t * ray;
            const int axis = planes[static_cast<std::size_t>(best_plane)].axis;
            const int ua = axis == 0 ? 1 : 0;
            const int va = axis == 2 ? 1 : 2;
            const auto u = static_cast<std::int64_t>(std::floor(hit[ua] / cfg.texture_cell));
            const auto v = static_cast<std::int64_t>(std::floor(hit[va] / cfg.texture_cell));
            gray(x, y) = cell_intensity(cfg.seed, best_plane, u, v);
            // Camera-frame depth equals the ray parameter because ray_cam.z == 1.
            double z = best_t;
            if (depth_noise) z += k.noise.kappa() * z * z * depth_noise->normal();
            depth(x, y) = static_cast<float>(z);
        }
    }
    return make_frame(std::move(gray), std::move(depth), k, timestamp, index);
}

SynthScene synth_scene(const SynthConfig& cfg, const CameraIntrinsics& k) {
    cfg.validate();
    k.validate();
    SynthScene scene;
    scene.intrinsics = k;
    scene.truth = synth_trajectory(cfg);

    Rng rng(cfg.seed, kLandmarkStream);
    scene.landmarks.resize(cfg.landmarks);
    for (Landmark& lm : scene.landmarks) {
        for (int c = 0; c < 3; ++c) lm.position[c] = rng.uniform(cfg.box_min[c], cfg.box_max[c]);
        for (auto& w : lm.descriptor) w = rng.next();
    }

    // Confusable outliers: pairs of landmarks sharing one descriptor.
    std::vector<std::size_t> order(cfg.landmarks);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    const auto confusable = static_cast<std::size_t>(std::llround(cfg.outlier_rate * static_cast<double>(cfg.landmarks)));
    for (std::size_t p = 0; p + 1 < confusable; p += 2) {
        scene.landmarks[order[p + 1]].descriptor = scene.landmarks[order[p]].descriptor;
    }

    for (std::size_t i = 0; i < cfg.frames; ++i) {
        const StampedPose& sp = scene.truth.poses[i];
        Rng obs(cfg.seed, kObservationStream + i);
        if (cfg.render) {
            scene.frames.push_back(
                render_frame(sp.pose, k, cfg, cfg.noise ? &obs : nullptr, sp.timestamp, static_cast<long>(i)));
        } else {
            FeatureSet fs = observe_landmarks(scene.landmarks, sp.pose, k, cfg.noise, cfg.descriptor_flip, &obs);
            fs.set_frame_index(static_cast<long>(i));
            scene.features.push_back(std::move(fs));
        }
    }
    return scene;
}

Trajectory integrate_trajectory(const std::vector<OdometryEstimate>& estimates, const RigidTransform& initial,
                                double initial_timestamp) {
    Trajectory t;
    t.poses.push_back({initial_timestamp, initial});
    t.gap.push_back(false);
    for (const OdometryEstimate& e : estimates) {
        const RigidTransform& prev = t.poses.back().pose;
        if (e.ok() && e.twist) {
            t.poses.push_back({e.t_b, compose(prev, transform_of(*e.twist))});
            t.gap.push_back(false);
        } else {
            t.poses.push_back({e.t_b, prev});
            t.gap.push_back(true);
        }
    }
    return t;
}

std::vector<PoseTwist> relative_twists(const Trajectory& t) {
    std::vector<PoseTwist> out;
    for (std::size_t i = 1; i < t.size(); ++i) {
        out.push_back(twist_of(compose(invert(t.poses[i - 1].pose), t.poses[i].pose)));
    }
    return out;
}

std::size_t associate(const Trajectory& gt, double t, double tolerance) {
    if (gt.poses.empty()) return static_cast<std::size_t>(-1);
    const auto it = std::lower_bound(gt.poses.begin(), gt.poses.end(), t,
                                     [](const StampedPose& p, double v) { return p.timestamp < v; });
    std::size_t best = static_cast<std::size_t>(-1);
    double best_d = std::numeric_limits<double>::infinity();
    const auto idx = static_cast<std::size_t>(it - gt.poses.begin());
    for (std::size_t j : {idx == 0 ? idx : idx - 1, idx}) {
        if (j >= gt.poses.size()) continue;
        const double d = std::abs(gt.poses[j].timestamp - t);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best_d <= tolerance ? best : static_cast<std::size_t>(-1);
}

ComparisonResult compare(const Trajectory& est, const Trajectory& gt) {
    ComparisonResult r;
    const double tol = 0.5 * median_period(gt) + 1e-9;
    constexpr auto none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> assoc(est.size(), none);
    for (std::size_t i = 0; i < est.size(); ++i) {
        assoc[i] = associate(gt, est.poses[i].timestamp, tol);
        if (assoc[i] == none) {
            ++r.unassociated;
            continue;
        }
        const RigidTransform& e = est.poses[i].pose;
        const RigidTransform& g = gt.poses[assoc[i]].pose;
        r.timestamps.push_back(est.poses[i].timestamp);
        r.position_error.push_back(e.translation - g.translation);
        r.orientation_error.push_back(so3_log(g.rotation.transpose() * e.rotation));
    }
    if (static_cast<double>(r.unassociated) > 0.1 * static_cast<double>(est.size())) {
        std::ostringstream msg;
        msg << r.unassociated << " of " << est.size() << " poses have no ground-truth match within " << tol << " s";
        throw Error(ErrorCode::TimestampMismatch, msg.str());
    }
    for (std::size_t i = 1; i < est.size(); ++i) {
        if (assoc[i - 1] == none || assoc[i] == none) continue;
        const Vec6 e = twist_of(compose(invert(est.poses[i - 1].pose), est.poses[i].pose)).vector();
        const Vec6 g = twist_of(compose(invert(gt.poses[assoc[i - 1]].pose), gt.poses[assoc[i]].pose)).vector();
        r.twist_error.push_back(e - g);
    }
    return r;
}

TwistErrors twist_errors(const std::vector<OdometryEstimate>& estimates, const Trajectory& gt) {
    TwistErrors out;
    const double tol = 0.5 * median_period(gt) + 1e-9;
    constexpr auto none = static_cast<std::size_t>(-1);
    std::size_t usable = 0;
    std::size_t missed = 0;
    for (const OdometryEstimate& e : estimates) {
        if (!e.ok() || !e.twist) continue;
        ++usable;
        const std::size_t ja = associate(gt, e.t_a, tol);
        const std::size_t jb = associate(gt, e.t_b, tol);
        if (ja == none || jb == none) {
            ++missed;
            continue;
        }
        const Vec6 g = twist_of(compose(invert(gt.poses[ja].pose), gt.poses[jb].pose)).vector();
        out.errors.push_back(e.twist->vector() - g);
        out.covariances.push_back(e.sigma_hat);
        out.frames.push_back(e.frame_a);
    }
    if (static_cast<double>(missed) > 0.1 * static_cast<double>(usable)) {
        throw Error(ErrorCode::TimestampMismatch,
                    std::to_string(missed) + " of " + std::to_string(usable) + " estimates have no ground-truth pair");
    }
    return out;
}

double nees(const Vec6& e, const Mat6& s) {
    const Mat6 reg = s + 1e-12 * Mat6::Identity();
    Eigen::LDLT<Mat6> ldlt(reg);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return e.dot(ldlt.solve(e));
}

CoverageReport coverage(const std::vector<Vec6>& errors, const std::vector<Mat6>& covariances, double multiplier) {
    if (errors.size() != covariances.size()) {
        throw Error(ErrorCode::InvalidConfig, "error and covariance series differ in length");
    }
    CoverageReport r;
    r.samples = errors.size();
    r.multiplier = multiplier;
    if (errors.empty()) return r;

    std::array<std::array<std::size_t, 6>, 3> hit{};
    std::array<std::array<std::size_t, 6>, 3> hit_scaled{};
    std::array<std::size_t, 3> joint{};
    std::array<std::size_t, 3> joint_scaled{};
    std::vector<double> nees_values;
    std::vector<double> traces;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const Vec6& e = errors[i];
        const Mat6& s = covariances[i];
        for (int axis = 0; axis < 6; ++axis) {
            const double sd = std::sqrt(std::max(0.0, s(axis, axis)));
            const double sd_scaled = std::sqrt(std::max(0.0, multiplier * s(axis, axis)));
            for (int k = 1; k <= 3; ++k) {
                hit[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(axis)] += std::abs(e[axis]) < k * sd;
                hit_scaled[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(axis)] +=
                    std::abs(e[axis]) < k * sd_scaled;
            }
        }
        traces.push_back(s.topLeftCorner<3, 3>().trace());
        const double n = nees(e, s);
        if (std::isnan(n)) {
            ++r.singular;
            continue;
        }
        nees_values.push_back(n);
        for (int k = 1; k <= 3; ++k) {
            joint[static_cast<std::size_t>(k - 1)] += std::sqrt(n) < k;
            joint_scaled[static_cast<std::size_t>(k - 1)] += std::sqrt(n / multiplier) < k;
        }
    }

    const double count = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t a = 0; a < 6; ++a) {
            r.per_axis[k][a] = static_cast<double>(hit[k][a]) / count;
            r.per_axis_scaled[k][a] = static_cast<double>(hit_scaled[k][a]) / count;
        }
    }
    if (!nees_values.empty()) {
        const double m = static_cast<double>(nees_values.size());
        for (std::size_t k = 0; k < 3; ++k) {
            r.joint[k] = static_cast<double>(joint[k]) / m;
            r.joint_scaled[k] = static_cast<double>(joint_scaled[k]) / m;
        }
        r.nees_mean = std::accumulate(nees_values.begin(), nees_values.end(), 0.0) / m;
        r.nees_mean_scaled = r.nees_mean / multiplier;
        r.nees_p50 = percentile(nees_values, 0.5);
        r.nees_p90 = percentile(nees_values, 0.9);
        r.nees_p99 = percentile(nees_values, 0.99);
    }
    const double median_trace = percentile(traces, 0.5);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (traces[i] > 10.0 * median_trace) r.spikes.push_back(static_cast<long>(i));
    }
    return r;
}

}  // namespace rgbd
