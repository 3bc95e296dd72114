// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/world.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace viewflow {

void SceneSpec::validate(int samples) const {
    if (!(duration > 0.0)) throw InvalidParams("SceneSpec: duration must be positive");
    for (const auto& p : primitives) {
        if (!(p.size > 0.0)) throw InvalidParams("SceneSpec: primitive size must be positive");
        for (int i = 0; i <= samples; ++i) {
            const double t = duration * i / static_cast<double>(samples);
            const Eigen::Vector3d c = p.center_at(t);
            for (int a = 0; a < 3; ++a)
                if (c[a] < bounds_lo[a] || c[a] > bounds_hi[a])
                    throw InvalidParams("SceneSpec: primitive path leaves world bounds");
        }
    }
}

namespace {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

void hash_double(std::uint64_t& h, double v) { h = fnv1a(&v, sizeof(v), h); }
void hash_vec(std::uint64_t& h, const Eigen::Vector3d& v) {
    for (int i = 0; i < 3; ++i) hash_double(h, v[i]);
}

} // namespace

std::uint64_t SceneSpec::hash() const {
    std::uint64_t h = fnv1a(&seed, sizeof(seed));
    hash_vec(h, background);
    hash_vec(h, bounds_lo);
    hash_vec(h, bounds_hi);
    hash_double(h, duration);
    for (const auto& p : primitives) {
        const auto kind = static_cast<std::uint8_t>(p.kind);
        h = fnv1a(&kind, 1, h);
        hash_vec(h, p.center0);
        hash_vec(h, p.velocity);
        hash_vec(h, p.accel);
        hash_double(h, p.size);
        hash_vec(h, p.color);
    }
    return h;
}

SceneSpec random_scene(std::uint64_t seed, const SceneParams& params) {
    // small palette keeps the learning problem easy at desk scale
    static const Eigen::Vector3d kPalette[6] = {
        {0.85, 0.25, 0.20}, {0.20, 0.70, 0.30}, {0.20, 0.35, 0.85},
        {0.90, 0.80, 0.25}, {0.75, 0.30, 0.80}, {0.25, 0.75, 0.75},
    };
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    SceneSpec scene;
    scene.seed = seed;
    scene.duration = params.duration;

    const int count = rng.uniform_int(params.min_primitives, params.max_primitives);
    for (int i = 0; i < count; ++i) {
        Primitive p;
        p.kind = rng.uniform() < 0.5 ? Primitive::Kind::kSphere : Primitive::Kind::kBox;
        p.size = rng.uniform(params.min_size, params.max_size);
        p.color = kPalette[rng.uniform_index(6)];
        // keep the whole path inside the bounds: start well inside and cap
        // total displacement
        const double margin = p.size + params.max_speed * params.duration;
        for (int a = 0; a < 3; ++a) {
            const double lo = scene.bounds_lo[a] + margin;
            const double hi = scene.bounds_hi[a] - margin;
            p.center0[a] = rng.uniform(lo, hi);
            p.velocity[a] = rng.uniform(-params.max_speed, params.max_speed);
            p.accel[a] = rng.uniform(-0.2, 0.2) * params.max_speed / params.duration;
        }
        scene.primitives.push_back(p);
    }
    return scene;
}

namespace {

// nearest positive intersection or +inf
double intersect_sphere(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                        const Eigen::Vector3d& center, double radius) {
    const Eigen::Vector3d oc = ro - center;
    const double b = oc.dot(rd);
    const double disc = b * b - (oc.squaredNorm() - radius * radius);
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    const double s = std::sqrt(disc);
    const double t0 = -b - s;
    if (t0 > 1e-9) return t0;
    const double t1 = -b + s;
    if (t1 > 1e-9) return t1;
    return std::numeric_limits<double>::infinity();
}

double intersect_box(const Eigen::Vector3d& ro, const Eigen::Vector3d& rd,
                     const Eigen::Vector3d& center, double half) {
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double lo = center[a] - half;
        const double hi = center[a] + half;
        if (std::abs(rd[a]) < 1e-15) {
            if (ro[a] < lo || ro[a] > hi) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t1 = (lo - ro[a]) / rd[a];
        double t2 = (hi - ro[a]) / rd[a];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return std::numeric_limits<double>::infinity();
    }
    if (tmin > 1e-9) return tmin;
    if (tmax > 1e-9) return tmax;
    return std::numeric_limits<double>::infinity();
}

} // namespace

Image render(const SceneSpec& scene, const CameraFrame& camera) {
    camera.validate();
    Image img(camera.width, camera.height);
    const Eigen::Matrix3d rot_t = camera.rotation.transpose();
    const Eigen::Vector3d origin = camera.center();
    const double t = camera.timestamp;

    std::vector<Eigen::Vector3d> centers;
    centers.reserve(scene.primitives.size());
    for (const auto& p : scene.primitives) centers.push_back(p.center_at(t));

    for (int v = 0; v < camera.height; ++v) {
        for (int u = 0; u < camera.width; ++u) {
            const Eigen::Vector3d dir_cam((u + 0.5 - camera.cx) / camera.fx,
                                          (v + 0.5 - camera.cy) / camera.fy, 1.0);
            const Eigen::Vector3d rd = (rot_t * dir_cam).normalized();
            double best = std::numeric_limits<double>::infinity();
            const Eigen::Vector3d* color = &scene.background;
            for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
                const auto& p = scene.primitives[i];
                const double hit = p.kind == Primitive::Kind::kSphere
                                       ? intersect_sphere(origin, rd, centers[i], p.size)
                                       : intersect_box(origin, rd, centers[i], p.size);
                if (hit < best) {
                    best = hit;
                    color = &p.color;
                }
            }
            for (int c = 0; c < 3; ++c) img.ch[static_cast<std::size_t>(c)](v, u) = (*color)[c];
        }
    }
    return img;
}

// ---------------------------------------------------------------------------

const char* to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::kStatic: return "static";
        case TrajectoryKind::kArcLeft: return "arc_left";
        case TrajectoryKind::kArcRight: return "arc_right";
        case TrajectoryKind::kTranslateUp: return "translate_up";
        case TrajectoryKind::kTranslateDown: return "translate_down";
        case TrajectoryKind::kSpiralZoom: return "spiral_zoom";
        case TrajectoryKind::kOrbit: return "orbit";
    }
    return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& name) {
    for (auto k : {TrajectoryKind::kStatic, TrajectoryKind::kArcLeft, TrajectoryKind::kArcRight,
                   TrajectoryKind::kTranslateUp, TrajectoryKind::kTranslateDown,
                   TrajectoryKind::kSpiralZoom, TrajectoryKind::kOrbit})
        if (name == to_string(k)) return k;
    throw InvalidParams("unknown trajectory kind: " + name);
}

CameraFrame look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& pivot,
                           const Intrinsics& intr, double timestamp) {
    Eigen::Vector3d forward = pivot - position;
    if (forward.norm() < 1e-12) throw InvalidParams("look_at_camera: position equals pivot");
    forward.normalize();
    Eigen::Vector3d up(0.0, 1.0, 0.0);
    if (std::abs(up.dot(forward)) > 1.0 - 1e-9) up = Eigen::Vector3d(0.0, 0.0, 1.0);
    const Eigen::Vector3d right = up.cross(forward).normalized();
    const Eigen::Vector3d cam_up = forward.cross(right);

    // camera axes as world columns; extrinsic rotation is the transpose
    Eigen::Matrix3d cam_to_world;
    cam_to_world.col(0) = right;
    cam_to_world.col(1) = cam_up;
    cam_to_world.col(2) = forward;

    CameraFrame f;
    f.rotation = cam_to_world.transpose();
    f.translation = -(f.rotation * position);
    f.fx = intr.fx;
    f.fy = intr.fy;
    f.cx = intr.cx;
    f.cy = intr.cy;
    f.width = intr.width;
    f.height = intr.height;
    f.timestamp = timestamp;
    return f;
}

namespace {

Eigen::Vector3d ring_position(const TrajectoryParams& p, double angle, double radius) {
    return p.pivot + radius * Eigen::Vector3d(std::cos(p.elevation) * std::sin(angle),
                                              std::sin(p.elevation),
                                              -std::cos(p.elevation) * std::cos(angle));
}

} // namespace

Trajectory make_trajectory(TrajectoryKind kind, const TrajectoryParams& p,
                           const Intrinsics& intr) {
    if (p.frame_count < 1) throw InvalidParams("make_trajectory: frame_count must be >= 1");
    if (!(p.fps > 0.0)) throw InvalidParams("make_trajectory: fps must be positive");
    if (!(p.radius > 0.0)) throw InvalidParams("make_trajectory: radius must be positive");
    if (!(p.zoom_factor > 0.0)) throw InvalidParams("make_trajectory: zoom_factor must be positive");

    Trajectory traj;
    const int n = p.frame_count;
    // fraction of the sweep completed at frame i
    auto progress = [&](int i) {
        return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    };

    for (int i = 0; i < n; ++i) {
        const double ts = p.t0 + i / p.fps;
        const double s = progress(i);
        CameraFrame f;
        switch (kind) {
            case TrajectoryKind::kStatic:
                f = look_at_camera(ring_position(p, p.start_angle, p.radius), p.pivot, intr, ts);
                break;
            case TrajectoryKind::kArcLeft:
                f = look_at_camera(ring_position(p, p.start_angle - s * p.angle_span, p.radius),
                                   p.pivot, intr, ts);
                break;
            case TrajectoryKind::kArcRight:
                f = look_at_camera(ring_position(p, p.start_angle + s * p.angle_span, p.radius),
                                   p.pivot, intr, ts);
                break;
            case TrajectoryKind::kTranslateUp:
            case TrajectoryKind::kTranslateDown: {
                const double sign = kind == TrajectoryKind::kTranslateUp ? 1.0 : -1.0;
                CameraFrame base =
                    look_at_camera(ring_position(p, p.start_angle, p.radius), p.pivot, intr, ts);
                const Eigen::Vector3d pos = ring_position(p, p.start_angle, p.radius) +
                                            Eigen::Vector3d(0.0, sign * s * p.translate_span, 0.0);
                base.translation = -(base.rotation * pos);
                f = base;
                break;
            }
            case TrajectoryKind::kSpiralZoom: {
                const double radius = p.radius * (1.0 + s * (p.zoom_factor - 1.0));
                f = look_at_camera(ring_position(p, p.start_angle + s * p.angle_span, radius),
                                   p.pivot, intr, ts);
                break;
            }
            case TrajectoryKind::kOrbit:
                f = look_at_camera(
                    ring_position(p, p.start_angle + s * 2.0 * std::numbers::pi, p.radius),
                    p.pivot, intr, ts);
                break;
        }
        traj.frames.push_back(f);
    }
    return traj;
}

} // namespace viewflow
