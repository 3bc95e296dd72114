// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "viewflow/camera.hpp"
#include "viewflow/image.hpp"
#include "viewflow/rng.hpp"

namespace viewflow {

// Rigid primitive moving along a quadratic path:
// center(t) = center0 + velocity * t + accel * t^2.
struct Primitive {
    enum class Kind : std::uint8_t { kSphere, kBox };
    Kind kind = Kind::kSphere;
    Eigen::Vector3d center0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d accel = Eigen::Vector3d::Zero();
    double size = 0.5; // sphere radius or box half-extent
    Eigen::Vector3d color = Eigen::Vector3d::Ones();

    Eigen::Vector3d center_at(double t) const { return center0 + velocity * t + accel * t * t; }
};

// Deterministic procedural 4-D scene: flat-shaded rigid primitives over a
// constant background, fully determined by its fields.
struct SceneSpec {
    std::uint64_t seed = 0;
    std::vector<Primitive> primitives;
    Eigen::Vector3d background = Eigen::Vector3d(0.05, 0.05, 0.08);
    Eigen::Vector3d bounds_lo = Eigen::Vector3d(-1.5, -1.5, -1.5);
    Eigen::Vector3d bounds_hi = Eigen::Vector3d(1.5, 1.5, 1.5);
    double duration = 4.0;

    // primitive paths must stay inside the bounds over [0, duration]
    void validate(int samples = 64) const;
    std::uint64_t hash() const;
};

struct SceneParams {
    int min_primitives = 1;
    int max_primitives = 2;
    double min_size = 0.35;
    double max_size = 0.65;
    double max_speed = 0.25;  // world units per second
    double duration = 4.0;
};

SceneSpec random_scene(std::uint64_t seed, const SceneParams& params);

// Nearest-hit ray cast with flat shading; exact occlusion, no rendering noise.
// Primitives are evaluated at camera.timestamp.
Image render(const SceneSpec& scene, const CameraFrame& camera);

// ---------------------------------------------------------------------------

enum class TrajectoryKind : std::uint8_t {
    kStatic,
    kArcLeft,
    kArcRight,
    kTranslateUp,
    kTranslateDown,
    kSpiralZoom,
    kOrbit,
};

const char* to_string(TrajectoryKind k);
TrajectoryKind trajectory_kind_from_string(const std::string& name);

struct Intrinsics {
    double fx = 38.0, fy = 38.0;
    double cx = 16.0, cy = 16.0;
    int width = 32, height = 32;
};

// Analytic camera paths on a sphere of `radius` around `pivot`, all looking
// at the pivot (translate kinds keep the first frame's rotation).
struct TrajectoryParams {
    int frame_count = 3;
    double fps = 4.0;
    double t0 = 0.0; // first timestamp (seconds)
    Eigen::Vector3d pivot = Eigen::Vector3d::Zero();
    double radius = 4.0;
    double elevation = 0.15;     // radians above the horizontal plane
    double start_angle = 0.0;    // radians around the pivot
    double angle_span = 0.7;     // total sweep for arc kinds (orbit: 2*pi)
    double translate_span = 1.0; // world units for translate kinds
    double zoom_factor = 0.6;    // spiral end radius = radius * zoom_factor
};

CameraFrame look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& pivot,
                           const Intrinsics& intr, double timestamp);

Trajectory make_trajectory(TrajectoryKind kind, const TrajectoryParams& params,
                           const Intrinsics& intr);

} // namespace viewflow
