// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "viewflow/errors.hpp"

namespace viewflow {

// One posed pinhole view at one instant.
//
// Extrinsics are world-to-camera: x_cam = rotation * x_world + translation.
// Pixel (u, v) rays pass through the pixel center (u + 0.5, v + 0.5).
struct CameraFrame {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    double timestamp = 0.0;

    // camera origin in world coordinates, -R^T t
    Eigen::Vector3d center() const { return -(rotation.transpose() * translation); }

    // world-frame unit ray through the center of pixel (u, v)
    Eigen::Vector3d pixel_ray(int u, int v) const;

    // throws InvalidPose / InvalidIntrinsics
    void validate() const;
};

// Per-pixel ray map. Channels 0-2 hold the unit ray direction d in world
// frame; channels 3-5 hold the moment m = o x d with o the camera center.
// Direction-first channel order is fixed; downstream encoders only need a
// consistent layout.
struct PluckerMap {
    int width = 0;
    int height = 0;
    std::array<Eigen::MatrixXd, 6> channels; // each height x width

    double at(int c, int v, int u) const { return channels[static_cast<std::size_t>(c)](v, u); }
};

// Ordered posed frames with strictly increasing timestamps.
struct Trajectory {
    std::vector<CameraFrame> frames;

    void validate() const; // strictly increasing timestamps, shared image size
    std::size_t size() const { return frames.size(); }
};

struct ScaleAlignment {
    double scale = 1.0;
    bool degenerate = false; // all predicted translations were zero
};

PluckerMap compute_plucker_map(const CameraFrame& frame);

// Re-expresses all poses relative to frames[reference_index]; the reference
// maps to the identity pose. Intrinsics and timestamps unchanged.
std::vector<CameraFrame> normalize_to_reference(const std::vector<CameraFrame>& frames,
                                                int reference_index);

// Least-squares scalar s minimizing sum ||s*t_pred - t_gt||^2 over the
// extrinsic translations. All-zero predictions return scale 1 with the
// degenerate flag set.
ScaleAlignment align_metric_scale(const Trajectory& pred, const Trajectory& gt);

// Pose file io; one frame per line:
//   timestamp fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2
// Values are written with 17 significant digits so that write/read/write
// round-trips bit-identically.
std::string format_pose_line(const CameraFrame& frame);
CameraFrame parse_pose_line(const std::string& line, int width, int height);
void write_pose_file(const std::string& path, const std::vector<CameraFrame>& frames);
std::vector<CameraFrame> read_pose_file(const std::string& path, int width, int height);

} // namespace viewflow
