// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/camera.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace viewflow {

Eigen::Vector3d CameraFrame::pixel_ray(int u, int v) const {
    const Eigen::Vector3d dir_cam((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1.0);
    return (rotation.transpose() * dir_cam).normalized();
}

void CameraFrame::validate() const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    const double dev = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (dev >= 1e-9 || rotation.determinant() <= 0.0)
        throw InvalidPose("rotation is not orthonormal with determinant +1");
    if (!(fx > 0.0) || !(fy > 0.0))
        throw InvalidIntrinsics("focal lengths must be strictly positive");
    if (width < 1 || height < 1)
        throw InvalidIntrinsics("image dimensions must be at least 1x1");
}

void Trajectory::validate() const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
        frames[i].validate();
        if (i > 0) {
            if (!(frames[i].timestamp > frames[i - 1].timestamp))
                throw InvalidParams("trajectory timestamps must be strictly increasing");
            if (frames[i].width != frames[0].width || frames[i].height != frames[0].height)
                throw ShapeError("trajectory frames must share image dimensions");
        }
    }
}

PluckerMap compute_plucker_map(const CameraFrame& frame) {
    frame.validate();
    PluckerMap map;
    map.width = frame.width;
    map.height = frame.height;
    for (auto& ch : map.channels) ch.resize(frame.height, frame.width);

    const Eigen::Matrix3d rot_t = frame.rotation.transpose();
    const Eigen::Vector3d origin = -(rot_t * frame.translation);
    for (int v = 0; v < frame.height; ++v) {
        for (int u = 0; u < frame.width; ++u) {
            const Eigen::Vector3d dir_cam((u + 0.5 - frame.cx) / frame.fx,
                                          (v + 0.5 - frame.cy) / frame.fy, 1.0);
            const Eigen::Vector3d d = (rot_t * dir_cam).normalized();
            const Eigen::Vector3d m = origin.cross(d);
            for (int c = 0; c < 3; ++c) {
                map.channels[static_cast<std::size_t>(c)](v, u) = d[c];
                map.channels[static_cast<std::size_t>(c + 3)](v, u) = m[c];
            }
        }
    }
    return map;
}

std::vector<CameraFrame> normalize_to_reference(const std::vector<CameraFrame>& frames,
                                                int reference_index) {
    if (frames.empty()) throw EmptyInput("normalize_to_reference: no frames");
    if (reference_index < 0 || reference_index >= static_cast<int>(frames.size()))
        throw InvalidParams("normalize_to_reference: reference index out of range");

    const CameraFrame& ref = frames[static_cast<std::size_t>(reference_index)];
    const Eigen::Matrix3d ref_rot_t = ref.rotation.transpose();

    std::vector<CameraFrame> out = frames;
    for (auto& f : out) {
        const Eigen::Matrix3d rel = f.rotation * ref_rot_t;
        f.translation = f.translation - rel * ref.translation;
        f.rotation = rel;
    }
    return out;
}

ScaleAlignment align_metric_scale(const Trajectory& pred, const Trajectory& gt) {
    if (pred.size() != gt.size())
        throw LengthMismatch("align_metric_scale: trajectory lengths differ");
    if (pred.size() < 2)
        throw InvalidParams("align_metric_scale: need at least two frames");

    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += pred.frames[i].translation.dot(gt.frames[i].translation);
        den += pred.frames[i].translation.squaredNorm();
    }
    if (den <= 0.0) return {1.0, true};
    return {num / den, false};
}

namespace {

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

std::string format_pose_line(const CameraFrame& f) {
    std::string line;
    const double fields[17] = {f.timestamp,
                               f.fx,
                               f.fy,
                               f.cx,
                               f.cy,
                               f.rotation(0, 0),
                               f.rotation(0, 1),
                               f.rotation(0, 2),
                               f.rotation(1, 0),
                               f.rotation(1, 1),
                               f.rotation(1, 2),
                               f.rotation(2, 0),
                               f.rotation(2, 1),
                               f.rotation(2, 2),
                               f.translation[0],
                               f.translation[1],
                               f.translation[2]};
    for (int i = 0; i < 17; ++i) {
        if (i) line += ' ';
        append_g17(line, fields[i]);
    }
    return line;
}

CameraFrame parse_pose_line(const std::string& line, int width, int height) {
    std::istringstream is(line);
    double v[17];
    for (double& x : v) {
        if (!(is >> x)) throw IoError("pose line has fewer than 17 fields: " + line);
    }
    CameraFrame f;
    f.timestamp = v[0];
    f.fx = v[1];
    f.fy = v[2];
    f.cx = v[3];
    f.cy = v[4];
    f.rotation << v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12], v[13];
    f.translation << v[14], v[15], v[16];
    f.width = width;
    f.height = height;
    return f;
}

void write_pose_file(const std::string& path, const std::vector<CameraFrame>& frames) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open pose file for writing: " + path);
    for (const auto& f : frames) os << format_pose_line(f) << '\n';
    if (!os) throw IoError("failed writing pose file: " + path);
}

std::vector<CameraFrame> read_pose_file(const std::string& path, int width, int height) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open pose file: " + path);
    std::vector<CameraFrame> frames;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        frames.push_back(parse_pose_line(line, width, height));
    }
    return frames;
}

} // namespace viewflow
