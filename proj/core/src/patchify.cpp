// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/patchify.hpp"

namespace viewflow {

Eigen::MatrixXd flatten_patch_group(const std::vector<const std::vector<Eigen::MatrixXd>*>& planes,
                                    int p_s) {
    if (planes.empty()) throw EmptyInput("flatten_patch_group: no frames");
    const int p_t = static_cast<int>(planes.size());
    const int channels = static_cast<int>(planes[0]->size());
    const int height = static_cast<int>((*planes[0])[0].rows());
    const int width = static_cast<int>((*planes[0])[0].cols());
    if (p_s <= 0 || height % p_s != 0 || width % p_s != 0)
        throw ShapeError("flatten_patch_group: image size not divisible by patch size");

    const int gw = width / p_s;
    const int gh = height / p_s;
    Eigen::MatrixXd out(channels * p_t * p_s * p_s, gw * gh);
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            const int col = gy * gw + gx;
            for (int c = 0; c < channels; ++c) {
                for (int dt = 0; dt < p_t; ++dt) {
                    const Eigen::MatrixXd& plane = (*planes[static_cast<std::size_t>(dt)])
                        [static_cast<std::size_t>(c)];
                    for (int dy = 0; dy < p_s; ++dy)
                        for (int dx = 0; dx < p_s; ++dx)
                            out(((c * p_t + dt) * p_s + dy) * p_s + dx, col) =
                                plane(gy * p_s + dy, gx * p_s + dx);
                }
            }
        }
    }
    return out;
}

void unflatten_patch_group(const Eigen::MatrixXd& tokens, int p_s, int channels, int height,
                           int width, std::vector<std::vector<Eigen::MatrixXd>*>& planes_out) {
    const int p_t = static_cast<int>(planes_out.size());
    if (p_s <= 0 || height % p_s != 0 || width % p_s != 0)
        throw ShapeError("unflatten_patch_group: image size not divisible by patch size");
    const int gw = width / p_s;
    const int gh = height / p_s;
    if (tokens.rows() != channels * p_t * p_s * p_s || tokens.cols() != gw * gh)
        throw ShapeError("unflatten_patch_group: token matrix shape mismatch");

    for (auto* frame : planes_out) {
        frame->resize(static_cast<std::size_t>(channels));
        for (auto& plane : *frame) plane.resize(height, width);
    }
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            const int col = gy * gw + gx;
            for (int c = 0; c < channels; ++c) {
                for (int dt = 0; dt < p_t; ++dt) {
                    Eigen::MatrixXd& plane =
                        (*planes_out[static_cast<std::size_t>(dt)])[static_cast<std::size_t>(c)];
                    for (int dy = 0; dy < p_s; ++dy)
                        for (int dx = 0; dx < p_s; ++dx)
                            plane(gy * p_s + dy, gx * p_s + dx) =
                                tokens(((c * p_t + dt) * p_s + dy) * p_s + dx, col);
                }
            }
        }
    }
}

std::vector<Eigen::MatrixXd> image_planes(const Image& img) {
    return {img.ch[0], img.ch[1], img.ch[2]};
}

std::vector<Eigen::MatrixXd> plucker_planes(const PluckerMap& map) {
    return {map.channels[0], map.channels[1], map.channels[2],
            map.channels[3], map.channels[4], map.channels[5]};
}

Image planes_to_image(const std::vector<Eigen::MatrixXd>& planes) {
    if (planes.size() != 3) throw ShapeError("planes_to_image: expected 3 channels");
    Image img;
    img.height = static_cast<int>(planes[0].rows());
    img.width = static_cast<int>(planes[0].cols());
    img.ch = {planes[0], planes[1], planes[2]};
    return img;
}

} // namespace viewflow
