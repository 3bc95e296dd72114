// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "viewflow/camera.hpp"
#include "viewflow/errors.hpp"
#include "viewflow/image.hpp"

namespace viewflow {

// Patch-volume flattening shared by the video tokenizer and the camera
// encoder. One patch volume spans p_t consecutive frames and a p_s x p_s
// pixel block; its values are flattened channel-major, then t, y, x:
//
//   flat_index = ((c * p_t + dt) * p_s + dy) * p_s + dx
//
// Token columns are ordered row-major over the token grid: y * (W/p_s) + x.

// planes: p_t frames, each a list of channel planes (height x width)
Eigen::MatrixXd flatten_patch_group(const std::vector<const std::vector<Eigen::MatrixXd>*>& planes,
                                    int p_s);

// inverse of flatten_patch_group; planes_out must be pre-sized
void unflatten_patch_group(const Eigen::MatrixXd& tokens, int p_s, int channels, int height,
                           int width, std::vector<std::vector<Eigen::MatrixXd>*>& planes_out);

// adapters
std::vector<Eigen::MatrixXd> image_planes(const Image& img);
std::vector<Eigen::MatrixXd> plucker_planes(const PluckerMap& map);
Image planes_to_image(const std::vector<Eigen::MatrixXd>& planes);

} // namespace viewflow
