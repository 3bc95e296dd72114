// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>

#include "viewflow/errors.hpp"

namespace viewflow {

// RGB image with values in [0, 1], one height x width plane per channel.
struct Image {
    int width = 0;
    int height = 0;
    std::array<Eigen::MatrixXd, 3> ch;

    Image() = default;
    Image(int w, int h) : width(w), height(h) {
        for (auto& c : ch) c = Eigen::MatrixXd::Zero(h, w);
    }

    static Image constant(int w, int h, const Eigen::Vector3d& rgb) {
        Image img(w, h);
        for (int c = 0; c < 3; ++c) img.ch[static_cast<std::size_t>(c)].setConstant(rgb[c]);
        return img;
    }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
};

} // namespace viewflow
