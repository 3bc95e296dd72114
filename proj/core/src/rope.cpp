// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/rope.hpp"

#include <cmath>

namespace viewflow {

AxisAllocation default_axis_allocation(int pairs) {
    if (pairs <= 0) throw InvalidDimension("default_axis_allocation: no channel pairs");
    AxisAllocation a;
    if (pairs < 4) {
        a.x_pairs = 1;
        a.y_pairs = pairs >= 2 ? 1 : 0;
        a.t_pairs = pairs >= 3 ? 1 : 0;
        return a;
    }
    int t = 2 * static_cast<int>(std::lround(pairs / 8.0));
    if (t < 2) t = 2;
    if (t > pairs - 2) t = pairs - 2;
    const int rest = pairs - t;
    a.t_pairs = t;
    a.x_pairs = (rest + 1) / 2;
    a.y_pairs = rest / 2;
    return a;
}

AxisFrequencyTable::AxisFrequencyTable(int dim, double base) : dim_(dim), base_(base) {
    if (dim <= 0 || dim % 2 != 0)
        throw InvalidDimension("AxisFrequencyTable: dimension must be positive and even");
    if (!(base > 0.0)) throw InvalidParams("AxisFrequencyTable: base must be positive");
    const int pairs = dim / 2;
    wx_ = Eigen::VectorXd::Zero(pairs);
    wy_ = Eigen::VectorXd::Zero(pairs);
    wt_ = Eigen::VectorXd::Zero(pairs);
}

AxisFrequencyTable AxisFrequencyTable::disjoint(int dim, AxisAllocation alloc, double base) {
    AxisFrequencyTable t(dim, base);
    const int pairs = dim / 2;
    if (alloc.x_pairs < 0 || alloc.y_pairs < 0 || alloc.t_pairs < 0 ||
        alloc.x_pairs + alloc.y_pairs + alloc.t_pairs != pairs)
        throw InvalidDimension("AxisFrequencyTable: allocation must partition d/2 pairs");
    auto fill = [&](Eigen::VectorXd& w, int begin, int count) {
        for (int j = 0; j < count; ++j)
            w[begin + j] = std::pow(base, -2.0 * j / static_cast<double>(dim));
    };
    fill(t.wx_, 0, alloc.x_pairs);
    fill(t.wy_, alloc.x_pairs, alloc.y_pairs);
    fill(t.wt_, alloc.x_pairs + alloc.y_pairs, alloc.t_pairs);
    return t;
}

AxisFrequencyTable AxisFrequencyTable::disjoint(int dim, double base) {
    return disjoint(dim, default_axis_allocation(dim / 2), base);
}

AxisFrequencyTable AxisFrequencyTable::additive_all_pairs(int dim, double base) {
    AxisFrequencyTable t(dim, base);
    for (int j = 0; j < dim / 2; ++j) {
        const double w = std::pow(base, -2.0 * j / static_cast<double>(dim));
        t.wx_[j] = w;
        t.wy_[j] = w;
        t.wt_[j] = w;
    }
    return t;
}

AxisFrequencyTable AxisFrequencyTable::single_axis(int dim, int axis, double base) {
    if (axis < 0 || axis > 2) throw InvalidParams("single_axis: axis must be 0, 1 or 2");
    AxisAllocation a;
    const int pairs = dim / 2;
    if (axis == 0) a.x_pairs = pairs;
    if (axis == 1) a.y_pairs = pairs;
    if (axis == 2) a.t_pairs = pairs;
    return disjoint(dim, a, base);
}

AxisFrequencyTable AxisFrequencyTable::make(int dim, FrequencyLayout layout, double base) {
    return layout == FrequencyLayout::kDisjointBlocks ? disjoint(dim, base)
                                                      : additive_all_pairs(dim, base);
}

RopePhases make_phases(TokenPos pos, const AxisFrequencyTable& table) {
    RopePhases p;
    p.source_position = pos;
    p.base = table.base();
    p.phases = pos.x * table.omega_x() + pos.y * table.omega_y() + pos.t * table.omega_t();
    return p;
}

void rotate_inplace(Eigen::Ref<Eigen::VectorXd> u, const Eigen::VectorXd& phases, double sign) {
    if (u.size() != 2 * phases.size())
        throw InvalidDimension("rotate: vector length must equal 2J");
    for (Eigen::Index j = 0; j < phases.size(); ++j) {
        const double c = std::cos(sign * phases[j]);
        const double s = std::sin(sign * phases[j]);
        const double a = u[2 * j];
        const double b = u[2 * j + 1];
        u[2 * j] = c * a - s * b;
        u[2 * j + 1] = s * a + c * b;
    }
}

Eigen::VectorXd rotate(const Eigen::VectorXd& u, const RopePhases& phases) {
    Eigen::VectorXd out = u;
    rotate_inplace(out, phases.phases);
    return out;
}

Eigen::VectorXd rope_video(const Eigen::VectorXd& u, TokenPos pos, const AxisFrequencyTable& table) {
    return rotate(u, make_phases(pos, table));
}

Eigen::VectorXd rope_camera(const Eigen::VectorXd& u, int x, int y, const AxisFrequencyTable& table) {
    return rotate(u, make_phases({x, y, 0}, table));
}

} // namespace viewflow
