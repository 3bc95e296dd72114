// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "viewflow/errors.hpp"

namespace viewflow {

// Integer token coordinates: spatial patch indices (x, y) and temporal index t.
struct TokenPos {
    int x = 0;
    int y = 0;
    int t = 0;
};

// How the per-axis frequency vectors fill the J = d/2 channel pairs.
//
// kDisjointBlocks gives each axis a contiguous block of pairs and zeros the
// other axes there, so every pair carries exactly one axis. This is the
// default: summing all axes into every pair collapses axis identity (a token
// at (1,0,0) would rotate identically to one at (0,1,0)).
// kAdditiveAllPairs is the literal all-axes-per-pair reading, kept selectable
// and tested.
enum class FrequencyLayout {
    kDisjointBlocks,
    kAdditiveAllPairs,
};

// Number of channel pairs owned by each axis under kDisjointBlocks.
struct AxisAllocation {
    int x_pairs = 0;
    int y_pairs = 0;
    int t_pairs = 0;
};

// Default split of J pairs: t gets J/4 rounded to the nearest even count,
// x and y share the remainder. Below J = 4 the axes are filled in x, y, t
// order with one pair each.
AxisAllocation default_axis_allocation(int pairs);

// Per-axis frequency vectors omega^(x), omega^(y), omega^(t), each of length
// J = d/2. Within an axis's allocated range the frequencies follow
// B^(-2j/d) with j counted from the start of the range, strictly decreasing.
class AxisFrequencyTable {
  public:
    static AxisFrequencyTable disjoint(int dim, AxisAllocation alloc, double base = 10000.0);
    static AxisFrequencyTable disjoint(int dim, double base = 10000.0); // default allocation
    static AxisFrequencyTable additive_all_pairs(int dim, double base = 10000.0);
    // all pairs assigned to one axis (0 = x, 1 = y, 2 = t); used for 1-D cases
    static AxisFrequencyTable single_axis(int dim, int axis, double base = 10000.0);

    static AxisFrequencyTable make(int dim, FrequencyLayout layout, double base = 10000.0);

    int dim() const { return dim_; }
    int pairs() const { return dim_ / 2; }
    double base() const { return base_; }
    const Eigen::VectorXd& omega_x() const { return wx_; }
    const Eigen::VectorXd& omega_y() const { return wy_; }
    const Eigen::VectorXd& omega_t() const { return wt_; }

  private:
    AxisFrequencyTable(int dim, double base);

    int dim_ = 0;
    double base_ = 10000.0;
    Eigen::VectorXd wx_, wy_, wt_;
};

// Per-pair rotation angles for one token position.
struct RopePhases {
    Eigen::VectorXd phases; // length J
    TokenPos source_position;
    double base = 10000.0;
};

// phi_j = x*omega_x[j] + y*omega_y[j] + t*omega_t[j]
RopePhases make_phases(TokenPos pos, const AxisFrequencyTable& table);

// Rotates each interleaved pair (u_{2j}, u_{2j+1}) by phases[j]. Norm
// preserving; throws InvalidDimension when len(u) != 2J.
Eigen::VectorXd rotate(const Eigen::VectorXd& u, const RopePhases& phases);
void rotate_inplace(Eigen::Ref<Eigen::VectorXd> u, const Eigen::VectorXd& phases, double sign = 1.0);

// Full 3-D position rotation, applied to video queries and keys.
Eigen::VectorXd rope_video(const Eigen::VectorXd& u, TokenPos pos, const AxisFrequencyTable& table);

// Camera tokens carry no temporal identity: same rotation with t pinned to 0.
Eigen::VectorXd rope_camera(const Eigen::VectorXd& u, int x, int y, const AxisFrequencyTable& table);

} // namespace viewflow
