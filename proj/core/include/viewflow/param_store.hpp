// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "viewflow/errors.hpp"
#include "viewflow/rng.hpp"

namespace viewflow {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;

// Named tensors packed into one flat double vector. Keeping parameters flat
// makes the optimizer, checkpointing and finite-difference checks trivial.
// Gradients live in caller-owned buffers of the same length so concurrent
// batch elements can accumulate independently.
class ParamStore {
  public:
    struct TensorInfo {
        std::string name;
        int rows = 0;
        int cols = 0;
        std::size_t offset = 0;
    };

    // registration; call finalize() once before use
    int add(const std::string& name, int rows, int cols);
    void finalize();
    bool finalized() const { return finalized_; }

    std::size_t size() const { return total_; }
    std::size_t tensor_count() const { return infos_.size(); }
    const TensorInfo& info(int id) const { return infos_.at(static_cast<std::size_t>(id)); }
    int find(const std::string& name) const; // -1 when absent

    MatMap param(int id);
    ConstMatMap param(int id) const;

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    // view into an external gradient (or moment) buffer of length size()
    MatMap view(std::vector<double>& buffer, int id) const;
    ConstMatMap view(const std::vector<double>& buffer, int id) const;

    std::vector<double> make_buffer() const { return std::vector<double>(total_, 0.0); }

    // Xavier-uniform init of one tensor (fan_in = cols, fan_out = rows)
    void init_xavier(int id, Rng& rng);
    void init_zero(int id);

  private:
    void check_finalized() const;

    std::vector<TensorInfo> infos_;
    std::vector<double> values_;
    std::size_t total_ = 0;
    bool finalized_ = false;
};

} // namespace viewflow
