// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/param_store.hpp"

#include <cmath>

namespace viewflow {

int ParamStore::add(const std::string& name, int rows, int cols) {
    if (finalized_) throw InvalidParams("ParamStore::add after finalize");
    if (rows <= 0 || cols <= 0) throw ShapeError("ParamStore::add: non-positive tensor shape");
    if (find(name) != -1) throw InvalidParams("ParamStore::add: duplicate tensor name " + name);
    TensorInfo info{name, rows, cols, total_};
    total_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    infos_.push_back(std::move(info));
    return static_cast<int>(infos_.size()) - 1;
}

void ParamStore::finalize() {
    if (finalized_) return;
    values_.assign(total_, 0.0);
    finalized_ = true;
}

void ParamStore::check_finalized() const {
    if (!finalized_) throw InvalidParams("ParamStore used before finalize");
}

int ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < infos_.size(); ++i)
        if (infos_[i].name == name) return static_cast<int>(i);
    return -1;
}

MatMap ParamStore::param(int id) {
    check_finalized();
    const TensorInfo& t = info(id);
    return MatMap(values_.data() + t.offset, t.rows, t.cols);
}

ConstMatMap ParamStore::param(int id) const {
    check_finalized();
    const TensorInfo& t = info(id);
    return ConstMatMap(values_.data() + t.offset, t.rows, t.cols);
}

MatMap ParamStore::view(std::vector<double>& buffer, int id) const {
    check_finalized();
    if (buffer.size() != total_) throw ShapeError("ParamStore::view: buffer length mismatch");
    const TensorInfo& t = info(id);
    return MatMap(buffer.data() + t.offset, t.rows, t.cols);
}

ConstMatMap ParamStore::view(const std::vector<double>& buffer, int id) const {
    check_finalized();
    if (buffer.size() != total_) throw ShapeError("ParamStore::view: buffer length mismatch");
    const TensorInfo& t = info(id);
    return ConstMatMap(buffer.data() + t.offset, t.rows, t.cols);
}

void ParamStore::init_xavier(int id, Rng& rng) {
    MatMap m = param(id);
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
}

void ParamStore::init_zero(int id) { param(id).setZero(); }

} // namespace viewflow
