// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/tasking.hpp"

#include <algorithm>

namespace viewflow {

const TaskType kAllTaskTypes[kTaskTypeCount] = {
    TaskType::kMonoImageNvs, TaskType::kMultiViewImageNvs, TaskType::kMonoVideoNvs,
    TaskType::kT2VCamCtrl,   TaskType::kI2VCamCtrl,        TaskType::kV2VCamCtrl};

const char* to_string(TaskType t) {
    switch (t) {
        case TaskType::kMonoImageNvs: return "mono_image_nvs";
        case TaskType::kMultiViewImageNvs: return "multi_view_image_nvs";
        case TaskType::kMonoVideoNvs: return "mono_video_nvs";
        case TaskType::kT2VCamCtrl: return "t2v_cam_ctrl";
        case TaskType::kI2VCamCtrl: return "i2v_cam_ctrl";
        case TaskType::kV2VCamCtrl: return "v2v_cam_ctrl";
    }
    return "unknown";
}

TaskType task_type_from_string(const std::string& name) {
    for (TaskType t : kAllTaskTypes)
        if (name == to_string(t)) return t;
    throw InvalidParams("unknown task type: " + name);
}

const std::vector<TaskShape>& context_menu(TaskType t) {
    static const std::vector<TaskShape> mono_image = {{1, 1}};
    static const std::vector<TaskShape> multi_image = {{2, 1}, {3, 1}};
    static const std::vector<TaskShape> mono_video = {{1, 3}};
    static const std::vector<TaskShape> t2v = {{0, 0}};
    static const std::vector<TaskShape> i2v = {{1, 1}};
    static const std::vector<TaskShape> v2v = {{1, 3}};
    switch (t) {
        case TaskType::kMonoImageNvs: return mono_image;
        case TaskType::kMultiViewImageNvs: return multi_image;
        case TaskType::kMonoVideoNvs: return mono_video;
        case TaskType::kT2VCamCtrl: return t2v;
        case TaskType::kI2VCamCtrl: return i2v;
        case TaskType::kV2VCamCtrl: return v2v;
    }
    return mono_image;
}

const std::vector<TaskShape>& target_menu(TaskType t) {
    static const std::vector<TaskShape> image = {{1, 1}};
    static const std::vector<TaskShape> video3 = {{1, 3}};
    static const std::vector<TaskShape> cam_ctrl = {{1, 3}, {1, 5}, {1, 10}};
    switch (t) {
        case TaskType::kMonoImageNvs:
        case TaskType::kMultiViewImageNvs: return image;
        case TaskType::kMonoVideoNvs: return video3;
        case TaskType::kT2VCamCtrl:
        case TaskType::kI2VCamCtrl:
        case TaskType::kV2VCamCtrl: return cam_ctrl;
    }
    return image;
}

bool in_task_menu(const TaskSpec& spec) {
    const auto& ctx = context_menu(spec.task);
    const auto& tgt = target_menu(spec.task);
    return std::find(ctx.begin(), ctx.end(), spec.context) != ctx.end() &&
           std::find(tgt.begin(), tgt.end(), spec.target) != tgt.end();
}

TaskMixture TaskMixture::defaults() {
    TaskMixture m;
    // five trained families: {mono+multi image NVS}, mono video NVS, T2V, I2V, V2V
    const double family = 1.0 / 5.0;
    m.weights[static_cast<int>(TaskType::kMonoImageNvs)] = family / 3.0;
    m.weights[static_cast<int>(TaskType::kMultiViewImageNvs)] = family * 2.0 / 3.0;
    m.weights[static_cast<int>(TaskType::kMonoVideoNvs)] = family;
    m.weights[static_cast<int>(TaskType::kT2VCamCtrl)] = family;
    m.weights[static_cast<int>(TaskType::kI2VCamCtrl)] = family;
    m.weights[static_cast<int>(TaskType::kV2VCamCtrl)] = family;
    // deltas: matched timestamps for V2V, one context frame span for I2V
    m.delta = {0, 0, 0, 0, 1, 0};
    return m;
}

TaskSpec sample_task(Rng& rng, const TaskMixture& mixture) {
    const std::vector<double> w(mixture.weights.begin(), mixture.weights.end());
    const auto idx = rng.categorical(w);
    TaskSpec spec;
    spec.task = kAllTaskTypes[idx];
    const auto& ctx = context_menu(spec.task);
    const auto& tgt = target_menu(spec.task);
    spec.context = ctx[rng.uniform_index(ctx.size())];
    spec.target = tgt[rng.uniform_index(tgt.size())];
    spec.delta = spec.is_cam_ctrl() ? mixture.delta[static_cast<std::size_t>(idx)] : 0;
    return spec;
}

TaskTimestamps assign_timestamps(const TaskSpec& spec, Rng& rng, double fps,
                                 int timeline_frames) {
    if (!(fps > 0.0)) throw InvalidParams("assign_timestamps: fps must be positive");
    const int f_ctx = spec.context.frames;
    const int f_tgt = spec.target.frames;
    if (timeline_frames < std::max(f_ctx, f_tgt))
        throw InvalidParams("assign_timestamps: timeline too short for the task");

    TaskTimestamps ts;
    // context window start (T2V has no context; anchor the target draw instead)
    const int c_max = timeline_frames - std::max(f_ctx, 1);
    const int c0 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(c_max + 1)));
    for (int i = 0; i < f_ctx; ++i) ts.context_index.push_back(c0 + i);

    int t0 = c0;
    if (spec.is_cam_ctrl()) {
        if (spec.task == TaskType::kT2VCamCtrl) {
            t0 = static_cast<int>(
                rng.uniform_index(static_cast<std::uint64_t>(timeline_frames - f_tgt + 1)));
        } else {
            const int lo = std::max(-spec.delta, -c0);
            const int hi = std::min(spec.delta, timeline_frames - f_tgt - c0);
            if (hi < lo) throw InvalidParams("assign_timestamps: no valid target offset");
            t0 = c0 + rng.uniform_int(lo, hi);
        }
        for (int i = 0; i < f_tgt; ++i) ts.target_index.push_back(t0 + i);
    } else {
        // NVS: identical timestamps for context and target
        ts.target_index = ts.context_index;
    }

    for (int idx : ts.context_index) ts.context.push_back(idx / fps);
    for (int idx : ts.target_index) ts.target.push_back(idx / fps);
    return ts;
}

} // namespace viewflow
