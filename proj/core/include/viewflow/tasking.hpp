// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "viewflow/errors.hpp"
#include "viewflow/rng.hpp"

namespace viewflow {

enum class TaskType : int {
    kMonoImageNvs = 0,
    kMultiViewImageNvs = 1,
    kMonoVideoNvs = 2,
    kT2VCamCtrl = 3,
    kI2VCamCtrl = 4,
    kV2VCamCtrl = 5,
};

inline constexpr int kTaskTypeCount = 6;
extern const TaskType kAllTaskTypes[kTaskTypeCount];

const char* to_string(TaskType t);
TaskType task_type_from_string(const std::string& name);

struct TaskShape {
    int views = 0;
    int frames = 0;
    bool operator==(const TaskShape&) const = default;
};

// One multitask configuration row: task type, context and target shapes in
// (views x frames), and the maximum temporal offset for camera-control tasks.
struct TaskSpec {
    TaskType task = TaskType::kMonoImageNvs;
    TaskShape context;
    TaskShape target;
    int delta = 0; // camera-control tasks only

    bool is_cam_ctrl() const {
        return task == TaskType::kT2VCamCtrl || task == TaskType::kI2VCamCtrl ||
               task == TaskType::kV2VCamCtrl;
    }
};

// shape menus per task; the multi-view video shape (e.g. 3x3 -> 1x3) is
// deliberately absent: it is a generalization test, never a training task
const std::vector<TaskShape>& context_menu(TaskType t);
const std::vector<TaskShape>& target_menu(TaskType t);

// true when (context, target) is a row of the training menu for the task
bool in_task_menu(const TaskSpec& spec);

struct TaskMixture {
    // per-task sampling weights; defaults are uniform over the five trained
    // task families, with the image-NVS family's weight split across its
    // context-shape menu (mono 1 of 3 shapes, multi-view 2 of 3)
    std::array<double, kTaskTypeCount> weights;
    // per-task max temporal offset; used by camera-control tasks
    std::array<int, kTaskTypeCount> delta;

    static TaskMixture defaults();
};

// categorical draw over task types, then uniform draws over the task's
// context and target shape menus
TaskSpec sample_task(Rng& rng, const TaskMixture& mixture);

struct TaskTimestamps {
    std::vector<int> context_index; // shared by all context views
    std::vector<int> target_index;
    std::vector<double> context; // seconds, index / fps
    std::vector<double> target;
};

// NVS tasks copy the context timestamps onto the targets; camera-control
// tasks pick the first target index within +-delta of the first context
// index (both signs reachable). Indices stay inside [0, timeline_frames).
TaskTimestamps assign_timestamps(const TaskSpec& spec, Rng& rng, double fps,
                                 int timeline_frames);

} // namespace viewflow
