// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "viewflow/camera.hpp"
#include "viewflow/image.hpp"

namespace viewflow {

struct EpisodeFrame {
    Image image;
    CameraFrame camera;
    int view = 0;
    int time_index = 0;
};

// One training/evaluation sample: posed context frames conditioning posed
// target frames, with the task's timestamp rule already applied.
struct Episode {
    std::string task_tag;
    std::uint64_t seed = 0;
    std::uint64_t scene_hash = 0;
    double fps = 4.0;
    int context_views = 0, context_frames_per_view = 0;
    int target_views = 0, target_frames_per_view = 0;
    std::vector<EpisodeFrame> context; // view-major order
    std::vector<EpisodeFrame> target;

    int width() const;
    int height() const;
};

// Episode archive layout:
//   dir/poses.txt           context then target frames, pose file format
//   dir/frames/context.bin  raw frames, header u32 width,height,channels,count
//   dir/frames/target.bin   then count*channels*height*width float32 values
//   dir/meta                key: value text (task, seed, scene hash, shapes)
// Frame data is frame-major, channel-major, row-major, little-endian.
void save_episode(const std::string& dir, const Episode& episode);
Episode load_episode(const std::string& dir);

// FNV-1a over the archive's file bytes (poses.txt, frames, meta)
std::uint64_t episode_dir_hash(const std::string& dir);

// raw frame container io (exposed for tests)
void write_frames_bin(const std::string& path, const std::vector<Image>& frames);
std::vector<Image> read_frames_bin(const std::string& path);

// atomic file write helper: temp + rename
void atomic_write_text(const std::string& path, const std::string& content);

} // namespace viewflow
