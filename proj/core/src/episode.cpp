// Copyright (c) 2026 The viewflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "viewflow/episode.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "viewflow/hashing.hpp"

namespace fs = std::filesystem;

namespace viewflow {

std::uint64_t fnv1a_file(const std::string& path, std::uint64_t h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("fnv1a_file: cannot open " + path);
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
        h = fnv1a_bytes(buf, static_cast<std::size_t>(is.gcount()), h);
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

int Episode::width() const {
    if (!context.empty()) return context.front().image.width;
    if (!target.empty()) return target.front().image.width;
    return 0;
}

int Episode::height() const {
    if (!context.empty()) return context.front().image.height;
    if (!target.empty()) return target.front().image.height;
    return 0;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp);
        os << content;
        if (!os) throw IoError("failed writing: " + tmp);
    }
    fs::rename(tmp, path);
}

void write_frames_bin(const std::string& path, const std::vector<Image>& frames) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp);
        const std::uint32_t width = frames.empty() ? 0 : static_cast<std::uint32_t>(frames[0].width);
        const std::uint32_t height = frames.empty() ? 0 : static_cast<std::uint32_t>(frames[0].height);
        const std::uint32_t channels = 3;
        const std::uint32_t count = static_cast<std::uint32_t>(frames.size());
        const std::uint32_t header[4] = {width, height, channels, count};
        os.write(reinterpret_cast<const char*>(header), sizeof(header));
        for (const auto& img : frames) {
            if (static_cast<std::uint32_t>(img.width) != width ||
                static_cast<std::uint32_t>(img.height) != height)
                throw ShapeError("write_frames_bin: frames must share dimensions");
            for (int c = 0; c < 3; ++c)
                for (int v = 0; v < img.height; ++v)
                    for (int u = 0; u < img.width; ++u) {
                        const float f =
                            static_cast<float>(img.ch[static_cast<std::size_t>(c)](v, u));
                        os.write(reinterpret_cast<const char*>(&f), sizeof(f));
                    }
        }
        if (!os) throw IoError("failed writing: " + tmp);
    }
    fs::rename(tmp, path);
}

std::vector<Image> read_frames_bin(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open frames file: " + path);
    std::uint32_t header[4];
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!is) throw IoError("frames file header truncated: " + path);
    const int width = static_cast<int>(header[0]);
    const int height = static_cast<int>(header[1]);
    const int channels = static_cast<int>(header[2]);
    const int count = static_cast<int>(header[3]);
    if (channels != 3) throw IoError("frames file must hold 3-channel data: " + path);

    std::vector<Image> frames;
    frames.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Image img(width, height);
        for (int c = 0; c < 3; ++c)
            for (int v = 0; v < height; ++v)
                for (int u = 0; u < width; ++u) {
                    float f;
                    is.read(reinterpret_cast<char*>(&f), sizeof(f));
                    img.ch[static_cast<std::size_t>(c)](v, u) = static_cast<double>(f);
                }
        frames.push_back(std::move(img));
    }
    if (!is) throw IoError("frames file truncated: " + path);
    return frames;
}

void save_episode(const std::string& dir, const Episode& ep) {
    fs::create_directories(fs::path(dir) / "frames");

    std::vector<CameraFrame> poses;
    std::vector<Image> ctx_images, tgt_images;
    for (const auto& f : ep.context) {
        poses.push_back(f.camera);
        ctx_images.push_back(f.image);
    }
    for (const auto& f : ep.target) {
        poses.push_back(f.camera);
        tgt_images.push_back(f.image);
    }
    std::string pose_text;
    for (const auto& p : poses) pose_text += format_pose_line(p) + "\n";
    atomic_write_text((fs::path(dir) / "poses.txt").string(), pose_text);

    write_frames_bin((fs::path(dir) / "frames" / "context.bin").string(), ctx_images);
    write_frames_bin((fs::path(dir) / "frames" / "target.bin").string(), tgt_images);

    std::ostringstream meta;
    meta << "task: " << ep.task_tag << "\n";
    meta << "seed: " << ep.seed << "\n";
    meta << "scene_hash: " << hex64(ep.scene_hash) << "\n";
    meta << "fps: " << ep.fps << "\n";
    meta << "width: " << ep.width() << "\n";
    meta << "height: " << ep.height() << "\n";
    meta << "context_views: " << ep.context_views << "\n";
    meta << "context_frames_per_view: " << ep.context_frames_per_view << "\n";
    meta << "target_views: " << ep.target_views << "\n";
    meta << "target_frames_per_view: " << ep.target_frames_per_view << "\n";
    atomic_write_text((fs::path(dir) / "meta").string(), meta.str());
}

namespace {

std::map<std::string, std::string> read_meta(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open meta file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto pos = line.find(": ");
        if (pos == std::string::npos) continue;
        kv[line.substr(0, pos)] = line.substr(pos + 2);
    }
    return kv;
}

void assign_views(std::vector<EpisodeFrame>& frames, int views, int frames_per_view, double fps) {
    if (views * frames_per_view != static_cast<int>(frames.size()))
        throw IoError("episode meta shape does not match frame count");
    for (int v = 0; v < views; ++v)
        for (int f = 0; f < frames_per_view; ++f) {
            auto& fr = frames[static_cast<std::size_t>(v * frames_per_view + f)];
            fr.view = v;
            fr.time_index = static_cast<int>(std::lround(fr.camera.timestamp * fps));
        }
}

} // namespace

Episode load_episode(const std::string& dir) {
    const auto kv = read_meta((fs::path(dir) / "meta").string());
    Episode ep;
    ep.task_tag = kv.at("task");
    ep.seed = std::stoull(kv.at("seed"));
    ep.scene_hash = std::stoull(kv.at("scene_hash"), nullptr, 16);
    ep.fps = std::stod(kv.at("fps"));
    ep.context_views = std::stoi(kv.at("context_views"));
    ep.context_frames_per_view = std::stoi(kv.at("context_frames_per_view"));
    ep.target_views = std::stoi(kv.at("target_views"));
    ep.target_frames_per_view = std::stoi(kv.at("target_frames_per_view"));
    const int width = std::stoi(kv.at("width"));
    const int height = std::stoi(kv.at("height"));

    const auto poses = read_pose_file((fs::path(dir) / "poses.txt").string(), width, height);
    auto ctx_images = read_frames_bin((fs::path(dir) / "frames" / "context.bin").string());
    auto tgt_images = read_frames_bin((fs::path(dir) / "frames" / "target.bin").string());
    if (poses.size() != ctx_images.size() + tgt_images.size())
        throw IoError("episode pose/frame count mismatch in " + dir);

    for (std::size_t i = 0; i < ctx_images.size(); ++i)
        ep.context.push_back({std::move(ctx_images[i]), poses[i], 0, 0});
    for (std::size_t i = 0; i < tgt_images.size(); ++i)
        ep.target.push_back({std::move(tgt_images[i]), poses[ctx_images.size() + i], 0, 0});
    assign_views(ep.context, ep.context_views, ep.context_frames_per_view, ep.fps);
    assign_views(ep.target, ep.target_views, ep.target_frames_per_view, ep.fps);
    return ep;
}

std::uint64_t episode_dir_hash(const std::string& dir) {
    std::uint64_t h = kFnvBasis;
    h = fnv1a_file((fs::path(dir) / "poses.txt").string(), h);
    h = fnv1a_file((fs::path(dir) / "frames" / "context.bin").string(), h);
    h = fnv1a_file((fs::path(dir) / "frames" / "target.bin").string(), h);
    h = fnv1a_file((fs::path(dir) / "meta").string(), h);
    return h;
}

} // namespace viewflow
