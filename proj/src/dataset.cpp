// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gcodec/image.hpp"

namespace fs = std::filesystem;

namespace gcodec {

size_t ingest_dataset(const std::string& src_dir, const std::string& out_dir, int patch,
                      const std::vector<int>& scales) {
    if (!fs::is_directory(src_dir))
        throw std::invalid_argument("ingest_dataset: not a directory: " + src_dir);
    fs::create_directories(out_dir);

    std::vector<std::string> sources;
    for (const auto& e : fs::directory_iterator(src_dir))
        if (e.is_regular_file() && is_image_file(e.path().string()))
            sources.push_back(e.path().string());
    std::sort(sources.begin(), sources.end());

    std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl");
    if (!manifest) throw std::runtime_error("ingest_dataset: cannot write manifest");

    size_t count = 0;
    for (const auto& src : sources) {
        Tensor img;
        try {
            img = load_image(src);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "ingest: skipping %s (%s)\n", src.c_str(), e.what());
            continue;
        }
        for (int scale : scales) {
            Tensor scaled = scale == 1 ? img
                                       : resize_bicubic(img, img.h() / scale, img.w() / scale);
            if (scaled.h() < patch || scaled.w() < patch) continue;
            int index = 0;
            const int per_row = scaled.w() / patch;
            for (const auto& p : tile_patches(scaled, patch)) {
                char name[64];
                std::snprintf(name, sizeof(name), "patch_%06zu.ppm", count);
                save_image(p, (fs::path(out_dir) / name).string());
                const int py = index / per_row, px = index % per_row;
                manifest << "{\"patch\":\"" << name << "\",\"source\":\""
                         << fs::path(src).filename().string() << "\",\"scale\":" << scale
                         << ",\"x\":" << px * patch << ",\"y\":" << py * patch << "}\n";
                ++count;
                ++index;
            }
        }
    }
    if (count == 0) throw std::runtime_error("ingest_dataset: no patches produced");
    return count;
}

DirectoryPatches::DirectoryPatches(const std::string& dir) : dir_(dir) {
    std::ifstream manifest(fs::path(dir) / "manifest.jsonl");
    if (!manifest)
        throw std::runtime_error("DirectoryPatches: no manifest.jsonl in " + dir);
    std::string line;
    while (std::getline(manifest, line)) {
        const auto key = line.find("\"patch\":\"");
        if (key == std::string::npos) continue;
        const auto start = key + 9;
        const auto end = line.find('"', start);
        files_.push_back(line.substr(start, end - start));
    }
    if (files_.empty()) throw std::runtime_error("DirectoryPatches: empty manifest in " + dir);
}

Tensor DirectoryPatches::patch(size_t index) const {
    return load_image((fs::path(dir_) / files_.at(index)).string());
}

Tensor synthetic_image(uint64_t seed, int h, int w, int channels) {
    Rng rng(substream_seed(seed, 7, 0));
    Tensor img(1, channels, h, w);

    // smooth background gradient per channel
    std::vector<double> gx(channels), gy(channels), g0(channels);
    for (int c = 0; c < channels; ++c) {
        gx[c] = rng.uniform(-0.4, 0.4);
        gy[c] = rng.uniform(-0.4, 0.4);
        g0[c] = rng.uniform(0.2, 0.8);
    }
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(0, c, y, x) =
                    g0[c] + gx[c] * (static_cast<double>(x) / w - 0.5) +
                    gy[c] * (static_cast<double>(y) / h - 0.5);

    // a couple of low-frequency sinusoids shared across channels with
    // per-channel amplitude
    const int waves = 2;
    for (int k = 0; k < waves; ++k) {
        const double fx = rng.uniform(0.5, 3.0) * 2.0 * M_PI / w;
        const double fy = rng.uniform(0.5, 3.0) * 2.0 * M_PI / h;
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        std::vector<double> amp(channels);
        for (int c = 0; c < channels; ++c) amp[c] = rng.uniform(-0.15, 0.15);
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    img.at(0, c, y, x) += amp[c] * std::sin(fx * x + fy * y + phase);
    }

    // soft discs
    const int discs = 2 + static_cast<int>(rng.uniform_index(3));
    for (int k = 0; k < discs; ++k) {
        const double cx = rng.uniform(0.1, 0.9) * w;
        const double cy = rng.uniform(0.1, 0.9) * h;
        const double r = rng.uniform(0.08, 0.3) * std::min(h, w);
        std::vector<double> col(channels);
        for (int c = 0; c < channels; ++c) col[c] = rng.uniform(-0.5, 0.5);
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double d = std::hypot(x - cx, y - cy);
                    const double s = 1.0 / (1.0 + std::exp((d - r) * 8.0 / r));
                    img.at(0, c, y, x) += col[c] * s;
                }
    }

    for (size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i], 0.0, 1.0);
    return img;
}

std::vector<Tensor> synthetic_dataset(uint64_t seed, size_t count, int h, int w, int channels) {
    std::vector<Tensor> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i)
        out.push_back(synthetic_image(substream_seed(seed, 8, i), h, w, channels));
    return out;
}

}  // namespace gcodec
