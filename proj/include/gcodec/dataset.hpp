// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "gcodec/common.hpp"
#include "gcodec/tensor.hpp"
#include "gcodec/training.hpp"

namespace gcodec {

// Deterministic patch extraction: every image in src_dir is tiled at each
// scale (bicubic-downsampled for scales > 1); patches are written as PPM
// plus a manifest.jsonl recording provenance. Returns the patch count.
// Undecodable files are skipped with a warning; an empty result is an error.
size_t ingest_dataset(const std::string& src_dir, const std::string& out_dir, int patch,
                      const std::vector<int>& scales);

// Patch store produced by ingest_dataset (reads manifest.jsonl).
class DirectoryPatches : public PatchSource {
public:
    explicit DirectoryPatches(const std::string& dir);
    size_t size() const override { return files_.size(); }
    Tensor patch(size_t index) const override;

private:
    std::string dir_;
    std::vector<std::string> files_;
};

// Structured synthetic content (smooth gradients, soft discs, sinusoids);
// deterministic in seed. Used by tests and the toy training sets.
Tensor synthetic_image(uint64_t seed, int h, int w, int channels = 3);
std::vector<Tensor> synthetic_dataset(uint64_t seed, size_t count, int h, int w,
                                      int channels = 3);

}  // namespace gcodec
