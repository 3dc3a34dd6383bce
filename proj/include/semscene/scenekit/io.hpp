// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "semscene/scenekit/types.hpp"

namespace semscene {

// Masks: binary PGM (P5), maxval 65535, big-endian samples. The number of
// classes is not stored in the file, so load_mask takes it and validates.
void save_mask(const std::filesystem::path& path, const SemanticMask& mask);
SemanticMask load_mask(const std::filesystem::path& path, int num_classes);

// Depth: 16-byte header (magic "SDPT", uint32 H, uint32 W, uint32 reserved=0),
// little-endian, followed by H*W float32 values. Invalid pixels are stored as
// 0, which is never a valid depth.
void save_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap load_depth(const std::filesystem::path& path);

// Images: binary PPM (P6), 8 bits per channel.
void save_image(const std::filesystem::path& path, const ColorImage& image);
ColorImage load_image(const std::filesystem::path& path);

}  // namespace semscene
