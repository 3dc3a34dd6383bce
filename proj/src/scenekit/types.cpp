// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#include "semscene/scenekit/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace semscene {

SemanticMask::SemanticMask(int height, int width, int num_classes, Label fill)
    : labels_(height, width, 1, fill), num_classes_(num_classes) {
    require(height > 0 && width > 0, "mask dimensions must be positive");
    require(num_classes > 0, "num_classes must be positive");
}

bool SemanticMask::has_holes() const { return hole_count() > 0; }

std::size_t SemanticMask::hole_count() const {
    return static_cast<std::size_t>(
        std::count(labels_.values().begin(), labels_.values().end(), num_classes_));
}

void SemanticMask::validate() const {
    for (Label l : labels_.values()) {
        if (l < 0 || l > num_classes_) {
            fail(ErrorKind::kValidation, "label " + std::to_string(l) + " outside [0, " +
                                             std::to_string(num_classes_) + "]");
        }
    }
}

DepthMap::DepthMap(int height, int width) : values_(height, width, 1, 0.0f), valid_(height, width, 1, 0) {
    require(height > 0 && width > 0, "depth dimensions must be positive");
}

void DepthMap::set(int y, int x, float v) {
    if (!(std::isfinite(v) && v > 0.0f)) fail(ErrorKind::kValidation, "depth must be finite and positive");
    values_(y, x) = v;
    valid_(y, x) = 1;
}

void DepthMap::invalidate(int y, int x) {
    values_(y, x) = 0.0f;
    valid_(y, x) = 0;
}

bool DepthMap::fully_valid() const { return valid_count() == pixels(); }

std::size_t DepthMap::valid_count() const {
    return static_cast<std::size_t>(std::count(valid_.values().begin(), valid_.values().end(), 1));
}

void DepthMap::validate() const {
    for (std::size_t i = 0; i < pixels(); ++i) {
        if (valid_[i] && !(std::isfinite(values_[i]) && values_[i] > 0.0f)) {
            fail(ErrorKind::kValidation, "valid depth entries must be finite and positive");
        }
    }
}

void ColorImage::validate() const {
    for (float v : rgb_.values()) {
        if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorKind::kValidation, "color channel outside [0, 1]");
    }
}

}  // namespace semscene
