// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "semscene/common/error.hpp"
#include "semscene/common/grid.hpp"

namespace semscene {

using Label = std::int32_t;

/// H x W categorical label image. The hole sentinel is `num_classes()`, the
/// first out-of-range label.
class SemanticMask {
public:
    SemanticMask() = default;
    SemanticMask(int height, int width, int num_classes, Label fill = 0);

    int height() const { return labels_.height(); }
    int width() const { return labels_.width(); }
    int num_classes() const { return num_classes_; }
    Label hole() const { return num_classes_; }

    Label& operator()(int y, int x) { return labels_(y, x); }
    Label operator()(int y, int x) const { return labels_(y, x); }
    Label& operator[](std::size_t i) { return labels_[i]; }
    Label operator[](std::size_t i) const { return labels_[i]; }
    std::size_t pixels() const { return labels_.pixels(); }

    bool is_hole(int y, int x) const { return labels_(y, x) == num_classes_; }
    bool has_holes() const;
    std::size_t hole_count() const;
    /// Throws kValidation when a label falls outside [0, M_s] (M_s == hole).
    void validate() const;

    const Grid<Label>& grid() const { return labels_; }

    friend bool operator==(const SemanticMask& a, const SemanticMask& b) {
        return a.num_classes_ == b.num_classes_ && a.labels_ == b.labels_;
    }

private:
    Grid<Label> labels_;
    int num_classes_ = 0;
};

/// z-depth in the camera frame, scene units. Invalid pixels carry value 0.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int height, int width);

    int height() const { return values_.height(); }
    int width() const { return values_.width(); }
    std::size_t pixels() const { return values_.pixels(); }

    float value(int y, int x) const { return values_(y, x); }
    bool valid(int y, int x) const { return valid_(y, x) != 0; }
    float value(std::size_t i) const { return values_[i]; }
    bool valid(std::size_t i) const { return valid_[i] != 0; }

    /// Sets a valid sample; `v` must be finite and positive.
    void set(int y, int x, float v);
    void invalidate(int y, int x);

    bool fully_valid() const;
    std::size_t valid_count() const;
    void validate() const;

    const Grid<float>& values() const { return values_; }
    const Grid<std::uint8_t>& validity() const { return valid_; }

    friend bool operator==(const DepthMap& a, const DepthMap& b) {
        return a.values_ == b.values_ && a.valid_ == b.valid_;
    }

private:
    Grid<float> values_;
    Grid<std::uint8_t> valid_;
};

/// H x W x 3 RGB in [0, 1].
class ColorImage {
public:
    ColorImage() = default;
    ColorImage(int height, int width, float fill = 0.0f) : rgb_(height, width, 3, fill) {}

    int height() const { return rgb_.height(); }
    int width() const { return rgb_.width(); }
    std::size_t pixels() const { return rgb_.pixels(); }

    float& operator()(int y, int x, int c) { return rgb_(y, x, c); }
    float operator()(int y, int x, int c) const { return rgb_(y, x, c); }
    float* data() { return rgb_.data(); }
    const float* data() const { return rgb_.data(); }
    std::size_t size() const { return rgb_.size(); }

    void validate() const;

    friend bool operator==(const ColorImage& a, const ColorImage& b) { return a.rgb_ == b.rgb_; }

private:
    Grid<float> rgb_;
};

}  // namespace semscene
