// Copyright Contributors to the semscene Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace semscene {

/// Dense row-major H x W x C array. The image containers of every module are
/// thin wrappers around this.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int height, int width, int channels = 1, T fill = T{})
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int y, int x, int c = 0) const {
        assert(y >= 0 && y < height_ && x >= 0 && x < width_ && c >= 0 && c < channels_);
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    const T& operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const Grid& o) const {
        return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<T> data_;
};

}  // namespace semscene
