#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "octseg/error.hpp"

namespace octseg {

// Dense row-major 2-D grid. Row 0 is the top of the scan (vitreous side).
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int rows, int cols, T fill = T{}) : rows_(rows), cols_(cols) {
        require(rows >= 0 && cols >= 0, ErrorCode::InvalidArgument, "negative grid size");
        data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
    }

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool in_bounds(int r, int c) const noexcept { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

    T& operator()(int r, int c) noexcept { return data_[index(r, c)]; }
    const T& operator()(int r, int c) const noexcept { return data_[index(r, c)]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int r, int c) const noexcept {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<T> data_;
};

using ImageF = Grid<double>;

// A single OCT B-scan with intensities in [0,1].
struct BScan {
    ImageF pixels;
    std::string source_id;

    BScan() = default;
    explicit BScan(ImageF px, std::string id = {}) : pixels(std::move(px)), source_id(std::move(id)) {}

    int rows() const noexcept { return pixels.rows(); }
    int cols() const noexcept { return pixels.cols(); }
    double operator()(int r, int c) const noexcept { return pixels(r, c); }
    double& operator()(int r, int c) noexcept { return pixels(r, c); }
};

// Per-pixel boolean mask; stored as bytes to keep element references addressable.
using BinaryImage = Grid<std::uint8_t>;

inline constexpr int kMinPipelineSide = 16;

// Every intensity finite and in [0,1].
inline void validate_intensities(const ImageF& img) {
    for (double v : img.values()) {
        require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::InvalidImage,
                "intensity outside [0,1] or not finite");
    }
}

// Full pipeline precondition: non-degenerate size plus valid intensities.
inline void validate_bscan(const BScan& img) {
    require(img.rows() >= kMinPipelineSide && img.cols() >= kMinPipelineSide, ErrorCode::InvalidImage,
            "B-scan must be at least 16x16, got " + std::to_string(img.rows()) + "x" +
                std::to_string(img.cols()));
    validate_intensities(img.pixels);
}

}  // namespace octseg
