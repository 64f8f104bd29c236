#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lapfield {

/// Thrown for bad dimensions, shape mismatches and other caller errors.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure produces non-finite values or fails
/// where success was required.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Single-channel row-major grid of doubles.
class Plane {
public:
    Plane() = default;
    Plane(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(checked_size(rows, cols), fill) {}

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return v_.size(); }
    bool empty() const noexcept { return v_.empty(); }

    double& operator()(int r, int c) noexcept { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const noexcept { return v_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* row(int r) noexcept { return v_.data() + static_cast<std::size_t>(r) * cols_; }
    const double* row(int r) const noexcept { return v_.data() + static_cast<std::size_t>(r) * cols_; }

    std::span<double> values() noexcept { return v_; }
    std::span<const double> values() const noexcept { return v_; }

    bool same_shape(const Plane& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    static std::size_t checked_size(int rows, int cols) {
        if (rows < 0 || cols < 0) throw InvalidArgument("negative plane dimensions");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

/// Channel-planar H x W x C grid. The tag separates intensity images from
/// Laplacian fields at the type level; both share the same storage layout.
template <class Tag>
class Channels {
public:
    Channels() = default;
    Channels(int height, int width, int channels, double fill = 0.0)
        : planes_(check_channels(channels), Plane(height, width, fill)) {}
    explicit Channels(std::vector<Plane> planes) : planes_(std::move(planes)) {
        for (const auto& p : planes_)
            if (!p.same_shape(planes_.front())) throw InvalidArgument("channel planes differ in shape");
    }

    int height() const noexcept { return planes_.empty() ? 0 : planes_.front().rows(); }
    int width() const noexcept { return planes_.empty() ? 0 : planes_.front().cols(); }
    int channels() const noexcept { return static_cast<int>(planes_.size()); }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height()) * static_cast<std::size_t>(width());
    }

    Plane& channel(int c) { return planes_.at(static_cast<std::size_t>(c)); }
    const Plane& channel(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
    std::vector<Plane>& planes() noexcept { return planes_; }
    const std::vector<Plane>& planes() const noexcept { return planes_; }

    double& operator()(int r, int col, int c) noexcept { return planes_[c](r, col); }
    double operator()(int r, int col, int c) const noexcept { return planes_[c](r, col); }

    template <class Other>
    bool same_geometry(const Channels<Other>& o) const noexcept {
        return height() == o.height() && width() == o.width() && channels() == o.channels();
    }

    friend bool operator==(const Channels&, const Channels&) = default;

private:
    static std::size_t check_channels(int c) {
        if (c < 1) throw InvalidArgument("channel count must be positive");
        return static_cast<std::size_t>(c);
    }

    std::vector<Plane> planes_;
};

struct IntensityTag {};
struct LaplacianTag {};

/// Intensities on the [0, 255] scale (not clamped while in memory).
using RasterImage = Channels<IntensityTag>;
/// Signed Laplacian values on the image grid.
using ScalarField = Channels<LaplacianTag>;

/// Reinterprets the planes of one grid kind as the other. Used where a
/// Laplacian-shaped quantity is fed back through the same operator.
template <class To, class From>
Channels<To> retag(Channels<From> src) {
    return Channels<To>(std::move(src.planes()));
}

// Basic element-wise helpers, used widely by solvers and tests.
double max_abs_diff(const Plane& a, const Plane& b);
double l2_norm(const Plane& a);
bool all_finite(const Plane& a);

template <class Tag>
double max_abs_diff(const Channels<Tag>& a, const Channels<Tag>& b) {
    if (!a.same_geometry(b)) throw InvalidArgument("max_abs_diff: geometry mismatch");
    double m = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const double d = max_abs_diff(a.channel(c), b.channel(c));
        if (d > m) m = d;
    }
    return m;
}

template <class Tag>
bool all_finite(const Channels<Tag>& a) {
    for (const auto& p : a.planes())
        if (!all_finite(p)) return false;
    return true;
}

/// Mean squared error over all samples (no 1/2 factor).
double mean_squared_error(const RasterImage& a, const RasterImage& b);

/// Rejects grids smaller than 3x3 (no interior pixel).
void require_min_dims(int rows, int cols, const char* what);

}  // namespace lapfield
