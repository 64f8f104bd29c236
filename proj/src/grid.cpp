#include "lapfield/grid.hpp"

#include <cmath>
#include <string>

namespace lapfield {

double max_abs_diff(const Plane& a, const Plane& b) {
    if (!a.same_shape(b)) throw InvalidArgument("max_abs_diff: shape mismatch");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) m = std::max(m, std::abs(av[i] - bv[i]));
    return m;
}

double l2_norm(const Plane& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

bool all_finite(const Plane& a) {
    for (double v : a.values())
        if (!std::isfinite(v)) return false;
    return true;
}

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
    if (!a.same_geometry(b)) throw InvalidArgument("mean_squared_error: geometry mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (int c = 0; c < a.channels(); ++c) {
        auto av = a.channel(c).values();
        auto bv = b.channel(c).values();
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double d = av[i] - bv[i];
            s += d * d;
        }
        n += av.size();
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
}

void require_min_dims(int rows, int cols, const char* what) {
    if (rows < 3 || cols < 3)
        throw InvalidArgument(std::string(what) + ": grid must be at least 3x3, got " + std::to_string(rows) + "x" +
                              std::to_string(cols));
}

}  // namespace lapfield
