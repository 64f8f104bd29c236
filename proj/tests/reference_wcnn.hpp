#pragma once

// Straight-line evaluation of the wavelet network recurrence, written pixel by
// pixel without the library's convolution or resampling code. Taps are summed
// in row-major kernel order so results are comparable bit for bit.

#include <cstdint>
#include <vector>

namespace lapfield::reference {

struct Grid {
    int rows = 0, cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
};

inline Grid conv(const Grid& in, const Grid& w) {
    Grid out(in.rows, in.cols);
    const int rad = w.rows / 2;
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c) {
            double s = 0.0;
            for (int i = 0; i < w.rows; ++i)
                for (int j = 0; j < w.cols; ++j) {
                    const int rr = r + i - rad, cc = c + j - rad;
                    if (rr < 0 || rr >= in.rows || cc < 0 || cc >= in.cols) continue;
                    s += w.at(i, j) * in.at(rr, cc);
                }
            out.at(r, c) = s;
        }
    return out;
}

inline Grid take_even(const Grid& in) {
    Grid out((in.rows + 1) / 2, (in.cols + 1) / 2);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out.at(r, c) = in.at(2 * r, 2 * c);
    return out;
}

inline Grid spread(const Grid& in, int rows, int cols) {
    Grid out(rows, cols);
    for (int r = 0; r < in.rows; ++r)
        for (int c = 0; c < in.cols; ++c) out.at(2 * r, 2 * c) = in.at(r, c);
    return out;
}

inline std::vector<Grid> pyramid(const Grid& l, const Grid& h, int levels) {
    std::vector<Grid> out{l};
    for (int i = 1; i < levels; ++i) out.push_back(take_even(conv(out.back(), h)));
    return out;
}

/// With `fine_detail` false the G branch is applied at the coarsest level only.
inline Grid forward(const Grid& l, const Grid& h, const Grid& g, const Grid& k, int levels, bool fine_detail = true) {
    const auto p = pyramid(l, h, levels);
    Grid u = conv(p.back(), g);
    for (int i = levels - 2; i >= 0; --i) {
        const Grid& li = p[static_cast<std::size_t>(i)];
        Grid next = conv(spread(u, li.rows, li.cols), k);
        if (fine_detail) {
            const Grid d = conv(li, g);
            for (std::size_t j = 0; j < next.v.size(); ++j) next.v[j] = next.v[j] + d.v[j];
        }
        u = next;
    }
    return u;
}

inline double half_mse(const Grid& u, const Grid& gt) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.v.size(); ++i) s += (u.v[i] - gt.v[i]) * (u.v[i] - gt.v[i]);
    return s / (2.0 * static_cast<double>(u.v.size()));
}

/// Platform-independent generator for frozen inputs.
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    /// Uniform on [lo, hi) with 53-bit resolution.
    double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline Grid frozen_input(int rows, int cols, std::uint64_t seed) {
    SplitMix rng{seed};
    Grid g(rows, cols);
    for (double& x : g.v) x = rng.uniform(-64.0, 64.0);
    return g;
}

/// Published learned 5x5 kernels (three decimals).
inline Grid table3_h() {
    Grid g(5, 5);
    g.v = {0.020, 0.072, 0.106, 0.077, 0.019, 0.072, 0.245, 0.348, 0.249, 0.072, 0.107, 0.348, 0.495,
           0.350, 0.108, 0.077, 0.249, 0.350, 0.254, 0.076, 0.019, 0.072, 0.107, 0.077, 0.016};
    return g;
}

inline Grid table3_g() {
    Grid g(3, 3);
    g.v = {0.029, 0.087, 0.028, 0.087, 0.311, 0.087, 0.028, 0.087, 0.028};
    return g;
}

inline Grid table3_k() {
    Grid g(5, 5);
    g.v = {-0.023, 0.091, 0.188, 0.083, -0.020, 0.090, 0.262, 0.331, 0.252, 0.094, 0.187, 0.331, 0.340,
           0.327,  0.189, 0.082, 0.252, 0.328, 0.246, 0.087, -0.020, 0.094, 0.190, 0.088, -0.016};
    return g;
}

inline constexpr int kOracleSize = 64;
inline constexpr int kOracleLevels = 4;
inline constexpr std::uint64_t kOracleSeed = 20240611;

}  // namespace lapfield::reference
