#include "lapfield/laplacian.hpp"

#include <algorithm>
#include <cmath>

#include "lapfield/parallel.hpp"

namespace lapfield {

void apply_laplacian(const Plane& u, const Stencil3x3& st, Plane& out) {
    const int rows = u.rows();
    const int cols = u.cols();
    if (!out.same_shape(u)) out = Plane(rows, cols);

    if (st.is_five_point()) {
        const double cc = st.center(), n = st.at(-1, 0), s = st.at(1, 0), w = st.at(0, -1), e = st.at(0, 1);
        for (int r = 0; r < rows; ++r) {
            const double* up = r > 0 ? u.row(r - 1) : nullptr;
            const double* mid = u.row(r);
            const double* dn = r + 1 < rows ? u.row(r + 1) : nullptr;
            double* o = out.row(r);
            for (int c = 0; c < cols; ++c) {
                double acc = 0.0;
                if (up) acc += n * up[c];
                if (c > 0) acc += w * mid[c - 1];
                acc += cc * mid[c];
                if (c + 1 < cols) acc += e * mid[c + 1];
                if (dn) acc += s * dn[c];
                o[c] = acc;
            }
        }
        return;
    }

    for (int r = 0; r < rows; ++r) {
        double* o = out.row(r);
        for (int c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
                const int rr = r + dr;
                if (rr < 0 || rr >= rows) continue;
                const double* src = u.row(rr);
                for (int dc = -1; dc <= 1; ++dc) {
                    const int cc = c + dc;
                    if (cc < 0 || cc >= cols) continue;
                    acc += st.at(dr, dc) * src[cc];
                }
            }
            o[c] = acc;
        }
    }
}

Plane apply_laplacian(const Plane& u, const Stencil3x3& st) {
    Plane out(u.rows(), u.cols());
    apply_laplacian(u, st, out);
    return out;
}

namespace {

template <class OutTag, class InTag>
Channels<OutTag> per_channel_laplacian(const Channels<InTag>& in, const Stencil3x3& st) {
    require_min_dims(in.height(), in.width(), "laplacian");
    Channels<OutTag> out(in.height(), in.width(), in.channels());
    parallel_for(in.channels(), [&](int c) { apply_laplacian(in.channel(c), st, out.channel(c)); });
    return out;
}

}  // namespace

ScalarField laplacian(const RasterImage& image, const Stencil3x3& st) {
    return per_channel_laplacian<LaplacianTag>(image, st);
}

ScalarField apply_laplacian_matrix_free(const ScalarField& u, const Stencil3x3& st) {
    return per_channel_laplacian<LaplacianTag>(u, st);
}

double relative_residual(const Plane& rhs, const Plane& u, const Stencil3x3& st) {
    Plane au = apply_laplacian(u, st);
    double num = 0.0, den = 0.0;
    auto a = au.values();
    auto b = rhs.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = b[i] - a[i];
        num += d * d;
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace lapfield
