#include <array>
#include <chrono>
#include <cmath>
#include <memory>

#include "dense_cholesky.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/solvers.hpp"

// Geometric V-cycle. Coarse unknowns sit on the even fine indices, so a side
// of n points coarsens to ceil(n / 2); prolongation is bilinear in index space
// with the zero exterior as the missing neighbour, restriction is its
// transpose scaled by 1/4 (full weighting), and every coarse operator is the
// Galerkin product R A P. That keeps the hierarchy consistent for sides that
// are not of the form 2^k - 1.

namespace lapfield {

namespace {

using Coeffs = std::array<double, 9>;  // row-major 3x3, index (dr + 1) * 3 + (dc + 1)

struct Level {
    int rows = 0;
    int cols = 0;
    // Finest level uses the constant stencil; coarse levels store one 3x3
    // per unknown.
    std::vector<Coeffs> coef;
    Coeffs constant{};
    bool is_constant = false;

    Plane u, f, r;

    const Coeffs& at(std::size_t idx) const { return is_constant ? constant : coef[idx]; }
};

class Hierarchy {
public:
    Hierarchy(int rows, int cols, const Stencil3x3& st, const SolverConfig& cfg) : cfg_(cfg) {
        Level fine;
        fine.rows = rows;
        fine.cols = cols;
        fine.is_constant = true;
        fine.constant = st.c;
        allocate(fine);
        levels_.push_back(std::move(fine));

        const int max_levels = cfg.mg_levels > 0 ? cfg.mg_levels : 64;
        while (static_cast<int>(levels_.size()) < max_levels) {
            const Level& last = levels_.back();
            if (std::min(last.rows, last.cols) < 4) break;
            levels_.push_back(galerkin_coarsen(last));
        }
        factor_coarsest();
    }

    Level& finest() { return levels_.front(); }

    void vcycle(std::size_t l) {
        Level& lv = levels_[l];
        if (l + 1 == levels_.size()) {
            solve_coarsest(lv);
            return;
        }
        for (int s = 0; s < cfg_.mg_pre_smooth; ++s) smooth(lv);
        residual(lv);
        Level& coarse = levels_[l + 1];
        restrict_to(lv.r, coarse);
        std::fill(coarse.u.values().begin(), coarse.u.values().end(), 0.0);
        vcycle(l + 1);
        prolongate_add(coarse.u, lv);
        for (int s = 0; s < cfg_.mg_post_smooth; ++s) smooth(lv);
    }

private:
    static void allocate(Level& lv) {
        lv.u = Plane(lv.rows, lv.cols);
        lv.f = Plane(lv.rows, lv.cols);
        lv.r = Plane(lv.rows, lv.cols);
    }

    // Weight of coarse index I in the interpolant at fine index i.
    static double weight(int i, int I) {
        const int d = i - 2 * I;
        if (d == 0) return 1.0;
        if (d == 1 || d == -1) return 0.5;
        return 0.0;
    }

    static Level galerkin_coarsen(const Level& fine) {
        Level c;
        c.rows = (fine.rows + 1) / 2;
        c.cols = (fine.cols + 1) / 2;
        c.coef.assign(static_cast<std::size_t>(c.rows) * c.cols, Coeffs{});
        allocate(c);

        for (int I = 0; I < c.rows; ++I)
            for (int J = 0; J < c.cols; ++J) {
                Coeffs& out = c.coef[static_cast<std::size_t>(I) * c.cols + J];
                // x runs over the support of the coarse basis function (I, J).
                for (int xi = 2 * I - 1; xi <= 2 * I + 1; ++xi) {
                    if (xi < 0 || xi >= fine.rows) continue;
                    for (int xj = 2 * J - 1; xj <= 2 * J + 1; ++xj) {
                        if (xj < 0 || xj >= fine.cols) continue;
                        const double px = weight(xi, I) * weight(xj, J);
                        const Coeffs& a = fine.at(static_cast<std::size_t>(xi) * fine.cols + xj);
                        for (int dr = -1; dr <= 1; ++dr)
                            for (int dc = -1; dc <= 1; ++dc) {
                                const double axy = a[(dr + 1) * 3 + (dc + 1)];
                                if (axy == 0.0) continue;
                                const int yi = xi + dr, yj = xj + dc;
                                if (yi < 0 || yi >= fine.rows || yj < 0 || yj >= fine.cols) continue;
                                for (int K = (yi - 1) / 2; K <= (yi + 1) / 2; ++K) {
                                    if (K < 0 || K >= c.rows || K < I - 1 || K > I + 1) continue;
                                    const double wy = weight(yi, K);
                                    if (wy == 0.0) continue;
                                    for (int L = (yj - 1) / 2; L <= (yj + 1) / 2; ++L) {
                                        if (L < 0 || L >= c.cols || L < J - 1 || L > J + 1) continue;
                                        const double wx = weight(yj, L);
                                        if (wx == 0.0) continue;
                                        out[(K - I + 1) * 3 + (L - J + 1)] += 0.25 * px * axy * wy * wx;
                                    }
                                }
                            }
                    }
                }
            }
        return c;
    }

    static double offsum(const Level& lv, const Plane& u, int r, int c) {
        const Coeffs& a = lv.at(static_cast<std::size_t>(r) * lv.cols + c);
        double s = 0.0;
        if (r > 0 && r + 1 < lv.rows && c > 0 && c + 1 < lv.cols) {
            const double* up = u.row(r - 1);
            const double* mid = u.row(r);
            const double* dn = u.row(r + 1);
            s = a[0] * up[c - 1] + a[1] * up[c] + a[2] * up[c + 1] + a[3] * mid[c - 1] + a[5] * mid[c + 1] +
                a[6] * dn[c - 1] + a[7] * dn[c] + a[8] * dn[c + 1];
            return s;
        }
        for (int dr = -1; dr <= 1; ++dr) {
            const int rr = r + dr;
            if (rr < 0 || rr >= lv.rows) continue;
            for (int dc = -1; dc <= 1; ++dc) {
                const int cc = c + dc;
                if ((dr == 0 && dc == 0) || cc < 0 || cc >= lv.cols) continue;
                s += a[(dr + 1) * 3 + (dc + 1)] * u(rr, cc);
            }
        }
        return s;
    }

    static void smooth(Level& lv) {
        for (int r = 0; r < lv.rows; ++r) {
            const double* f = lv.f.row(r);
            double* u = lv.u.row(r);
            for (int c = 0; c < lv.cols; ++c) {
                const double center = lv.at(static_cast<std::size_t>(r) * lv.cols + c)[4];
                u[c] = (f[c] - offsum(lv, lv.u, r, c)) / center;
            }
        }
    }

    static void residual(Level& lv) {
        for (int r = 0; r < lv.rows; ++r) {
            const double* f = lv.f.row(r);
            const double* u = lv.u.row(r);
            double* out = lv.r.row(r);
            for (int c = 0; c < lv.cols; ++c) {
                const double center = lv.at(static_cast<std::size_t>(r) * lv.cols + c)[4];
                out[c] = f[c] - (center * u[c] + offsum(lv, lv.u, r, c));
            }
        }
    }

    static void restrict_to(const Plane& fine_r, Level& coarse) {
        static constexpr double w[3] = {0.5, 1.0, 0.5};
        for (int I = 0; I < coarse.rows; ++I) {
            double* out = coarse.f.row(I);
            for (int J = 0; J < coarse.cols; ++J) {
                double s = 0.0;
                for (int a = 0; a < 3; ++a) {
                    const int i = 2 * I - 1 + a;
                    if (i < 0 || i >= fine_r.rows()) continue;
                    const double* row = fine_r.row(i);
                    for (int b = 0; b < 3; ++b) {
                        const int j = 2 * J - 1 + b;
                        if (j < 0 || j >= fine_r.cols()) continue;
                        s += w[a] * w[b] * row[j];
                    }
                }
                out[J] = 0.25 * s;
            }
        }
    }

    static void prolongate_add(const Plane& e, Level& fine) {
        const int cr = e.rows(), cc = e.cols();
        for (int i = 0; i < fine.rows; ++i) {
            const int i0 = i / 2;
            const bool odd_i = i % 2 != 0;
            double* u = fine.u.row(i);
            for (int j = 0; j < fine.cols; ++j) {
                const int j0 = j / 2;
                const bool odd_j = j % 2 != 0;
                auto val = [&](int I, int J) { return (I < cr && J < cc) ? e(I, J) : 0.0; };
                double v;
                if (!odd_i && !odd_j) v = val(i0, j0);
                else if (odd_i && !odd_j) v = 0.5 * (val(i0, j0) + val(i0 + 1, j0));
                else if (!odd_i && odd_j) v = 0.5 * (val(i0, j0) + val(i0, j0 + 1));
                else v = 0.25 * (val(i0, j0) + val(i0 + 1, j0) + val(i0, j0 + 1) + val(i0 + 1, j0 + 1));
                u[j] += v;
            }
        }
    }

    void factor_coarsest() {
        const Level& c = levels_.back();
        const std::size_t n = static_cast<std::size_t>(c.rows) * c.cols;
        if (n > kCholeskyMaxUnknowns) return;
        std::vector<double> m(n * n, 0.0);
        for (int r = 0; r < c.rows; ++r)
            for (int col = 0; col < c.cols; ++col) {
                const std::size_t p = static_cast<std::size_t>(r) * c.cols + col;
                const Coeffs& a = c.at(p);
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = r + dr, cc = col + dc;
                        if (rr < 0 || rr >= c.rows || cc < 0 || cc >= c.cols) continue;
                        m[p * n + static_cast<std::size_t>(rr) * c.cols + cc] = -a[(dr + 1) * 3 + (dc + 1)];
                    }
            }
        coarse_solver_ = std::make_unique<detail::DenseCholesky>(std::move(m), n);
    }

    void solve_coarsest(Level& lv) {
        if (coarse_solver_) {
            std::vector<double> b(lv.f.values().begin(), lv.f.values().end());
            for (double& v : b) v = -v;
            coarse_solver_->solve_in_place(b);
            std::copy(b.begin(), b.end(), lv.u.values().begin());
            return;
        }
        // Extremely elongated grids only: the coarsest level is too large to
        // factor densely, so smooth it hard instead.
        for (int s = 0; s < 200; ++s) smooth(lv);
    }

    SolverConfig cfg_;
    std::vector<Level> levels_;
    std::unique_ptr<detail::DenseCholesky> coarse_solver_;
};

}  // namespace

PlaneSolution solve_multigrid(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg) {
    require_min_dims(rhs.rows(), rhs.cols(), "solve_multigrid");
    cfg.validate();
    if (st.center() == 0.0) throw InvalidArgument("solve_multigrid: stencil center is zero");
    const auto t0 = std::chrono::steady_clock::now();

    Hierarchy h(rhs.rows(), rhs.cols(), st, cfg);
    Level& fine = h.finest();
    fine.f = rhs;

    PlaneSolution out;
    out.report.solver = SolverId::multigrid;
    const double bnorm = std::max(l2_norm(rhs), 1e-12);
    double res = l2_norm(rhs) / bnorm;
    out.report.residual_history.push_back(res);
    int cycles = 0;
    while (res > cfg.tolerance && cycles < cfg.max_iterations) {
        h.vcycle(0);
        ++cycles;
        res = relative_residual(rhs, fine.u, st);
        if (!std::isfinite(res)) break;
        out.report.residual_history.push_back(res);
    }
    out.report.iterations = cycles;
    out.report.converged = res <= cfg.tolerance;
    out.u = std::move(fine.u);
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace lapfield
