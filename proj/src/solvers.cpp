#include "lapfield/solvers.hpp"

#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "dense_cholesky.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/parallel.hpp"

namespace lapfield {

std::string_view to_string(SolverId id) {
    switch (id) {
    case SolverId::cholesky: return "cholesky";
    case SolverId::jacobi: return "jacobi";
    case SolverId::gauss_seidel: return "gauss-seidel";
    case SolverId::sor: return "sor";
    case SolverId::dst: return "dst";
    case SolverId::multigrid: return "multigrid";
    case SolverId::wcnn: return "wcnn";
    }
    return "?";
}

std::optional<SolverId> parse_solver_id(std::string_view s) {
    for (auto id : {SolverId::cholesky, SolverId::jacobi, SolverId::gauss_seidel, SolverId::sor, SolverId::dst,
                    SolverId::multigrid, SolverId::wcnn})
        if (s == to_string(id)) return id;
    if (s == "gs" || s == "gauss_seidel") return SolverId::gauss_seidel;
    return std::nullopt;
}

void SolverConfig::validate() const {
    if (!(tolerance > 0.0)) throw InvalidArgument("solver tolerance must be positive");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
    if (sor_omega && !(*sor_omega > 0.0 && *sor_omega < 2.0)) throw InvalidArgument("SOR omega must lie in (0, 2)");
    if (mg_levels < 0) throw InvalidArgument("multigrid level count must be non-negative");
    if (mg_pre_smooth < 0 || mg_post_smooth < 0 || mg_pre_smooth + mg_post_smooth == 0)
        throw InvalidArgument("multigrid needs at least one smoothing sweep");
}

double default_sor_omega(int rows, int cols) {
    const int n = std::min(rows, cols);
    return 2.0 / (1.0 + std::sin(std::numbers::pi / (n + 1)));
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double norm_floor(const Plane& rhs) { return std::max(l2_norm(rhs), 1e-12); }

}  // namespace

Plane solve_cholesky_dense(const Plane& rhs, const Stencil3x3& st) {
    const int rows = rhs.rows(), cols = rhs.cols();
    require_min_dims(rows, cols, "solve_cholesky_dense");
    const std::size_t n = rhs.size();
    if (n > kCholeskyMaxUnknowns)
        throw InvalidArgument("solve_cholesky_dense: " + std::to_string(n) + " unknowns exceeds the cap of " +
                              std::to_string(kCholeskyMaxUnknowns));

    // Assemble -A; the Dirichlet exterior simply drops couplings.
    std::vector<double> m(n * n, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const std::size_t p = static_cast<std::size_t>(r) * cols + c;
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    const std::size_t q = static_cast<std::size_t>(rr) * cols + cc;
                    m[p * n + q] = -st.at(dr, dc);
                }
        }

    detail::DenseCholesky chol(std::move(m), n);
    std::vector<double> b(n);
    auto src = rhs.values();
    for (std::size_t i = 0; i < n; ++i) b[i] = -src[i];
    chol.solve_in_place(b);

    Plane u(rows, cols);
    std::copy(b.begin(), b.end(), u.values().begin());
    return u;
}

namespace {

// Sum of off-center stencil taps around (r, c), zero outside the grid.
inline double neighbor_sum(const Plane& u, const Stencil3x3& st, int r, int c) {
    const int rows = u.rows(), cols = u.cols();
    double s = 0.0;
    for (int dr = -1; dr <= 1; ++dr) {
        const int rr = r + dr;
        if (rr < 0 || rr >= rows) continue;
        const double* src = u.row(rr);
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int cc = c + dc;
            if (cc < 0 || cc >= cols) continue;
            const double w = st.at(dr, dc);
            if (w != 0.0) s += w * src[cc];
        }
    }
    return s;
}

void require_iterative_inputs(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg, const char* who) {
    require_min_dims(rhs.rows(), rhs.cols(), who);
    cfg.validate();
    if (st.center() == 0.0) throw InvalidArgument(std::string(who) + ": stencil center is zero");
}

// Lexicographic sweeps with relaxation omega; omega == 1 is plain Gauss-Seidel.
PlaneSolution relaxed_sweeps(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg, double omega,
                             SolverId id) {
    const auto t0 = Clock::now();
    const int rows = rhs.rows(), cols = rhs.cols();
    const double center = st.center();
    const double bnorm = norm_floor(rhs);

    PlaneSolution out{Plane(rows, cols), {}};
    out.report.solver = id;
    Plane au(rows, cols);
    auto residual = [&] {
        apply_laplacian(out.u, st, au);
        double s = 0.0;
        auto a = au.values();
        auto b = rhs.values();
        for (std::size_t i = 0; i < a.size(); ++i) s += (b[i] - a[i]) * (b[i] - a[i]);
        return std::sqrt(s) / bnorm;
    };

    double res = residual();
    out.report.residual_history.push_back(res);
    int it = 0;
    while (res > cfg.tolerance && it < cfg.max_iterations) {
        for (int r = 0; r < rows; ++r) {
            const double* f = rhs.row(r);
            double* u = out.u.row(r);
            for (int c = 0; c < cols; ++c) {
                const double gs = (f[c] - neighbor_sum(out.u, st, r, c)) / center;
                u[c] = omega == 1.0 ? gs : u[c] + omega * (gs - u[c]);
            }
        }
        ++it;
        res = residual();
        if (!std::isfinite(res)) break;
        out.report.residual_history.push_back(res);
    }
    out.report.iterations = it;
    out.report.converged = res <= cfg.tolerance;
    out.report.seconds = seconds_since(t0);
    return out;
}

}  // namespace

PlaneSolution solve_jacobi(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg) {
    require_iterative_inputs(rhs, st, cfg, "solve_jacobi");
    const auto t0 = Clock::now();
    const int rows = rhs.rows(), cols = rhs.cols();
    const double center = st.center();
    const double bnorm = norm_floor(rhs);

    PlaneSolution out{Plane(rows, cols), {}};
    out.report.solver = SolverId::jacobi;
    Plane au(rows, cols);
    int it = 0;
    for (;;) {
        // u <- u + (L - A u) / center is the Jacobi update written via the residual.
        apply_laplacian(out.u, st, au);
        double s = 0.0;
        auto a = au.values();
        auto b = rhs.values();
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = b[i] - a[i];
            a[i] = d;
            s += d * d;
        }
        const double res = std::sqrt(s) / bnorm;
        if (!std::isfinite(res)) break;
        out.report.residual_history.push_back(res);
        if (res <= cfg.tolerance) {
            out.report.converged = true;
            break;
        }
        if (it >= cfg.max_iterations) break;
        auto u = out.u.values();
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += a[i] / center;
        ++it;
    }
    out.report.iterations = it;
    out.report.seconds = seconds_since(t0);
    return out;
}

PlaneSolution solve_gauss_seidel(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg) {
    require_iterative_inputs(rhs, st, cfg, "solve_gauss_seidel");
    return relaxed_sweeps(rhs, st, cfg, 1.0, SolverId::gauss_seidel);
}

PlaneSolution solve_sor(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg) {
    require_iterative_inputs(rhs, st, cfg, "solve_sor");
    const double omega = cfg.sor_omega.value_or(default_sor_omega(rhs.rows(), rhs.cols()));
    return relaxed_sweeps(rhs, st, cfg, omega, SolverId::sor);
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// DST-I along every row of a rows x cols block, in place.
class RowDst {
public:
    RowDst(int rows, int cols, double* data) {
        const fftw_r2r_kind kind = FFTW_RODFT00;
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_many_r2r(1, &cols, rows, data, nullptr, 1, cols, data, nullptr, 1, cols, &kind, FFTW_ESTIMATE);
        if (!plan_) throw NumericalError("solve_dst: FFTW planning failed");
    }
    ~RowDst() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RowDst(const RowDst&) = delete;
    RowDst& operator=(const RowDst&) = delete;
    void operator()(double* data) const { fftw_execute_r2r(plan_, data, data); }

private:
    fftw_plan plan_;
};

}  // namespace

// Sine transform along rows diagonalizes the x part of the operator; each
// sine mode then leaves a tridiagonal system down the columns, solved for all
// modes at once by sweeping rows so memory access stays contiguous.
Plane solve_dst(const Plane& rhs, const Stencil3x3& st) {
    const int rows = rhs.rows(), cols = rhs.cols();
    require_min_dims(rows, cols, "solve_dst");
    if (st.id != StencilId::k0 || !st.is_five_point())
        throw InvalidArgument("solve_dst: the sine-transform diagonalization requires the 5-point stencil k0");

    Plane work = rhs;
    double* w = work.values().data();
    const RowDst along_x(rows, cols, w);
    along_x(w);

    // Mode q: x[p-1] + b[q] x[p] + x[p+1] = d[p], with b[q] = -(2 + 4 sin^2(pi (q+1) / (2 (cols+1)))).
    std::vector<double> b(static_cast<std::size_t>(cols));
    for (int q = 0; q < cols; ++q) {
        const double s = std::sin(std::numbers::pi * (q + 1) / (2.0 * (cols + 1)));
        b[static_cast<std::size_t>(q)] = -(2.0 + 4.0 * s * s);
    }
    Plane inv_pivot(rows, cols);
    {
        double* c = inv_pivot.row(0);
        double* d = work.row(0);
        for (int q = 0; q < cols; ++q) {
            c[q] = 1.0 / b[static_cast<std::size_t>(q)];
            d[q] *= c[q];
        }
    }
    for (int p = 1; p < rows; ++p) {
        const double* cp = inv_pivot.row(p - 1);
        const double* dp = work.row(p - 1);
        double* c = inv_pivot.row(p);
        double* d = work.row(p);
        for (int q = 0; q < cols; ++q) {
            c[q] = 1.0 / (b[static_cast<std::size_t>(q)] - cp[q]);
            d[q] = (d[q] - dp[q]) * c[q];
        }
    }
    for (int p = rows - 2; p >= 0; --p) {
        const double* c = inv_pivot.row(p);
        const double* x1 = work.row(p + 1);
        double* x = work.row(p);
        for (int q = 0; q < cols; ++q) x[q] -= c[q] * x1[q];
    }

    along_x(w);
    // Unnormalized DST-I applied twice scales by 2(n + 1).
    const double scale = 1.0 / (2.0 * (cols + 1));
    for (double& v : work.values()) v *= scale;
    return work;
}

FieldSolution solve_classical(const ScalarField& field, const Stencil3x3& st, const SolverConfig& cfg) {
    require_min_dims(field.height(), field.width(), "solve_classical");
    cfg.validate();
    if (cfg.solver == SolverId::wcnn) throw InvalidArgument("solve_classical: wcnn needs a kernel set");

    const auto t0 = Clock::now();
    const int nc = field.channels();
    std::vector<PlaneSolution> parts(static_cast<std::size_t>(nc));
    parallel_for(nc, [&](int c) {
        const Plane& rhs = field.channel(c);
        auto& slot = parts[static_cast<std::size_t>(c)];
        switch (cfg.solver) {
        case SolverId::cholesky:
        case SolverId::dst: {
            slot.u = cfg.solver == SolverId::dst ? solve_dst(rhs, st) : solve_cholesky_dense(rhs, st);
            slot.report.solver = cfg.solver;
            slot.report.residual_history = {relative_residual(rhs, slot.u, st)};
            slot.report.converged = all_finite(slot.u);
            break;
        }
        case SolverId::jacobi: slot = solve_jacobi(rhs, st, cfg); break;
        case SolverId::gauss_seidel: slot = solve_gauss_seidel(rhs, st, cfg); break;
        case SolverId::sor: slot = solve_sor(rhs, st, cfg); break;
        case SolverId::multigrid: slot = solve_multigrid(rhs, st, cfg); break;
        case SolverId::wcnn: break;
        }
    });

    FieldSolution out;
    std::vector<Plane> planes;
    planes.reserve(parts.size());
    out.report.solver = cfg.solver;
    out.report.converged = true;
    for (auto& p : parts) {
        if (p.report.iterations >= out.report.iterations) {
            out.report.iterations = p.report.iterations;
            out.report.residual_history = p.report.residual_history;
        }
        out.report.converged = out.report.converged && p.report.converged;
        planes.push_back(std::move(p.u));
    }
    out.image = RasterImage(std::move(planes));
    out.report.seconds = seconds_since(t0);
    return out;
}

}  // namespace lapfield
