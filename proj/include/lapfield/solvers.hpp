#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lapfield/grid.hpp"
#include "lapfield/stencil.hpp"

namespace lapfield {

// All solvers target Δu = L on the pixel grid with u = 0 outside it.

enum class SolverId { cholesky, jacobi, gauss_seidel, sor, dst, multigrid, wcnn };

std::string_view to_string(SolverId id);
std::optional<SolverId> parse_solver_id(std::string_view s);

struct SolverConfig {
    SolverId solver = SolverId::dst;
    double tolerance = 1e-6;
    int max_iterations = 100000;
    /// Empty selects the model-problem optimum 2 / (1 + sin(pi / (min(H, W) + 1))).
    std::optional<double> sor_omega;
    /// Upper bound on grid levels; 0 coarsens until the smaller side drops below 4.
    int mg_levels = 0;
    int mg_pre_smooth = 2;
    int mg_post_smooth = 2;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
};

struct SolverReport {
    SolverId solver = SolverId::dst;
    int iterations = 0;
    /// Relative residual ||L - Δu|| / max(||L||, 1e-12); entry 0 is the initial guess.
    std::vector<double> residual_history;
    double seconds = 0.0;
    bool converged = false;

    double final_residual() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

struct PlaneSolution {
    Plane u;
    SolverReport report;
};

/// Largest grid (in unknowns) accepted by the dense Cholesky oracle.
inline constexpr std::size_t kCholeskyMaxUnknowns = 4096;

/// Default SOR relaxation for a grid of the given size.
double default_sor_omega(int rows, int cols);

// Single-plane solvers. `rhs` is the Laplacian field L.
Plane solve_cholesky_dense(const Plane& rhs, const Stencil3x3& st);
PlaneSolution solve_jacobi(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg);
PlaneSolution solve_gauss_seidel(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg);
PlaneSolution solve_sor(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg);
Plane solve_dst(const Plane& rhs, const Stencil3x3& st);
PlaneSolution solve_multigrid(const Plane& rhs, const Stencil3x3& st, const SolverConfig& cfg);

/// Multi-channel front end for the classical solvers (every id except wcnn).
/// The report aggregates channels: iterations and residuals are the worst
/// channel's, `converged` requires every channel.
struct FieldSolution {
    RasterImage image;
    SolverReport report;
};
FieldSolution solve_classical(const ScalarField& field, const Stencil3x3& st, const SolverConfig& cfg);

}  // namespace lapfield
