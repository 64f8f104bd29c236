#pragma once

#include "lapfield/grid.hpp"
#include "lapfield/stencil.hpp"

namespace lapfield {

/// Forward transform image -> Laplacian field. Pixels outside the grid are
/// read as zero, which is the homogeneous Dirichlet condition; with it the
/// transform is invertible and no boundary ring has to be stored.
ScalarField laplacian(const RasterImage& image, const Stencil3x3& st = stencil(kDefaultStencil));

/// Same operator applied to an arbitrary single plane. Solvers use this to
/// form residuals without assembling a matrix.
void apply_laplacian(const Plane& u, const Stencil3x3& st, Plane& out);
Plane apply_laplacian(const Plane& u, const Stencil3x3& st);

/// Multi-channel matrix-free form; identical results to `laplacian`.
ScalarField apply_laplacian_matrix_free(const ScalarField& u, const Stencil3x3& st);

/// ||L - Δu||_2 / max(||L||_2, 1e-12).
double relative_residual(const Plane& rhs, const Plane& u, const Stencil3x3& st);

}  // namespace lapfield
