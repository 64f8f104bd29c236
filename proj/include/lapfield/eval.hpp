#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapfield/solvers.hpp"
#include "lapfield/train.hpp"
#include "lapfield/wcnn.hpp"

namespace lapfield {

/// A named way of turning a Laplacian field back into an image.
struct EvalMethod {
    std::string name;
    std::function<RasterImage(const TrainingPair&)> reconstruct;
};

/// The shared-kernel network with the given kernels. A single-channel set is
/// replicated to the field's channel count. `levels` 0 picks default_levels.
EvalMethod wcnn_method(std::string name, KernelSet kernels, int levels = 0);

/// A classical solver on the k0 field.
EvalMethod solver_method(SolverId id, const SolverConfig& config = {});

struct EvalReport {
    std::vector<std::string> methods;
    std::vector<std::string> images;
    /// mse[image][method]: mean of (U - GT)^2 over pixels and channels,
    /// U unclamped.
    std::vector<std::vector<double>> mse;

    std::vector<double> mean() const;
    /// Header "image,<method>..." then one row per image and a final "mean" row.
    void write_csv(std::ostream& os) const;
};

EvalReport evaluate(const std::vector<TrainingPair>& pairs, const std::vector<std::string>& names,
                    const std::vector<EvalMethod>& methods);

}  // namespace lapfield
