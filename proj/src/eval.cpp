#include "lapfield/eval.hpp"

#include <iomanip>
#include <limits>
#include <ostream>

namespace lapfield {

EvalMethod wcnn_method(std::string name, KernelSet kernels, int levels) {
    return {std::move(name), [kernels = std::move(kernels), levels](const TrainingPair& p) {
                const auto& f = p.laplacian;
                const int n = levels > 0 ? levels : default_levels(f.height(), f.width());
                if (kernels.channels() == 1 && f.channels() > 1)
                    return forward(replicate_channels(kernels, f.channels()), f, n);
                return forward(kernels, f, n);
            }};
}

EvalMethod solver_method(SolverId id, const SolverConfig& config) {
    if (id == SolverId::wcnn) throw InvalidArgument("solver_method: use wcnn_method for the network");
    SolverConfig cfg = config;
    cfg.solver = id;
    cfg.validate();
    return {std::string(to_string(id)), [cfg](const TrainingPair& p) {
                auto sol = solve_classical(p.laplacian, stencil(StencilId::k0), cfg);
                if (!sol.report.converged)
                    throw NumericalError(std::string(to_string(cfg.solver)) + " did not converge");
                return std::move(sol.image);
            }};
}

std::vector<double> EvalReport::mean() const {
    std::vector<double> m(methods.size(), 0.0);
    if (mse.empty()) return m;
    for (const auto& row : mse)
        for (std::size_t j = 0; j < row.size(); ++j) m[j] += row[j];
    for (double& v : m) v /= static_cast<double>(mse.size());
    return m;
}

void EvalReport::write_csv(std::ostream& os) const {
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "image";
    for (const auto& m : methods) os << ',' << m;
    os << '\n';
    auto row = [&](const std::string& name, const std::vector<double>& vals) {
        os << name;
        for (double v : vals) os << ',' << v;
        os << '\n';
    };
    for (std::size_t i = 0; i < images.size(); ++i) row(images[i], mse[i]);
    row("mean", mean());
    os.precision(old_prec);
}

EvalReport evaluate(const std::vector<TrainingPair>& pairs, const std::vector<std::string>& names,
                    const std::vector<EvalMethod>& methods) {
    if (pairs.empty()) throw InvalidArgument("evaluate: no images");
    if (methods.empty()) throw InvalidArgument("evaluate: no methods");
    if (names.size() != pairs.size()) throw InvalidArgument("evaluate: one name per image required");
    EvalReport r;
    for (const auto& m : methods) r.methods.push_back(m.name);
    r.images = names;
    for (const auto& p : pairs) {
        std::vector<double> row;
        for (const auto& m : methods) row.push_back(mean_squared_error(m.reconstruct(p), p.truth));
        r.mse.push_back(std::move(row));
    }
    return r;
}

}  // namespace lapfield
