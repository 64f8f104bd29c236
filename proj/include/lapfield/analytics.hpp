#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lapfield/grid.hpp"
#include "lapfield/solvers.hpp"
#include "lapfield/wcnn.hpp"

namespace lapfield {

struct HistogramSpec {
    int bins = 257;
    double lo = -64.0;
    double hi = 64.0;

    void validate() const;
    double bin_width() const { return (hi - lo) / bins; }
    /// Values outside [lo, hi] land in the end bins.
    int bin_of(double x) const;
};

struct Histogram {
    HistogramSpec spec;
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
    double lower_edge(int i) const { return spec.lo + i * spec.bin_width(); }
    double center(int i) const { return spec.lo + (i + 0.5) * spec.bin_width(); }
    /// Probability density: counts / (total * bin width).
    std::vector<double> density() const;
    /// Cumulative fraction; the last entry is exactly 1.
    std::vector<double> cdf() const;
    void add(std::span<const double> values);
};

/// One histogram per channel.
std::vector<Histogram> field_histogram(const ScalarField& field, const HistogramSpec& spec = {});

enum class FieldKind { laplacian, gradient_x, intensity };

std::string_view to_string(FieldKind k);
std::optional<FieldKind> parse_field_kind(std::string_view s);

/// Forward difference along columns with u = 0 past the last column.
ScalarField gradient_x(const RasterImage& image);

struct Distribution {
    HistogramSpec spec;
    std::vector<std::string> names;
    /// Channels of an image are pooled into one histogram.
    std::vector<Histogram> per_image;
    /// Average of the per-image densities.
    std::vector<double> mean_density;

    /// Columns: bin_center, mean_density, log10_mean_density, then one
    /// density column per image.
    void write_csv(std::ostream& os) const;
};

Distribution dataset_distribution(const std::vector<RasterImage>& images, const std::vector<std::string>& names,
                                  const HistogramSpec& spec = {}, FieldKind kind = FieldKind::laplacian);
Distribution dataset_distribution(const std::filesystem::path& image_dir, const HistogramSpec& spec = {},
                                  FieldKind kind = FieldKind::laplacian);

struct LaplaceFit {
    double location = 0.0;
    double scale = 0.0;
    /// Mean |x - mean(x)|.
    double mean_abs_deviation = 0.0;
};

/// Maximum-likelihood Laplace fit: location = median, scale = mean |x - median|.
LaplaceFit laplace_fit(std::span<const double> values);
LaplaceFit laplace_fit(const ScalarField& field);

/// Fraction of values with |x| <= fraction * max|x|: the share inside the
/// central `fraction` of a zero-centred display range.
double central_fraction(std::span<const double> values, double fraction = 0.1);

/// Laplacian (k0) and mean-centred intensity central fractions of one image.
struct SparsityComparison {
    double laplacian = 0.0;
    double intensity = 0.0;
};
SparsityComparison compare_sparsity(const RasterImage& image, double fraction = 0.1);

/// |DFT| of the kernel zero-padded to n x n, shifted so DC sits at (n/2, n/2).
Plane kernel_spectrum(const Plane& kernel, int fft_size);

/// DC magnitude minus the largest magnitude on the Nyquist edge: row and
/// column 0 of the shifted spectrum, plus the last row and column when the
/// size is odd. Positive for a low-pass kernel.
double low_pass_margin(const Plane& spectrum);

void write_spectrum_csv(std::ostream& os, const Plane& spectrum);

// ---------------------------------------------------------------------------

struct BenchOptions {
    std::vector<int> resolutions{256, 512, 1024};
    std::vector<SolverId> solvers{SolverId::dst, SolverId::multigrid};
    int reps = 5;
    std::uint64_t seed = 1;
    const KernelSet* kernels = nullptr;
    SolverConfig solver_config;

    void validate() const;
};

struct BenchResult {
    SolverId solver = SolverId::dst;
    int resolution = 0;
    int reps = 0;
    double median_seconds = 0.0;
    double mse = 0.0;
};

/// Smooth test image with roughly 1/f amplitude falloff and integer
/// intensities in [0, 255]; deterministic in the seed.
RasterImage synthetic_natural_image(int rows, int cols, int channels, std::uint64_t seed);

/// Keeps freed heap memory inside the process so repeated timed runs do not
/// pay for fresh page faults on every large buffer. Process-wide and
/// permanent; meant for benchmark drivers. No effect outside glibc.
void retain_freed_memory();

/// Times decode of an encoded k0 field per solver and resolution after one
/// warm-up run; rows are sorted by solver name, then resolution.
std::vector<BenchResult> benchmark_solvers(const BenchOptions& options);

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------

/// Mean over channels of |U - GT|.
Plane error_map(const RasterImage& output, const RasterImage& truth);

/// Grayscale PNG of a plane, linearly mapped so min -> 0 and max -> 255
/// (optionally after log10(1 + x) for non-negative data).
void write_heatmap_png(const std::filesystem::path& path, const Plane& values, bool log_scale = false);

}  // namespace lapfield
