#include "lapfield/analytics.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

#include "lapfield/codec.hpp"
#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"

namespace lapfield {

void HistogramSpec::validate() const {
    if (bins < 2) throw InvalidArgument("histogram needs at least 2 bins");
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("histogram range must satisfy lo < hi");
}

int HistogramSpec::bin_of(double x) const {
    if (!(x > lo)) return 0;
    if (x >= hi) return bins - 1;
    return std::min(bins - 1, static_cast<int>((x - lo) / bin_width()));
}

std::uint64_t Histogram::total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
}

std::vector<double> Histogram::density() const {
    const double t = static_cast<double>(total());
    std::vector<double> d(counts.size(), 0.0);
    if (t == 0.0) return d;
    for (std::size_t i = 0; i < counts.size(); ++i) d[i] = static_cast<double>(counts[i]) / (t * spec.bin_width());
    return d;
}

std::vector<double> Histogram::cdf() const {
    const auto t = total();
    std::vector<double> out(counts.size(), 0.0);
    if (t == 0) return out;
    std::uint64_t run = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        run += counts[i];
        out[i] = static_cast<double>(run) / static_cast<double>(t);
    }
    return out;
}

void Histogram::add(std::span<const double> values) {
    if (counts.size() != static_cast<std::size_t>(spec.bins)) counts.assign(static_cast<std::size_t>(spec.bins), 0);
    for (double v : values) ++counts[static_cast<std::size_t>(spec.bin_of(v))];
}

std::vector<Histogram> field_histogram(const ScalarField& field, const HistogramSpec& spec) {
    spec.validate();
    if (field.pixel_count() == 0 || field.channels() == 0) throw InvalidArgument("field_histogram: empty field");
    std::vector<Histogram> out;
    for (const auto& p : field.planes()) {
        Histogram h{spec, {}};
        h.add(p.values());
        out.push_back(std::move(h));
    }
    return out;
}

std::string_view to_string(FieldKind k) {
    switch (k) {
        case FieldKind::laplacian: return "laplacian";
        case FieldKind::gradient_x: return "gradient-x";
        case FieldKind::intensity: return "intensity";
    }
    return "unknown";
}

std::optional<FieldKind> parse_field_kind(std::string_view s) {
    for (auto k : {FieldKind::laplacian, FieldKind::gradient_x, FieldKind::intensity})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

ScalarField gradient_x(const RasterImage& image) {
    ScalarField g(image.height(), image.width(), image.channels());
    for (int c = 0; c < image.channels(); ++c) {
        const Plane& u = image.channel(c);
        Plane& out = g.channel(c);
        for (int r = 0; r < u.rows(); ++r)
            for (int col = 0; col < u.cols(); ++col)
                out(r, col) = (col + 1 < u.cols() ? u(r, col + 1) : 0.0) - u(r, col);
    }
    return g;
}

namespace {

ScalarField field_of(const RasterImage& img, FieldKind kind) {
    switch (kind) {
        case FieldKind::laplacian: return laplacian(img);
        case FieldKind::gradient_x: return gradient_x(img);
        case FieldKind::intensity: return retag<LaplacianTag>(img);
    }
    return laplacian(img);
}

}  // namespace

Distribution dataset_distribution(const std::vector<RasterImage>& images, const std::vector<std::string>& names,
                                  const HistogramSpec& spec, FieldKind kind) {
    spec.validate();
    if (images.empty()) throw InvalidArgument("dataset_distribution: no images");
    if (names.size() != images.size()) throw InvalidArgument("dataset_distribution: one name per image required");
    Distribution d{spec, names, {}, std::vector<double>(static_cast<std::size_t>(spec.bins), 0.0)};
    for (const auto& img : images) {
        Histogram h{spec, {}};
        const ScalarField f = field_of(img, kind);
        for (const auto& p : f.planes()) h.add(p.values());
        const auto dens = h.density();
        for (std::size_t i = 0; i < dens.size(); ++i) d.mean_density[i] += dens[i];
        d.per_image.push_back(std::move(h));
    }
    for (double& v : d.mean_density) v /= static_cast<double>(images.size());
    return d;
}

Distribution dataset_distribution(const std::filesystem::path& image_dir, const HistogramSpec& spec, FieldKind kind) {
    std::vector<RasterImage> images;
    std::vector<std::string> names;
    for (const auto& f : list_png_files(image_dir)) {
        images.push_back(read_png(f));
        names.push_back(f.filename().string());
    }
    if (images.empty()) throw InvalidArgument("no PNG images in " + image_dir.string());
    return dataset_distribution(images, names, spec, kind);
}

void Distribution::write_csv(std::ostream& os) const {
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "bin_center,mean_density,log10_mean_density";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    std::vector<std::vector<double>> dens;
    for (const auto& h : per_image) dens.push_back(h.density());
    for (int i = 0; i < spec.bins; ++i) {
        const double m = mean_density[static_cast<std::size_t>(i)];
        os << spec.lo + (i + 0.5) * spec.bin_width() << ',' << m << ',';
        if (m > 0.0) os << std::log10(m);
        for (const auto& d : dens) os << ',' << d[static_cast<std::size_t>(i)];
        os << '\n';
    }
    os.precision(old_prec);
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty set");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<long>(mid));
    return 0.5 * (lower + upper);
}

LaplaceFit laplace_fit(std::span<const double> values) {
    if (values.empty()) return {};
    LaplaceFit f;
    f.location = median(std::vector<double>(values.begin(), values.end()));
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    for (double v : values) {
        f.scale += std::abs(v - f.location);
        f.mean_abs_deviation += std::abs(v - mean);
    }
    f.scale /= static_cast<double>(values.size());
    f.mean_abs_deviation /= static_cast<double>(values.size());
    return f;
}

LaplaceFit laplace_fit(const ScalarField& field) {
    std::vector<double> all;
    all.reserve(field.pixel_count() * static_cast<std::size_t>(field.channels()));
    for (const auto& p : field.planes()) all.insert(all.end(), p.values().begin(), p.values().end());
    return laplace_fit(all);
}

double central_fraction(std::span<const double> values, double fraction) {
    if (values.empty()) throw InvalidArgument("central_fraction: no values");
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    const double limit = fraction * m;
    std::size_t inside = 0;
    for (double v : values) inside += std::abs(v) <= limit;
    return static_cast<double>(inside) / static_cast<double>(values.size());
}

SparsityComparison compare_sparsity(const RasterImage& image, double fraction) {
    std::vector<double> lap, centred;
    const ScalarField field = laplacian(image);
    for (const auto& p : field.planes()) lap.insert(lap.end(), p.values().begin(), p.values().end());
    for (const auto& p : image.planes()) centred.insert(centred.end(), p.values().begin(), p.values().end());
    double mean = 0.0;
    for (double v : centred) mean += v;
    mean /= static_cast<double>(centred.size());
    for (double& v : centred) v -= mean;
    return {central_fraction(lap, fraction), central_fraction(centred, fraction)};
}

Plane kernel_spectrum(const Plane& kernel, int n) {
    if (n < std::max(kernel.rows(), kernel.cols())) throw InvalidArgument("kernel_spectrum: fft size smaller than the kernel");
    std::vector<double> cs(static_cast<std::size_t>(n)), sn(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double a = -2.0 * std::numbers::pi * i / n;
        cs[static_cast<std::size_t>(i)] = std::cos(a);
        sn[static_cast<std::size_t>(i)] = std::sin(a);
    }
    Plane out(n, n);
    for (int i = 0; i < n; ++i) {
        const int u = ((i - n / 2) % n + n) % n;
        for (int j = 0; j < n; ++j) {
            const int v = ((j - n / 2) % n + n) % n;
            double re = 0.0, im = 0.0;
            for (int r = 0; r < kernel.rows(); ++r)
                for (int c = 0; c < kernel.cols(); ++c) {
                    const auto ph = static_cast<std::size_t>((u * r + v * c) % n);
                    re += kernel(r, c) * cs[ph];
                    im += kernel(r, c) * sn[ph];
                }
            out(i, j) = std::hypot(re, im);
        }
    }
    return out;
}

double low_pass_margin(const Plane& s) {
    const int n = s.rows();
    double edge = 0.0;
    for (int k = 0; k < n; ++k) {
        edge = std::max({edge, s(0, k), s(k, 0)});
        if (n % 2) edge = std::max({edge, s(n - 1, k), s(k, n - 1)});
    }
    return s(n / 2, n / 2) - edge;
}

void write_spectrum_csv(std::ostream& os, const Plane& s) {
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "u,v,magnitude\n";
    const int n = s.rows();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < s.cols(); ++j) os << i - n / 2 << ',' << j - s.cols() / 2 << ',' << s(i, j) << '\n';
    os.precision(old_prec);
}

// ---------------------------------------------------------------------------

void BenchOptions::validate() const {
    if (reps < 3) throw InvalidArgument("benchmark needs at least 3 repetitions");
    if (resolutions.empty() || solvers.empty()) throw InvalidArgument("benchmark needs at least one solver and resolution");
    for (int r : resolutions)
        if (r < 3) throw InvalidArgument("benchmark resolution must be at least 3");
    for (auto s : solvers) {
        if (s == SolverId::wcnn && !kernels) throw InvalidArgument("benchmarking wcnn requires a checkpoint");
        if (s == SolverId::cholesky)
            for (int r : resolutions)
                if (static_cast<std::size_t>(r) * r > kCholeskyMaxUnknowns)
                    throw InvalidArgument("cholesky cannot run at " + std::to_string(r) + "x" + std::to_string(r));
    }
    solver_config.validate();
}

RasterImage synthetic_natural_image(int rows, int cols, int channels, std::uint64_t seed) {
    require_min_dims(rows, cols, "synthetic_natural_image");
    std::uint64_t state = seed;
    auto uniform = [&] {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return static_cast<double>((z ^ (z >> 31)) >> 11) * 0x1.0p-53;
    };
    constexpr int kModes = 24;
    const double max_freq = std::max(2.0, std::min(rows, cols) / 4.0);
    std::vector<Plane> planes;
    for (int ch = 0; ch < channels; ++ch) {
        Plane p(rows, cols);
        std::vector<double> sr(static_cast<std::size_t>(rows)), cr(static_cast<std::size_t>(rows));
        for (int m = 0; m < kModes; ++m) {
            const double f = std::pow(max_freq, uniform());  // cycles per image, log-uniform in [1, max]
            const double theta = 2.0 * std::numbers::pi * uniform();
            const double phase = 2.0 * std::numbers::pi * uniform();
            const double amp = 1.0 / f;
            const double a = 2.0 * std::numbers::pi * f * std::cos(theta) / cols;
            const double b = 2.0 * std::numbers::pi * f * std::sin(theta) / rows;
            for (int r = 0; r < rows; ++r) {
                sr[static_cast<std::size_t>(r)] = std::sin(b * r + phase);
                cr[static_cast<std::size_t>(r)] = std::cos(b * r + phase);
            }
            for (int c = 0; c < cols; ++c) {
                const double sc = amp * std::sin(a * c), cc = amp * std::cos(a * c);
                for (int r = 0; r < rows; ++r) p(r, c) += sc * cr[static_cast<std::size_t>(r)] + cc * sr[static_cast<std::size_t>(r)];
            }
        }
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double v : p.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
        for (double& v : p.values()) v = std::round((v - lo) * scale);
        planes.push_back(std::move(p));
    }
    return RasterImage(std::move(planes));
}

void retain_freed_memory() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
#endif
}

std::vector<BenchResult> benchmark_solvers(const BenchOptions& options) {
    options.validate();
    const int channels = options.kernels ? options.kernels->channels() : 1;

    struct Cell {
        SolverId solver;
        int resolution;
        std::size_t image;
        DecodeOptions decode;
        std::vector<double> times;
        RasterImage last;
    };
    std::vector<RasterImage> images;
    std::vector<EncodedLaplacian> encoded;
    std::vector<Cell> cells;
    for (int res : options.resolutions) {
        images.push_back(synthetic_natural_image(res, res, channels, options.seed + static_cast<std::uint64_t>(res)));
        encoded.push_back(encode(images.back()));
        for (auto id : options.solvers) {
            Cell c{id, res, images.size() - 1, {}, {}, {}};
            c.decode.solver = options.solver_config;
            c.decode.solver.solver = id;
            c.decode.kernels = options.kernels;
            cells.push_back(std::move(c));
        }
    }
    for (auto& c : cells) (void)reconstruct(encoded[c.image], c.decode);

    // Repetitions go round-robin over all cells so slow phases of the machine
    // spread across resolutions instead of landing on one of them.
    for (int i = 0; i < options.reps; ++i)
        for (auto& c : cells) {
            const auto t0 = std::chrono::steady_clock::now();
            auto sol = reconstruct(encoded[c.image], c.decode);
            c.times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            c.last = std::move(sol.image);
        }

    std::vector<BenchResult> rows;
    for (auto& c : cells) {
        for (auto& p : c.last.planes())
            for (double& v : p.values()) v = std::clamp(v, 0.0, 255.0);
        rows.push_back({c.solver, c.resolution, options.reps, median(c.times), mean_squared_error(c.last, images[c.image])});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const BenchResult& a, const BenchResult& b) {
        const auto sa = to_string(a.solver), sb = to_string(b.solver);
        return sa != sb ? sa < sb : a.resolution < b.resolution;
    });
    return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& rows) {
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "solver,resolution,median_seconds,mse\n";
    for (const auto& r : rows) os << to_string(r.solver) << ',' << r.resolution << ',' << r.median_seconds << ',' << r.mse << '\n';
    os.precision(old_prec);
}

// ---------------------------------------------------------------------------

Plane error_map(const RasterImage& output, const RasterImage& truth) {
    if (!output.same_geometry(truth)) throw InvalidArgument("error_map: shape mismatch");
    Plane out(output.height(), output.width());
    for (int c = 0; c < output.channels(); ++c) {
        auto a = output.channel(c).values();
        auto b = truth.channel(c).values();
        auto o = out.values();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += std::abs(a[i] - b[i]) / output.channels();
    }
    return out;
}

void write_heatmap_png(const std::filesystem::path& path, const Plane& values, bool log_scale) {
    Plane p = values;
    if (log_scale) {
        for (double& v : p.values()) {
            if (v < 0.0) throw InvalidArgument("log-scaled heatmap needs non-negative data");
            v = std::log10(1.0 + v);
        }
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : p.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    for (double& v : p.values()) v = (v - lo) * scale;
    write_png(path, RasterImage(std::vector<Plane>{std::move(p)}));
}

}  // namespace lapfield
