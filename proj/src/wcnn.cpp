#include "lapfield/wcnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "lapfield/atomic_file.hpp"
#include "lapfield/parallel.hpp"

namespace lapfield {

namespace {

void require_odd_kernel(int k) {
    if (k < 3 || k % 2 == 0) throw InvalidArgument("kernel size must be odd and at least 3, got " + std::to_string(k));
}

}  // namespace

KernelSet::KernelSet(int channels, int kernel_size) : k_(kernel_size) {
    require_odd_kernel(kernel_size);
    if (channels < 1) throw InvalidArgument("kernel set needs at least one channel");
    per_channel_.assign(static_cast<std::size_t>(channels),
                        ChannelKernels{Plane(kernel_size, kernel_size), Plane(3, 3), Plane(kernel_size, kernel_size)});
}

std::size_t KernelSet::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& ck : per_channel_) n += ck.analysis.size() + ck.detail.size() + ck.synthesis.size();
    return n;
}

std::vector<double> KernelSet::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& ck : per_channel_)
        for (const Plane* p : {&ck.analysis, &ck.detail, &ck.synthesis})
            out.insert(out.end(), p->values().begin(), p->values().end());
    return out;
}

void KernelSet::assign_flat(std::span<const double> values) {
    if (values.size() != parameter_count()) throw InvalidArgument("assign_flat: parameter count mismatch");
    std::size_t i = 0;
    for (auto& ck : per_channel_)
        for (Plane* p : {&ck.analysis, &ck.detail, &ck.synthesis})
            for (double& v : p->values()) v = values[i++];
}

bool KernelSet::all_finite() const {
    for (const auto& ck : per_channel_)
        if (!lapfield::all_finite(ck.analysis) || !lapfield::all_finite(ck.detail) || !lapfield::all_finite(ck.synthesis))
            return false;
    return true;
}

std::size_t param_count(int channels, int kernel_size) {
    require_odd_kernel(kernel_size);
    if (channels < 1) throw InvalidArgument("param_count: channels must be positive");
    const auto k = static_cast<std::size_t>(kernel_size);
    return static_cast<std::size_t>(channels) * (2 * k * k + 9);
}

int default_levels(int rows, int cols) {
    const int m = std::min(rows, cols);
    if (m < 1) return 1;
    int lg = 0;
    while ((2 << lg) <= m) ++lg;  // floor(log2(m))
    return std::max(1, lg - 2);
}

void correlate_accumulate(const Plane& in, const Plane& kernel, Plane& out) {
    const int rows = in.rows(), cols = in.cols();
    const int k = kernel.rows();
    if (k != kernel.cols() || k % 2 == 0) throw InvalidArgument("correlate: kernel must be square with odd size");
    if (!out.same_shape(in)) throw InvalidArgument("correlate: output shape mismatch");
    const int rad = k / 2;

    // One output row at a time, taps in row-major kernel order, so results
    // match a per-pixel loop exactly while the working set stays k rows.
    for (int r = 0; r < rows; ++r) {
        double* dst = out.row(r);
        for (int dy = 0; dy < k; ++dy) {
            const int iy = r + dy - rad;
            if (iy < 0 || iy >= rows) continue;
            const double* src_row = in.row(iy);
            for (int dx = 0; dx < k; ++dx) {
                const int ox = dx - rad;
                const int c0 = std::max(0, -ox), c1 = std::min(cols, cols - ox);
                const double w = kernel(dy, dx);
                const double* src = src_row + ox;
                for (int c = c0; c < c1; ++c) dst[c] += w * src[c];
            }
        }
    }
}

Plane correlate(const Plane& in, const Plane& kernel) {
    Plane out(in.rows(), in.cols());
    correlate_accumulate(in, kernel, out);
    return out;
}

Plane downsample(const Plane& in) {
    Plane out((in.rows() + 1) / 2, (in.cols() + 1) / 2);
    for (int r = 0; r < out.rows(); ++r) {
        const double* src = in.row(2 * r);
        double* dst = out.row(r);
        for (int c = 0; c < out.cols(); ++c) dst[c] = src[2 * c];
    }
    return out;
}

Plane upsample(const Plane& in, int rows, int cols) {
    if ((rows + 1) / 2 != in.rows() || (cols + 1) / 2 != in.cols())
        throw InvalidArgument("upsample: target " + std::to_string(rows) + "x" + std::to_string(cols) +
                              " is incompatible with source " + std::to_string(in.rows()) + "x" +
                              std::to_string(in.cols()));
    Plane out(rows, cols);
    for (int r = 0; r < in.rows(); ++r) {
        const double* src = in.row(r);
        double* dst = out.row(2 * r);
        for (int c = 0; c < in.cols(); ++c) dst[2 * c] = src[c];
    }
    return out;
}

void check_levels(int rows, int cols, int n_levels) {
    require_min_dims(rows, cols, "wcnn");
    if (n_levels < 1) throw InvalidArgument("wcnn: level count must be at least 1");
    int r = rows, c = cols;
    for (int i = 1; i < n_levels; ++i) {
        r = (r + 1) / 2;
        c = (c + 1) / 2;
    }
    if (r < 3 || c < 3)
        throw InvalidArgument("wcnn: " + std::to_string(n_levels) + " levels shrink a " + std::to_string(rows) + "x" +
                              std::to_string(cols) + " grid below 3x3");
}

namespace {

void check_kernels_for(const KernelSet& kernels, const ScalarField& field) {
    if (kernels.channels() != field.channels())
        throw InvalidArgument("wcnn: kernel set has " + std::to_string(kernels.channels()) + " channels, field has " +
                              std::to_string(field.channels()));
}

}  // namespace

Pyramid build_pyramid(const ScalarField& field, const KernelSet& kernels, int n_levels) {
    check_levels(field.height(), field.width(), n_levels);
    check_kernels_for(kernels, field);
    Pyramid p;
    p.levels.push_back(field);
    for (int i = 1; i < n_levels; ++i) {
        const ScalarField& prev = p.levels.back();
        std::vector<Plane> planes(static_cast<std::size_t>(prev.channels()));
        parallel_for(prev.channels(), [&](int c) {
            planes[static_cast<std::size_t>(c)] = downsample(correlate(prev.channel(c), kernels.channel(c).analysis));
        });
        p.levels.emplace_back(std::move(planes));
    }
    return p;
}

ChannelTrace forward_channel(const ChannelKernels& kernels, const Plane& field, int n_levels) {
    check_levels(field.rows(), field.cols(), n_levels);
    ChannelTrace t;
    t.laplacian.reserve(static_cast<std::size_t>(n_levels));
    t.laplacian.push_back(field);
    for (int i = 1; i < n_levels; ++i) t.laplacian.push_back(downsample(correlate(t.laplacian.back(), kernels.analysis)));

    t.upsampled.resize(static_cast<std::size_t>(n_levels - 1));
    Plane u = correlate(t.laplacian.back(), kernels.detail);
    for (int i = n_levels - 2; i >= 0; --i) {
        const Plane& li = t.laplacian[static_cast<std::size_t>(i)];
        Plane& up = t.upsampled[static_cast<std::size_t>(i)];
        up = upsample(u, li.rows(), li.cols());
        Plane next = correlate(up, kernels.synthesis);
        Plane detail = correlate(li, kernels.detail);
        auto a = next.values();
        auto b = detail.values();
        for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
        u = std::move(next);
    }
    t.output = std::move(u);
    return t;
}

RasterImage forward(const KernelSet& kernels, const ScalarField& field, int n_levels) {
    check_levels(field.height(), field.width(), n_levels);
    check_kernels_for(kernels, field);
    std::vector<Plane> planes(static_cast<std::size_t>(field.channels()));
    parallel_for(field.channels(), [&](int c) {
        planes[static_cast<std::size_t>(c)] = forward_channel(kernels.channel(c), field.channel(c), n_levels).output;
    });
    return RasterImage(std::move(planes));
}

// ---------------------------------------------------------------------------

namespace {

void write_matrix(std::ostream& os, const char* name, const Plane& p) {
    os << name << '\n';
    for (int r = 0; r < p.rows(); ++r) {
        for (int c = 0; c < p.cols(); ++c) os << (c ? " " : "") << p(r, c);
        os << '\n';
    }
}

class Tokenizer {
public:
    explicit Tokenizer(std::istream& is) : is_(is) {}

    std::string next() {
        std::string tok;
        while (is_ >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is_, rest);
                continue;
            }
            return tok;
        }
        throw CheckpointError("checkpoint: unexpected end of file");
    }

    void expect(const std::string& word) {
        const auto tok = next();
        if (tok != word) throw CheckpointError("checkpoint: expected '" + word + "', found '" + tok + "'");
    }

    long integer() {
        const auto tok = next();
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) throw CheckpointError("checkpoint: expected an integer, found '" + tok + "'");
        return v;
    }

    double real() {
        const auto tok = next();
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw CheckpointError("checkpoint: expected a finite number, found '" + tok + "'");
        return v;
    }

    bool at_end() {
        std::string tok;
        while (is_ >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(is_, rest);
                continue;
            }
            return false;
        }
        return true;
    }

private:
    std::istream& is_;
};

void read_matrix(Tokenizer& tk, const char* name, Plane& p) {
    tk.expect(name);
    for (double& v : p.values()) v = tk.real();
}

}  // namespace

void write_checkpoint(std::ostream& os, const KernelSet& kernels) {
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "lapfield-wcnn " << kCheckpointVersion << '\n';
    os << "channels " << kernels.channels() << '\n';
    os << "kernel_size " << kernels.kernel_size() << '\n';
    for (int c = 0; c < kernels.channels(); ++c) {
        const auto& ck = kernels.channel(c);
        os << "channel " << c << '\n';
        write_matrix(os, "H", ck.analysis);
        write_matrix(os, "G", ck.detail);
        write_matrix(os, "K", ck.synthesis);
    }
    os.flags(old_flags);
    os.precision(old_prec);
}

KernelSet read_checkpoint(std::istream& is) {
    Tokenizer tk(is);
    tk.expect("lapfield-wcnn");
    const long version = tk.integer();
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    tk.expect("channels");
    const long channels = tk.integer();
    tk.expect("kernel_size");
    const long k = tk.integer();
    if (channels < 1 || channels > 64) throw CheckpointError("checkpoint: bad channel count");
    if (k < 3 || k % 2 == 0 || k > 63) throw CheckpointError("checkpoint: kernel size must be odd in [3, 63]");

    KernelSet ks(static_cast<int>(channels), static_cast<int>(k));
    for (int c = 0; c < channels; ++c) {
        tk.expect("channel");
        if (tk.integer() != c) throw CheckpointError("checkpoint: channels out of order");
        auto& ck = ks.channel(c);
        read_matrix(tk, "H", ck.analysis);
        read_matrix(tk, "G", ck.detail);
        read_matrix(tk, "K", ck.synthesis);
    }
    if (!tk.at_end()) throw CheckpointError("checkpoint: trailing content");
    return ks;
}

void save_checkpoint(const std::filesystem::path& path, const KernelSet& kernels) {
    write_file_atomically(path, [&](std::ostream& os) { write_checkpoint(os, kernels); });
}

KernelSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
    return read_checkpoint(is);
}

KernelSet replicate_channels(const KernelSet& single, int channels) {
    if (single.channels() != 1) throw InvalidArgument("replicate_channels expects a single-channel kernel set");
    KernelSet out(channels, single.kernel_size());
    for (int c = 0; c < channels; ++c) out.channel(c) = single.channel(0);
    return out;
}

}  // namespace lapfield
