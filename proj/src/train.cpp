#include "lapfield/train.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <ostream>

#include "lapfield/image_io.hpp"
#include "lapfield/laplacian.hpp"
#include "lapfield/parallel.hpp"

namespace lapfield {

double mse_loss(const RasterImage& output, const RasterImage& truth) {
    if (!output.same_geometry(truth)) throw InvalidArgument("mse_loss: shape mismatch");
    double total = 0.0;
    for (int c = 0; c < output.channels(); ++c) {
        auto u = output.channel(c).values();
        auto g = truth.channel(c).values();
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - g[i]) * (u[i] - g[i]);
        total += s / (2.0 * static_cast<double>(u.size()));
    }
    return total / output.channels();
}

namespace {

Plane rotate180(const Plane& w) {
    Plane out(w.rows(), w.cols());
    for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) out(r, c) = w(w.rows() - 1 - r, w.cols() - 1 - c);
    return out;
}

// grad(d) += sum_y g(y) * in(y + d), d centred on the kernel.
void accumulate_kernel_grad(const Plane& in, const Plane& g, Plane& grad) {
    const int rows = in.rows(), cols = in.cols();
    const int k = grad.rows(), rad = k / 2;
    for (int dy = 0; dy < k; ++dy) {
        const int oy = dy - rad;
        const int r0 = std::max(0, -oy), r1 = std::min(rows, rows - oy);
        for (int dx = 0; dx < k; ++dx) {
            const int ox = dx - rad;
            const int c0 = std::max(0, -ox), c1 = std::min(cols, cols - ox);
            double s = 0.0;
            for (int r = r0; r < r1; ++r) {
                const double* src = in.row(r + oy) + ox;
                const double* gr = g.row(r);
                for (int c = c0; c < c1; ++c) s += gr[c] * src[c];
            }
            grad(dy, dx) += s;
        }
    }
}

// Gradient of one channel's loss; `scale` multiplies (U - GT).
double channel_backward(const ChannelKernels& ck, const Plane& field, const Plane& truth, int n_levels, double scale,
                        ChannelKernels& grad) {
    const ChannelTrace t = forward_channel(ck, field, n_levels);
    const auto n = static_cast<std::size_t>(n_levels);

    Plane du(truth.rows(), truth.cols());
    double sq = 0.0;
    {
        auto u = t.output.values();
        auto g = truth.values();
        auto d = du.values();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double e = u[i] - g[i];
            sq += e * e;
            d[i] = scale * e;
        }
    }

    const Plane g_flip = rotate180(ck.detail);
    const Plane k_flip = rotate180(ck.synthesis);
    const Plane h_flip = rotate180(ck.analysis);

    // Gradients w.r.t. L_i for i >= 2 (level 0 is the input).
    std::vector<Plane> dlap(n);
    for (std::size_t i = 1; i < n; ++i) dlap[i] = Plane(t.laplacian[i].rows(), t.laplacian[i].cols());

    // Synthesis stream, fine to coarse.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        accumulate_kernel_grad(t.laplacian[i], du, grad.detail);
        if (i > 0) correlate_accumulate(du, g_flip, dlap[i]);
        accumulate_kernel_grad(t.upsampled[i], du, grad.synthesis);
        du = downsample(correlate(du, k_flip));
    }
    accumulate_kernel_grad(t.laplacian[n - 1], du, grad.detail);
    if (n > 1) correlate_accumulate(du, g_flip, dlap[n - 1]);

    // Analysis stream, coarse to fine: L_{i+1} = down(H * L_i).
    for (std::size_t i = n - 1; i-- > 0;) {
        const Plane da = upsample(dlap[i + 1], t.laplacian[i].rows(), t.laplacian[i].cols());
        accumulate_kernel_grad(t.laplacian[i], da, grad.analysis);
        if (i > 0) correlate_accumulate(da, h_flip, dlap[i]);
    }
    return sq / (2.0 * static_cast<double>(truth.size()));
}

}  // namespace

LossAndGradient backward(const KernelSet& kernels, const ScalarField& field, const RasterImage& truth, int n_levels) {
    if (!field.same_geometry(truth)) throw InvalidArgument("backward: field and truth differ in shape");
    if (kernels.channels() != field.channels()) throw InvalidArgument("backward: kernel/field channel mismatch");
    check_levels(field.height(), field.width(), n_levels);

    const int nc = field.channels();
    const double scale = 1.0 / (static_cast<double>(truth.pixel_count()) * nc);
    LossAndGradient out{0.0, GradientSet(nc, kernels.kernel_size())};
    std::vector<double> losses(static_cast<std::size_t>(nc));
    parallel_for(nc, [&](int c) {
        losses[static_cast<std::size_t>(c)] =
            channel_backward(kernels.channel(c), field.channel(c), truth.channel(c), n_levels, scale, out.grad.channel(c));
    });
    for (double l : losses) out.loss += l;
    out.loss /= nc;
    return out;
}

LossAndGradient batch_backward(const KernelSet& kernels, std::span<const TrainingPair* const> batch, int n_levels) {
    if (batch.empty()) throw InvalidArgument("batch_backward: empty batch");
    std::vector<LossAndGradient> parts(batch.size());
    parallel_for(static_cast<int>(batch.size()), [&](int i) {
        const TrainingPair& p = *batch[static_cast<std::size_t>(i)];
        parts[static_cast<std::size_t>(i)] = backward(kernels, p.laplacian, p.truth, n_levels);
    });

    LossAndGradient out{0.0, GradientSet(kernels.channels(), kernels.kernel_size())};
    std::vector<double> acc(out.grad.parameter_count(), 0.0);
    for (const auto& p : parts) {
        out.loss += p.loss;
        const auto g = p.grad.flatten();
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& v : acc) v *= inv;
    out.loss *= inv;
    out.grad.assign_flat(acc);
    return out;
}

double mean_loss(const KernelSet& kernels, std::span<const TrainingPair> data, int n_levels) {
    if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> losses(data.size());
    parallel_for(static_cast<int>(data.size()), [&](int i) {
        const auto& p = data[static_cast<std::size_t>(i)];
        losses[static_cast<std::size_t>(i)] = mse_loss(forward(kernels, p.laplacian, n_levels), p.truth);
    });
    double s = 0.0;
    for (double l : losses) s += l;
    return s / static_cast<double>(data.size());
}

AdamState AdamState::fresh(std::size_t parameter_count) {
    return AdamState{std::vector<double>(parameter_count, 0.0), std::vector<double>(parameter_count, 0.0), 0};
}

void adam_step(KernelSet& kernels, const GradientSet& grad, AdamState& state, double learning_rate,
               const AdamOptions& options) {
    const std::size_t n = kernels.parameter_count();
    if (grad.parameter_count() != n || grad.kernel_size() != kernels.kernel_size() ||
        grad.channels() != kernels.channels())
        throw InvalidArgument("adam_step: gradient shape does not match kernels");
    if (state.first_moment.size() != n || state.second_moment.size() != n)
        throw InvalidArgument("adam_step: optimizer state shape does not match kernels");

    std::vector<double> p = kernels.flatten();
    const std::vector<double> g = grad.flatten();
    ++state.step;
    const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < n; ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = options.beta1 * m + (1.0 - options.beta1) * g[i];
        v = options.beta2 * v + (1.0 - options.beta2) * g[i] * g[i];
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p[i] -= learning_rate * mhat / (std::sqrt(vhat) + options.epsilon);
    }
    kernels.assign_flat(p);
}

namespace {

std::vector<double> binomial_row(int k) {
    std::vector<double> row(static_cast<std::size_t>(k), 0.0);
    row[0] = 1.0;
    for (int i = 1; i < k; ++i)
        for (int j = i; j > 0; --j) row[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j - 1)];
    return row;
}

Plane binomial(int k, double total) {
    const auto row = binomial_row(k);
    double s = 0.0;
    for (double v : row) s += v;
    Plane p(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) p(r, c) = total * row[static_cast<std::size_t>(r)] * row[static_cast<std::size_t>(c)] / (s * s);
    return p;
}

}  // namespace

KernelSet initial_kernels(int channels, int kernel_size) {
    KernelSet ks(channels, kernel_size);
    for (int c = 0; c < channels; ++c) {
        auto& ck = ks.channel(c);
        ck.analysis = binomial(kernel_size, 1.0);
        ck.detail = binomial(3, 0.1);
        ck.synthesis = binomial(kernel_size, 4.0);
    }
    return ks;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

template <class T>
void shuffle(std::vector<T>& v, std::uint64_t& state) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(state, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

std::uint64_t uniform_below(std::uint64_t& state, std::uint64_t bound) {
    if (bound == 0) throw InvalidArgument("uniform_below: empty range");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        const std::uint64_t x = splitmix64(state);
        if (x < limit) return x % bound;
    }
}

double step_matched_learning_rate(double reference_lr, long reference_steps, long steps) {
    if (reference_steps < 1 || steps < 1) throw InvalidArgument("step counts must be positive");
    return reference_lr * static_cast<double>(reference_steps) / static_cast<double>(steps);
}

long adam_step_count(long samples, int batch_size, int epochs) {
    if (samples < 1 || batch_size < 1 || epochs < 0) throw InvalidArgument("adam_step_count: bad arguments");
    return (samples + batch_size - 1) / batch_size * epochs;
}

Plane dihedral(const Plane& p, int t) {
    if (t < 0 || t >= 8) throw InvalidArgument("dihedral: transform index must be in [0, 8)");
    Plane cur = p;
    if (t & 1) {
        Plane m(cur.rows(), cur.cols());
        for (int r = 0; r < cur.rows(); ++r)
            for (int c = 0; c < cur.cols(); ++c) m(r, c) = cur(r, cur.cols() - 1 - c);
        cur = std::move(m);
    }
    for (int q = 0; q < (t >> 1); ++q) {
        // 90 degrees counter-clockwise.
        Plane rot(cur.cols(), cur.rows());
        for (int r = 0; r < cur.rows(); ++r)
            for (int c = 0; c < cur.cols(); ++c) rot(cur.cols() - 1 - c, r) = cur(r, c);
        cur = std::move(rot);
    }
    return cur;
}

std::vector<TrainingPair> sample_patches(const std::vector<RasterImage>& images, const PatchOptions& options) {
    if (options.count < 0) throw InvalidArgument("sample_patches: negative patch count");
    require_min_dims(options.patch_size, options.patch_size, "sample_patches");
    std::vector<TrainingPair> out;
    if (options.count == 0) return out;

    std::vector<int> usable;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].height() >= options.patch_size && images[i].width() >= options.patch_size)
            usable.push_back(static_cast<int>(i));
        else
            std::cerr << "warning: image " << i << " (" << images[i].height() << "x" << images[i].width()
                      << ") is smaller than the patch size; skipped\n";
    }
    if (usable.empty()) throw InvalidArgument("sample_patches: no image is at least as large as the patch size");

    const auto st = stencil(StencilId::k0);
    const int ps = options.patch_size;
    std::uint64_t state = options.seed;
    out.reserve(static_cast<std::size_t>(options.count));
    for (int n = 0; n < options.count; ++n) {
        const int src = usable[static_cast<std::size_t>(uniform_below(state, usable.size()))];
        const RasterImage img = promote_channels(images[static_cast<std::size_t>(src)], options.channels);
        const int r0 = static_cast<int>(uniform_below(state, static_cast<std::uint64_t>(img.height() - ps + 1)));
        const int c0 = static_cast<int>(uniform_below(state, static_cast<std::uint64_t>(img.width() - ps + 1)));
        const int t = options.augment ? static_cast<int>(uniform_below(state, 8)) : 0;

        std::vector<Plane> planes;
        for (int c = 0; c < img.channels(); ++c) {
            Plane patch(ps, ps);
            for (int r = 0; r < ps; ++r)
                for (int col = 0; col < ps; ++col) patch(r, col) = img(r0 + r, c0 + col, c);
            planes.push_back(dihedral(patch, t));
        }
        TrainingPair pair;
        pair.truth = RasterImage(std::move(planes));
        pair.laplacian = laplacian(pair.truth, st);
        pair.source = src;
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<TrainingPair> sample_patches(const std::filesystem::path& image_dir, const PatchOptions& options) {
    std::vector<RasterImage> images;
    for (const auto& f : list_png_files(image_dir)) images.push_back(read_png(f));
    if (images.empty()) throw InvalidArgument("sample_patches: no PNG images in " + image_dir.string());
    return sample_patches(images, options);
}

std::vector<TrainingPair> image_pairs(const std::vector<RasterImage>& images, int channels) {
    std::vector<TrainingPair> out;
    const auto st = stencil(StencilId::k0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        TrainingPair p;
        p.truth = promote_channels(images[i], channels);
        p.laplacian = laplacian(p.truth, st);
        p.source = static_cast<int>(i);
        out.push_back(std::move(p));
    }
    return out;
}

ImageSplit split_by_image(std::vector<RasterImage> images, int heldout, std::uint64_t seed) {
    if (heldout < 0 || heldout >= static_cast<int>(images.size()))
        throw InvalidArgument("split_by_image: held-out count must leave at least one training image");
    std::uint64_t state = seed ^ 0x5DEECE66Dull;
    shuffle(images, state);
    ImageSplit s;
    const auto cut = images.size() - static_cast<std::size_t>(heldout);
    for (std::size_t i = 0; i < images.size(); ++i) (i < cut ? s.train : s.heldout).push_back(std::move(images[i]));
    return s;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be finite and >= 0");
    if (epochs < 0) throw InvalidArgument("epoch count must be non-negative");
    if (kernel_size < 3 || kernel_size % 2 == 0) throw InvalidArgument("kernel size must be odd and at least 3");
    if (levels < 0) throw InvalidArgument("level count must be non-negative");
    if (checkpoint_every < 0) throw InvalidArgument("checkpoint interval must be non-negative");
    if (checkpoint_every > 0 && checkpoint_path.empty()) throw InvalidArgument("checkpoint interval set without a path");
}

void TrainRecord::write_csv(std::ostream& os) const {
    const auto old_prec = os.precision();
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "epoch,train_loss,heldout_loss\n";
    os << "0,," << initial_heldout_loss << '\n';
    for (std::size_t e = 0; e < train_loss.size(); ++e)
        os << (e + 1) << ',' << train_loss[e] << ',' << (e < heldout_loss.size() ? heldout_loss[e] : 0.0) << '\n';
    os.precision(old_prec);
}

TrainResult train_loop(const TrainConfig& config, std::span<const TrainingPair> train_set,
                       std::span<const TrainingPair> heldout_set, const KernelSet* start) {
    config.validate();
    if (train_set.empty()) throw InvalidArgument("train_loop: empty training set");
    const auto t0 = std::chrono::steady_clock::now();

    const auto& first = train_set.front();
    const int channels = first.laplacian.channels();
    for (const auto& p : train_set)
        if (p.laplacian.channels() != channels) throw InvalidArgument("train_loop: mixed channel counts");
    const int levels = config.levels > 0 ? config.levels : default_levels(first.laplacian.height(), first.laplacian.width());

    TrainResult res;
    res.kernels = start ? *start : initial_kernels(channels, config.kernel_size);
    if (res.kernels.channels() != channels) throw InvalidArgument("train_loop: starting kernels have the wrong channel count");
    AdamState adam = AdamState::fresh(res.kernels.parameter_count());

    res.record.initial_heldout_loss = mean_loss(res.kernels, heldout_set, levels);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::uint64_t state = config.seed;
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const KernelSet before_epoch = res.kernels;
        shuffle(order, state);
        double sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += bs) {
            std::vector<const TrainingPair*> batch;
            for (std::size_t j = b; j < std::min(order.size(), b + bs); ++j) batch.push_back(&train_set[order[j]]);
            auto lg = batch_backward(res.kernels, batch, levels);
            if (!std::isfinite(lg.loss))
                throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch + 1),
                                       before_epoch, res.record);
            if (config.learning_rate > 0.0) adam_step(res.kernels, lg.grad, adam, config.learning_rate, config.adam);
            if (!res.kernels.all_finite())
                throw TrainingDiverged("parameters became non-finite in epoch " + std::to_string(epoch + 1),
                                       before_epoch, res.record);
            sum += lg.loss * static_cast<double>(batch.size());
        }
        res.record.train_loss.push_back(sum / static_cast<double>(order.size()));
        res.record.heldout_loss.push_back(mean_loss(res.kernels, heldout_set, levels));
        if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0)
            save_checkpoint(config.checkpoint_path, res.kernels);
    }
    res.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace lapfield
