#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lapfield/grid.hpp"
#include "lapfield/wcnn.hpp"

namespace lapfield {

/// Gradients share the exact layout of the parameters they belong to.
using GradientSet = KernelSet;

/// (1 / (2 H W)) * sum (U - GT)^2 per channel, averaged over channels.
double mse_loss(const RasterImage& output, const RasterImage& truth);

struct TrainingPair {
    ScalarField laplacian;
    RasterImage truth;
    /// Index of the source image the patch was cut from.
    int source = 0;
};

struct LossAndGradient {
    double loss = 0.0;
    GradientSet grad;
};

/// Exact reverse-mode gradient of mse_loss(forward(kernels, L), GT). A
/// shared filter receives the sum of its contributions from every level.
LossAndGradient backward(const KernelSet& kernels, const ScalarField& field, const RasterImage& truth, int n_levels);

/// Mean loss and gradient over a set of pairs (fixed summation order).
LossAndGradient batch_backward(const KernelSet& kernels, std::span<const TrainingPair* const> batch, int n_levels);

/// Mean loss over a data set, without gradients.
double mean_loss(const KernelSet& kernels, std::span<const TrainingPair> data, int n_levels);

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    long step = 0;

    static AdamState fresh(std::size_t parameter_count);
};

/// One bias-corrected Adam update in place.
void adam_step(KernelSet& kernels, const GradientSet& grad, AdamState& state, double learning_rate,
               const AdamOptions& options = {});

/// Smooth, centre-peaked starting point: normalized binomial filters with
/// H summing to 1, K summing to 4 and G = 0.1 x binomial(3).
KernelSet initial_kernels(int channels, int kernel_size);

// ---------------------------------------------------------------------------

struct PatchOptions {
    int patch_size = 64;
    int count = 200;
    /// Also emit a random one of the 8 rotations / mirror flips per patch.
    bool augment = true;
    std::uint64_t seed = 1;
    /// Images with fewer channels are replicated up to this count.
    int channels = 3;
};

/// Cuts `count` patches at uniformly random corners (image chosen uniformly,
/// then corner), optionally applies a random dihedral transform, and pairs
/// each with its k0 Laplacian. Deterministic for a fixed seed. Images smaller
/// than the patch are skipped; an error is raised if none is usable.
std::vector<TrainingPair> sample_patches(const std::vector<RasterImage>& images, const PatchOptions& options);
std::vector<TrainingPair> sample_patches(const std::filesystem::path& image_dir, const PatchOptions& options);

/// Dihedral transform t in [0, 8): bit 0 mirrors columns, bits 1-2 pick a
/// rotation by 90 * (t >> 1) degrees.
Plane dihedral(const Plane& p, int t);

/// Whole-image pairs (L = laplacian(img, k0), GT = img).
std::vector<TrainingPair> image_pairs(const std::vector<RasterImage>& images, int channels);

struct TrainConfig {
    int batch_size = 32;
    double learning_rate = 1e-5;
    int epochs = 2000;
    int kernel_size = 5;
    /// 0 picks default_levels(patch rows, patch cols).
    int levels = 0;
    AdamOptions adam;
    std::uint64_t seed = 1;
    /// Write `checkpoint_path` every this many epochs (0 disables).
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_path;

    void validate() const;
};

struct TrainRecord {
    double initial_heldout_loss = 0.0;
    std::vector<double> train_loss;
    std::vector<double> heldout_loss;
    double seconds = 0.0;

    /// CSV with header "epoch,train_loss,heldout_loss"; epoch 0 is the
    /// untrained held-out loss with an empty train column.
    void write_csv(std::ostream& os) const;
};

struct TrainResult {
    KernelSet kernels;
    TrainRecord record;
};

/// Raised when the loss turns non-finite; carries the last finite state.
class TrainingDiverged : public NumericalError {
public:
    TrainingDiverged(const std::string& what, KernelSet last_good, TrainRecord record)
        : NumericalError(what), last_good_(std::move(last_good)), record_(std::move(record)) {}
    const KernelSet& last_good() const noexcept { return last_good_; }
    const TrainRecord& record() const noexcept { return record_; }

private:
    KernelSet last_good_;
    TrainRecord record_;
};

/// Mini-batch Adam. When `start` is empty the kernels come from
/// initial_kernels. An empty held-out set records NaN held-out losses.
TrainResult train_loop(const TrainConfig& config, std::span<const TrainingPair> train_set,
                       std::span<const TrainingPair> heldout_set, const KernelSet* start = nullptr);

/// Split images by source: the last `heldout` images (after a seeded
/// shuffle) form the held-out group.
struct ImageSplit {
    std::vector<RasterImage> train;
    std::vector<RasterImage> heldout;
};
ImageSplit split_by_image(std::vector<RasterImage> images, int heldout, std::uint64_t seed);

/// Learning rate that gives a run of `steps` Adam updates the same total
/// step budget as `reference_steps` updates at `reference_lr`.
double step_matched_learning_rate(double reference_lr, long reference_steps, long steps);

/// Update count of one run: ceil(samples / batch) * epochs.
long adam_step_count(long samples, int batch_size, int epochs);

/// Deterministic generator helpers shared by the sampling code.
std::uint64_t uniform_below(std::uint64_t& state, std::uint64_t bound);

}  // namespace lapfield
