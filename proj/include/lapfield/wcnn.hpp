#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "lapfield/grid.hpp"

namespace lapfield {

/// Learnable filters of one colour channel. `analysis` (H) and `synthesis`
/// (K) are k x k, `detail` (G) is always 3 x 3. The same three filters are
/// reused at every pyramid level.
struct ChannelKernels {
    Plane analysis;
    Plane detail;
    Plane synthesis;

    friend bool operator==(const ChannelKernels&, const ChannelKernels&) = default;
};

/// Complete parameter set of the shared-kernel network. Channels never mix.
class KernelSet {
public:
    KernelSet() = default;
    /// All-zero kernels of the given shape.
    KernelSet(int channels, int kernel_size);

    int channels() const noexcept { return static_cast<int>(per_channel_.size()); }
    int kernel_size() const noexcept { return k_; }

    ChannelKernels& channel(int c) { return per_channel_.at(static_cast<std::size_t>(c)); }
    const ChannelKernels& channel(int c) const { return per_channel_.at(static_cast<std::size_t>(c)); }

    /// Total trainable scalars.
    std::size_t parameter_count() const noexcept;

    /// Flat views in the fixed order channel -> H, G, K -> row-major. Used by
    /// the optimizer and by gradient checks.
    std::vector<double> flatten() const;
    void assign_flat(std::span<const double> values);

    bool all_finite() const;

    friend bool operator==(const KernelSet&, const KernelSet&) = default;

private:
    int k_ = 0;
    std::vector<ChannelKernels> per_channel_;
};

/// channels * (2 k^2 + 9); k must be odd and at least 3.
std::size_t param_count(int channels, int kernel_size);

/// max(1, floor(log2(min(rows, cols))) - 2): the coarsest level keeps a side of at least 8.
int default_levels(int rows, int cols);

/// Zero-padded same-size correlation with an odd-sized kernel. Each output
/// accumulates kernel taps in row-major order, skipping taps that fall
/// outside the grid.
Plane correlate(const Plane& in, const Plane& kernel);
void correlate_accumulate(const Plane& in, const Plane& kernel, Plane& out);

/// Keeps samples at even indices; a side of n becomes ceil(n / 2).
Plane downsample(const Plane& in);
/// Zero insertion: source (i, j) lands at (2i, 2j) of a rows x cols grid,
/// which must satisfy ceil(rows / 2) == in.rows() (same for cols).
Plane upsample(const Plane& in, int rows, int cols);

/// Per-level Laplacian fields L_1..L_n, L_1 being the input.
struct Pyramid {
    std::vector<ScalarField> levels;
    int size() const noexcept { return static_cast<int>(levels.size()); }
};

/// Throws InvalidArgument if `n_levels` < 1 or the coarsest level would have
/// a side smaller than 3.
void check_levels(int rows, int cols, int n_levels);

Pyramid build_pyramid(const ScalarField& field, const KernelSet& kernels, int n_levels);

/// Reconstruction U_1 of the recurrence
///   U_n = G * L_n,   U_i = K * up(U_{i+1}) + G * L_i.
/// No activations and no biases: the map L -> U is linear.
RasterImage forward(const KernelSet& kernels, const ScalarField& field, int n_levels);

/// Intermediate values of one channel's forward pass, kept for backprop.
struct ChannelTrace {
    std::vector<Plane> laplacian;  // L_1..L_n
    std::vector<Plane> upsampled;  // up(U_{i+1}) for i = 1..n-1 (index i-1)
    Plane output;                  // U_1
};
ChannelTrace forward_channel(const ChannelKernels& kernels, const Plane& field, int n_levels);

// ---------------------------------------------------------------------------
// Checkpoint files. Plain text so the printed decimal values of a published
// kernel can be pasted in directly; writers use 17 significant digits so a
// save/load cycle is exact.

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& os, const KernelSet& kernels);
KernelSet read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const KernelSet& kernels);
KernelSet load_checkpoint(const std::filesystem::path& path);

/// Copies a single-channel kernel set to `channels` identical channels.
KernelSet replicate_channels(const KernelSet& single, int channels);

}  // namespace lapfield
