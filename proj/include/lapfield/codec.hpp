#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lapfield/grid.hpp"
#include "lapfield/solvers.hpp"
#include "lapfield/stencil.hpp"
#include "lapfield/wcnn.hpp"

namespace lapfield {

enum class StorageMode : std::uint8_t { dense = 0, sparse = 1 };

std::string_view to_string(StorageMode m);
std::optional<StorageMode> parse_storage_mode(std::string_view s);

/// One channel of payload. Dense mode leaves `indices` empty and stores
/// height * width values; sparse mode stores strictly increasing flat indices
/// with nonzero values.
struct ChannelPayload {
    std::vector<std::uint32_t> indices;
    std::vector<float> values;

    friend bool operator==(const ChannelPayload&, const ChannelPayload&) = default;
};

struct EncodedLaplacian {
    int height = 0;
    int width = 0;
    StencilId stencil = StencilId::k0;
    float threshold = 0.0f;
    float quant = 0.0f;
    StorageMode mode = StorageMode::sparse;
    std::vector<ChannelPayload> payload;

    int channels() const noexcept { return static_cast<int>(payload.size()); }
    std::size_t nonzero_count() const noexcept;

    friend bool operator==(const EncodedLaplacian&, const EncodedLaplacian&) = default;
};

inline constexpr std::uint16_t kCodecVersion = 1;
inline constexpr std::size_t kCodecHeaderBytes = 32;

struct EncodeOptions {
    StencilId stencil = StencilId::k0;
    double threshold = 0.0;
    double quant = 0.0;
    StorageMode mode = StorageMode::sparse;
};

/// L = laplacian(image); |L| <= T becomes 0; with q > 0 values snap to the
/// nearest multiple of q. Values are stored as float32.
EncodedLaplacian encode(const RasterImage& image, const EncodeOptions& options = {});

/// Densified field, ready for a solver.
ScalarField to_field(const EncodedLaplacian& encoded);

struct DecodeOptions {
    SolverConfig solver;
    /// Required for SolverId::wcnn. A single-channel set is replicated.
    const KernelSet* kernels = nullptr;
    /// 0 picks default_levels.
    int levels = 0;
};

/// Unclamped reconstruction.
FieldSolution reconstruct(const EncodedLaplacian& encoded, const DecodeOptions& options);
/// reconstruct, clamped to [0, 255].
RasterImage decode(const EncodedLaplacian& encoded, const DecodeOptions& options);

/// Nonzero count / (H * W * C).
double sparsity_ratio(const EncodedLaplacian& encoded);

enum class CodecErrorKind { bad_magic, truncated, version, bad_header, bad_index, bad_value, trailing_data };

std::string_view to_string(CodecErrorKind k);

class CodecError : public std::runtime_error {
public:
    CodecError(CodecErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    CodecErrorKind kind() const noexcept { return kind_; }

private:
    CodecErrorKind kind_;
};

std::vector<std::uint8_t> serialize(const EncodedLaplacian& encoded);
EncodedLaplacian deserialize(std::span<const std::uint8_t> bytes);

/// Throws CodecError with the same kinds as deserialize.
void validate(const EncodedLaplacian& encoded);

void save_encoded(const std::filesystem::path& path, const EncodedLaplacian& encoded);
EncodedLaplacian load_encoded(const std::filesystem::path& path);

}  // namespace lapfield
