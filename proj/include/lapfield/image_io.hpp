#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "lapfield/grid.hpp"

namespace lapfield {

/// Raised for unreadable or malformed image files.
class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PngDepth { bits8 = 8, bits16 = 16 };

/// Loads an 8- or 16-bit grayscale/RGB PNG into [0, 255] doubles. Palette
/// images are expanded to RGB; an alpha channel is dropped.
RasterImage read_png(const std::filesystem::path& path);

/// Clamps to [0, 255], rounds to the target depth and writes a PNG with 1 or
/// 3 channels. The file is written to a temporary sibling and renamed.
void write_png(const std::filesystem::path& path, const RasterImage& image, PngDepth depth = PngDepth::bits8);

/// Sorted list of *.png files in a directory (non-recursive).
std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir);

/// Replicates a single-channel image to `channels` planes; other inputs must
/// already have the requested channel count.
RasterImage promote_channels(RasterImage image, int channels);

}  // namespace lapfield
