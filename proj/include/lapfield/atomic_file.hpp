#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>

namespace lapfield {

/// Writes through `fill` into `<path>.tmp.<pid>` and renames over `path` only
/// when `fill` returns normally and the stream is good. On any failure the
/// temporary is removed and the exception propagates; `path` is untouched.
void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill);

void write_bytes_atomically(const std::filesystem::path& path, std::span<const unsigned char> bytes);

/// Temporary sibling name used by the atomic writers.
std::filesystem::path temporary_sibling(const std::filesystem::path& path);

}  // namespace lapfield
