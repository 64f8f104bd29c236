#include "lapfield/atomic_file.hpp"

#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <unistd.h>

namespace lapfield {

std::filesystem::path temporary_sibling(const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    return tmp;
}

void write_file_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill) {
    const auto tmp = temporary_sibling(path);
    try {
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
            fill(os);
            os.flush();
            if (!os) throw std::runtime_error("write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

void write_bytes_atomically(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    write_file_atomically(path, [&](std::ostream& os) {
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    });
}

}  // namespace lapfield
