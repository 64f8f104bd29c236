#include "lapfield/codec.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>

#include "lapfield/atomic_file.hpp"
#include "lapfield/laplacian.hpp"

namespace lapfield {

std::string_view to_string(StorageMode m) { return m == StorageMode::dense ? "dense" : "sparse"; }

std::optional<StorageMode> parse_storage_mode(std::string_view s) {
    if (s == "dense") return StorageMode::dense;
    if (s == "sparse") return StorageMode::sparse;
    return std::nullopt;
}

std::string_view to_string(CodecErrorKind k) {
    switch (k) {
        case CodecErrorKind::bad_magic: return "bad magic";
        case CodecErrorKind::truncated: return "truncated";
        case CodecErrorKind::version: return "unsupported version";
        case CodecErrorKind::bad_header: return "bad header";
        case CodecErrorKind::bad_index: return "bad index";
        case CodecErrorKind::bad_value: return "bad value";
        case CodecErrorKind::trailing_data: return "trailing data";
    }
    return "unknown";
}

std::size_t EncodedLaplacian::nonzero_count() const noexcept {
    std::size_t n = 0;
    for (const auto& ch : payload)
        for (float v : ch.values) n += v != 0.0f;
    return n;
}

EncodedLaplacian encode(const RasterImage& image, const EncodeOptions& options) {
    if (!(options.threshold >= 0.0) || !std::isfinite(options.threshold))
        throw InvalidArgument("encode: threshold must be finite and >= 0");
    if (!(options.quant >= 0.0) || !std::isfinite(options.quant))
        throw InvalidArgument("encode: quantization step must be finite and >= 0");
    const ScalarField lap = laplacian(image, stencil(options.stencil));

    EncodedLaplacian e;
    e.height = lap.height();
    e.width = lap.width();
    e.stencil = options.stencil;
    e.threshold = static_cast<float>(options.threshold);
    e.quant = static_cast<float>(options.quant);
    e.mode = options.mode;
    for (int c = 0; c < lap.channels(); ++c) {
        ChannelPayload ch;
        const auto vals = lap.channel(c).values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            double v = vals[i];
            if (std::abs(v) <= options.threshold) v = 0.0;
            if (options.quant > 0.0) v = options.quant * std::round(v / options.quant);
            const float f = static_cast<float>(v);
            if (options.mode == StorageMode::dense) {
                ch.values.push_back(f);
            } else if (f != 0.0f) {
                ch.indices.push_back(static_cast<std::uint32_t>(i));
                ch.values.push_back(f);
            }
        }
        e.payload.push_back(std::move(ch));
    }
    return e;
}

namespace {

[[noreturn]] void fail(CodecErrorKind kind, const std::string& detail) {
    throw CodecError(kind, std::string(to_string(kind)) + ": " + detail);
}

constexpr std::uint32_t kMaxSide = 1u << 16;
constexpr std::uint32_t kMaxChannels = 16;

void validate_header(std::uint32_t h, std::uint32_t w, std::uint32_t c, unsigned stencil_id, unsigned mode,
                     float threshold, float quant) {
    if (h < 3 || w < 3 || h > kMaxSide || w > kMaxSide)
        fail(CodecErrorKind::bad_header, "dimensions " + std::to_string(h) + "x" + std::to_string(w));
    if (c < 1 || c > kMaxChannels) fail(CodecErrorKind::bad_header, "channel count " + std::to_string(c));
    if (stencil_id > 3) fail(CodecErrorKind::bad_header, "stencil id " + std::to_string(stencil_id));
    if (mode > 1) fail(CodecErrorKind::bad_header, "storage mode " + std::to_string(mode));
    if (!(threshold >= 0.0f) || !std::isfinite(threshold)) fail(CodecErrorKind::bad_header, "threshold");
    if (!(quant >= 0.0f) || !std::isfinite(quant)) fail(CodecErrorKind::bad_header, "quantization step");
}

}  // namespace

void validate(const EncodedLaplacian& e) {
    if (e.height < 0 || e.width < 0) fail(CodecErrorKind::bad_header, "negative dimensions");
    validate_header(static_cast<std::uint32_t>(e.height), static_cast<std::uint32_t>(e.width),
                    static_cast<std::uint32_t>(e.channels()), static_cast<unsigned>(e.stencil),
                    static_cast<unsigned>(e.mode), e.threshold, e.quant);
    const std::size_t n = static_cast<std::size_t>(e.height) * static_cast<std::size_t>(e.width);
    for (int c = 0; c < e.channels(); ++c) {
        const auto& ch = e.payload[static_cast<std::size_t>(c)];
        const std::string where = "channel " + std::to_string(c);
        if (e.mode == StorageMode::dense) {
            if (!ch.indices.empty() || ch.values.size() != n) fail(CodecErrorKind::bad_header, where + ": dense size");
            for (float v : ch.values)
                if (!std::isfinite(v)) fail(CodecErrorKind::bad_value, where + ": non-finite value");
            continue;
        }
        if (ch.indices.size() != ch.values.size() || ch.values.size() > n)
            fail(CodecErrorKind::bad_header, where + ": sparse entry count");
        for (std::size_t j = 0; j < ch.indices.size(); ++j) {
            if (ch.indices[j] >= n)
                fail(CodecErrorKind::bad_index, where + ": index " + std::to_string(ch.indices[j]) + " >= " + std::to_string(n));
            if (j > 0 && ch.indices[j] <= ch.indices[j - 1])
                fail(CodecErrorKind::bad_index, where + ": indices not strictly increasing");
            if (ch.values[j] == 0.0f || !std::isfinite(ch.values[j]))
                fail(CodecErrorKind::bad_value, where + ": stored value must be finite and nonzero");
        }
    }
}

ScalarField to_field(const EncodedLaplacian& e) {
    validate(e);
    ScalarField f(e.height, e.width, e.channels());
    for (int c = 0; c < e.channels(); ++c) {
        const auto& ch = e.payload[static_cast<std::size_t>(c)];
        auto out = f.channel(c).values();
        if (e.mode == StorageMode::dense) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = ch.values[i];
        } else {
            for (std::size_t j = 0; j < ch.indices.size(); ++j) out[ch.indices[j]] = ch.values[j];
        }
    }
    return f;
}

FieldSolution reconstruct(const EncodedLaplacian& e, const DecodeOptions& options) {
    const ScalarField field = to_field(e);
    if (options.solver.solver != SolverId::wcnn) return solve_classical(field, stencil(e.stencil), options.solver);

    if (!options.kernels) throw InvalidArgument("decode: the wcnn solver needs a kernel checkpoint");
    if (e.stencil != StencilId::k0) throw InvalidArgument("decode: the wcnn solver only inverts k0 fields");
    const auto t0 = std::chrono::steady_clock::now();
    const KernelSet ks = options.kernels->channels() == 1 && field.channels() > 1
                             ? replicate_channels(*options.kernels, field.channels())
                             : *options.kernels;
    const int levels = options.levels > 0 ? options.levels : default_levels(field.height(), field.width());
    FieldSolution out{forward(ks, field, levels), {}};
    out.report.solver = SolverId::wcnn;
    out.report.iterations = 1;
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = 0.0;
    for (int c = 0; c < field.channels(); ++c)
        worst = std::max(worst, relative_residual(field.channel(c), out.image.channel(c), stencil(StencilId::k0)));
    out.report.residual_history = {worst};
    out.report.converged = true;
    return out;
}

RasterImage decode(const EncodedLaplacian& e, const DecodeOptions& options) {
    RasterImage img = reconstruct(e, options).image;
    for (auto& p : img.planes())
        for (double& v : p.values()) v = std::clamp(v, 0.0, 255.0);
    return img;
}

double sparsity_ratio(const EncodedLaplacian& e) {
    const double total = static_cast<double>(e.height) * e.width * e.channels();
    return total > 0.0 ? static_cast<double>(e.nonzero_count()) / total : 0.0;
}

// ---------------------------------------------------------------------------
// Layout (little-endian):
//   0  "LAPC"   4  u16 version   6  u8 stencil   7  u8 mode   8  u8 entropy (0)
//   9  3 reserved zero bytes     12 u32 H   16 u32 W   20 u32 C
//   24 f32 threshold             28 f32 quant
//   32 payload: dense  -> C * H * W f32, channel-planar, row-major
//               sparse -> per channel u32 count, then count x (u32 index, f32 value)

namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n)
            fail(CodecErrorKind::truncated, std::string(what) + " needs " + std::to_string(n) + " bytes at offset " +
                                                std::to_string(pos_) + ", file has " + std::to_string(bytes_.size()));
    }
    std::uint8_t u8() { return bytes_[pos_++]; }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(bytes_[pos_++] << (8 * i));
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const EncodedLaplacian& e) {
    validate(e);
    Writer w;
    for (char ch : {'L', 'A', 'P', 'C'}) w.u8(static_cast<std::uint8_t>(ch));
    w.u16(kCodecVersion);
    w.u8(static_cast<std::uint8_t>(e.stencil));
    w.u8(static_cast<std::uint8_t>(e.mode));
    for (int i = 0; i < 4; ++i) w.u8(0);
    w.u32(static_cast<std::uint32_t>(e.height));
    w.u32(static_cast<std::uint32_t>(e.width));
    w.u32(static_cast<std::uint32_t>(e.channels()));
    w.f32(e.threshold);
    w.f32(e.quant);
    for (const auto& ch : e.payload) {
        if (e.mode == StorageMode::sparse) {
            w.u32(static_cast<std::uint32_t>(ch.values.size()));
            for (std::size_t j = 0; j < ch.values.size(); ++j) {
                w.u32(ch.indices[j]);
                w.f32(ch.values[j]);
            }
        } else {
            for (float v : ch.values) w.f32(v);
        }
    }
    return std::move(w.out);
}

EncodedLaplacian deserialize(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4, "magic");
    std::string magic;
    for (int i = 0; i < 4; ++i) magic.push_back(static_cast<char>(r.u8()));
    if (magic != "LAPC") fail(CodecErrorKind::bad_magic, "expected \"LAPC\"");
    r.need(kCodecHeaderBytes - 4, "header");
    const std::uint16_t version = r.u16();
    if (version != kCodecVersion)
        fail(CodecErrorKind::version, "file version " + std::to_string(version) + ", reader supports " +
                                          std::to_string(kCodecVersion));
    const unsigned stencil_id = r.u8();
    const unsigned mode = r.u8();
    const unsigned entropy = r.u8();
    if (entropy != 0) fail(CodecErrorKind::bad_header, "entropy coding " + std::to_string(entropy) + " is not supported");
    for (int i = 0; i < 3; ++i)
        if (r.u8() != 0) fail(CodecErrorKind::bad_header, "reserved bytes must be zero");
    const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
    const float threshold = r.f32(), quant = r.f32();
    validate_header(h, w, c, stencil_id, mode, threshold, quant);

    EncodedLaplacian e;
    e.height = static_cast<int>(h);
    e.width = static_cast<int>(w);
    e.stencil = static_cast<StencilId>(stencil_id);
    e.mode = static_cast<StorageMode>(mode);
    e.threshold = threshold;
    e.quant = quant;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    for (std::uint32_t ch = 0; ch < c; ++ch) {
        ChannelPayload p;
        if (e.mode == StorageMode::dense) {
            r.need(n * 4, "dense payload");
            p.values.resize(n);
            for (float& v : p.values) v = r.f32();
        } else {
            r.need(4, "sparse entry count");
            const std::uint32_t count = r.u32();
            if (count > n) fail(CodecErrorKind::bad_index, "channel " + std::to_string(ch) + " claims " +
                                                             std::to_string(count) + " entries for " + std::to_string(n) + " pixels");
            r.need(static_cast<std::size_t>(count) * 8, "sparse entries");
            p.indices.resize(count);
            p.values.resize(count);
            for (std::uint32_t j = 0; j < count; ++j) {
                p.indices[j] = r.u32();
                p.values[j] = r.f32();
            }
        }
        e.payload.push_back(std::move(p));
    }
    if (r.remaining() != 0) fail(CodecErrorKind::trailing_data, std::to_string(r.remaining()) + " unread bytes");
    validate(e);
    return e;
}

void save_encoded(const std::filesystem::path& path, const EncodedLaplacian& e) {
    const auto bytes = serialize(e);
    write_bytes_atomically(path, std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

EncodedLaplacian load_encoded(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace lapfield
