#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace lapfield {

enum class StencilId : int { k0 = 0, k1 = 1, k2 = 2, k3 = 3 };

/// 3x3 discrete Laplacian. Coefficients are stored row-major; entry (1,1)
/// is the center.
struct Stencil3x3 {
    StencilId id = StencilId::k0;
    std::array<double, 9> c{};

    double at(int dr, int dc) const noexcept { return c[(dr + 1) * 3 + (dc + 1)]; }
    double center() const noexcept { return c[4]; }
    bool is_five_point() const noexcept { return c[0] == 0.0 && c[2] == 0.0 && c[6] == 0.0 && c[8] == 0.0; }
};

Stencil3x3 stencil(StencilId id);

inline constexpr StencilId kDefaultStencil = StencilId::k0;

std::string_view to_string(StencilId id);
std::optional<StencilId> parse_stencil_id(std::string_view s);

}  // namespace lapfield
