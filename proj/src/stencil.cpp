#include "lapfield/stencil.hpp"

namespace lapfield {

Stencil3x3 stencil(StencilId id) {
    Stencil3x3 s;
    s.id = id;
    switch (id) {
    case StencilId::k0:
        s.c = {0, 1, 0, 1, -4, 1, 0, 1, 0};
        break;
    case StencilId::k1:
        s.c = {0.5, 0.5, 0.5, 0.5, -4, 0.5, 0.5, 0.5, 0.5};
        break;
    case StencilId::k2:
        s.c = {-0.25, 1.25, -0.25, 1.25, -4, 1.25, -0.25, 1.25, -0.25};
        break;
    case StencilId::k3: {
        const double e = 2.0 / 3.0;
        const double k = 1.0 / 3.0;
        s.c = {k, e, k, e, -4, e, k, e, k};
        break;
    }
    }
    return s;
}

std::string_view to_string(StencilId id) {
    switch (id) {
    case StencilId::k0: return "k0";
    case StencilId::k1: return "k1";
    case StencilId::k2: return "k2";
    case StencilId::k3: return "k3";
    }
    return "?";
}

std::optional<StencilId> parse_stencil_id(std::string_view s) {
    if (s == "k0") return StencilId::k0;
    if (s == "k1") return StencilId::k1;
    if (s == "k2") return StencilId::k2;
    if (s == "k3") return StencilId::k3;
    return std::nullopt;
}

}  // namespace lapfield
