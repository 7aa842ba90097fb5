#pragma once

namespace stochmech {

inline constexpr const char* kVersion = "1.0.0";

} // namespace stochmech
