#pragma once

namespace bou {

inline constexpr const char kVersion[] = "0.1.0";

}  // namespace bou
