#pragma once

namespace polygen {

// Build identifier embedded in every emitted JSON document.
inline constexpr const char* kBuildId = "polygen 0.1.0";

}  // namespace polygen
