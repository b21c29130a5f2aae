#pragma once

namespace ablate {

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace ablate
