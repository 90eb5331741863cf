#pragma once

namespace clonesim {

inline constexpr const char* kEngineVersion = "1.0.0";

}  // namespace clonesim
