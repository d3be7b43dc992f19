#pragma once

namespace qmag {

inline constexpr const char* kCodeVersion = "qmag 0.1.0";

}  // namespace qmag
