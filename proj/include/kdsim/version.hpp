#pragma once

namespace kdsim {
inline constexpr const char* version = "0.1.0";
}
