#pragma once

#define ASSOCNET_VERSION "0.1.0"

namespace assocnet {
inline constexpr const char* version() { return ASSOCNET_VERSION; }
}
