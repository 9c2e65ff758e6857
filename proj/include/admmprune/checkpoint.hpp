#pragma once

#include <string>

#include "admmprune/network.hpp"

namespace admmprune {

/// Container: 8 bytes "ADMMCNN1", a little-endian u32 header length, a
/// line-oriented UTF-8 header (layer list plus the payload tensor shapes),
/// then all parameters as little-endian 32-bit floats, weight then bias per
/// parameterized layer in spec order. Round trips bit-exactly.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace admmprune
