#pragma once

#include <string>

#include "viral/nn/param.hpp"

namespace viral::nn {

// checkpoint layout: "VRLC1\n", one JSON descriptor line, then the raw
// little-endian 64-bit float parameter array
void save_checkpoint(const std::string& path, const std::string& descriptor_json,
                     const ParamVector& params);

// returns the descriptor line; validates the segment map length against the
// stored array
std::string load_checkpoint(const std::string& path, ParamVector& params);

}  // namespace viral::nn
