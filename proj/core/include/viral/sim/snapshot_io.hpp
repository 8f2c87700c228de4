#pragma once

#include <string>
#include <vector>

#include "viral/sim/types.hpp"

namespace viral::sim {

// One snapshot per JSONL line; field order is fixed and floats carry 17
// significant digits so lines round-trip byte-exactly. The rng stream is
// not part of a snapshot.
std::string snapshot_to_json(const DemoSnapshot& snap);
DemoSnapshot snapshot_from_json(const std::string& line);

// demo file: header record {"format":"viral-demo","version":1} then snapshots
void write_demo_file(const std::string& path, const std::vector<DemoSnapshot>& buffer);
std::vector<DemoSnapshot> read_demo_file(const std::string& path);

}  // namespace viral::sim
