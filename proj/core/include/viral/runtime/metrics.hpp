#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

namespace viral::runtime {

// append-only JSONL metrics stream; one flushed record per iteration with a
// strictly increasing iter counter, run id, and config hash stamped in
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::string& run_id,
                uint64_t config_hash);

  void log(nlohmann::json record);

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::string run_id_;
  uint64_t config_hash_;
  std::ofstream out_;
  int64_t last_iter_ = -1;
};

}  // namespace viral::runtime
