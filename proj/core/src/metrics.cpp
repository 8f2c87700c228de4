#include "viral/runtime/metrics.hpp"

#include "viral/errors.hpp"

namespace viral::runtime {

MetricsWriter::MetricsWriter(const std::string& path, const std::string& run_id,
                             uint64_t config_hash)
    : path_(path), run_id_(run_id), config_hash_(config_hash), out_(path) {
  if (!out_) throw IoError("cannot open metrics file: " + path);
}

void MetricsWriter::log(nlohmann::json record) {
  if (!record.contains("iter")) throw IoError("metrics record missing 'iter'");
  const int64_t iter = record["iter"].get<int64_t>();
  if (iter <= last_iter_)
    throw IoError("metrics iter must be strictly increasing (got " +
                  std::to_string(iter) + " after " + std::to_string(last_iter_) + ")");
  record["run_id"] = run_id_;
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config_hash_));
  record["config_hash"] = hash_hex;
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) {
    // mark the file as truncated before giving up
    out_.clear();
    out_ << "{\"partial\":true}\n";
    out_.flush();
    throw IoError("metrics write failure on " + path_);
  }
  last_iter_ = iter;
}

}  // namespace viral::runtime
