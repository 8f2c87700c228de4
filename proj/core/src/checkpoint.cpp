#include "viral/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "viral/errors.hpp"

namespace viral::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void save_checkpoint(const std::string& path, const std::string& descriptor_json,
                     const ParamVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << "VRLC1\n" << descriptor_json << "\n";
  nlohmann::json seg = nlohmann::json::array();
  for (const auto& s : params.segments)
    seg.push_back({{"name", s.name}, {"offset", s.offset}, {"len", s.len}});
  out << seg.dump() << "\n";
  out.write(reinterpret_cast<const char*>(params.data.data()),
            static_cast<std::streamsize>(params.data.size() * sizeof(double)));
  if (!out) throw IoError("write failure on checkpoint: " + path);
}

std::string load_checkpoint(const std::string& path, ParamVector& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string magic;
  if (!std::getline(in, magic) || magic != "VRLC1")
    throw IoError("bad checkpoint magic in " + path);
  std::string descriptor;
  if (!std::getline(in, descriptor)) throw IoError("missing descriptor in " + path);
  std::string segline;
  if (!std::getline(in, segline)) throw IoError("missing segment map in " + path);

  const nlohmann::json seg = nlohmann::json::parse(segline);
  params.segments.clear();
  size_t total = 0;
  for (const auto& s : seg) {
    ParamVector::Segment out_seg;
    out_seg.name = s["name"].get<std::string>();
    out_seg.offset = s["offset"].get<size_t>();
    out_seg.len = s["len"].get<size_t>();
    if (out_seg.offset != total)
      throw IoError("segment map is not contiguous in " + path);
    total += out_seg.len;
    params.segments.push_back(out_seg);
  }

  params.data.assign(total, 0.0);
  in.read(reinterpret_cast<char*>(params.data.data()),
          static_cast<std::streamsize>(total * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != total * sizeof(double))
    throw IoError("checkpoint parameter array is shorter than its segment map: " +
                  path);
  char extra;
  if (in.read(&extra, 1))
    throw IoError("checkpoint parameter array is longer than its segment map: " +
                  path);
  return descriptor;
}

}  // namespace viral::nn
