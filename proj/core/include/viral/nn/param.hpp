#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace viral::nn {

// flat parameter storage with a named segment map; gradients share the layout
struct ParamVector {
  struct Segment {
    std::string name;
    size_t offset = 0;
    size_t len = 0;
  };

  std::vector<double> data;
  std::vector<Segment> segments;

  size_t allocate(const std::string& name, size_t len) {
    const size_t off = data.size();
    segments.push_back({name, off, len});
    data.resize(off + len, 0.0);
    return off;
  }

  size_t size() const { return data.size(); }
  double* at(size_t off) { return data.data() + off; }
  const double* at(size_t off) const { return data.data() + off; }

  ParamVector zeros_like() const {
    ParamVector g;
    g.segments = segments;
    g.data.assign(data.size(), 0.0);
    return g;
  }

  void zero() { data.assign(data.size(), 0.0); }

  bool same_layout(const ParamVector& o) const {
    if (segments.size() != o.segments.size() || data.size() != o.data.size())
      return false;
    for (size_t i = 0; i < segments.size(); ++i) {
      if (segments[i].name != o.segments[i].name ||
          segments[i].offset != o.segments[i].offset ||
          segments[i].len != o.segments[i].len)
        return false;
    }
    return true;
  }
};

}  // namespace viral::nn
