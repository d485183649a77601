#pragma once

// Coverage checks over an explicit list of [start, end) windows.

#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct CoverageReport {
  bool ok = true;
  std::string why;
};

inline CoverageReport check_coverage(const std::vector<std::pair<std::size_t, std::size_t>>& w,
                                     std::size_t total, std::size_t len, std::size_t overlap) {
  CoverageReport r;
  auto fail = [&](std::string m) {
    if (r.ok) r.why = std::move(m);
    r.ok = false;
  };
  if (w.empty()) {
    fail("no windows");
    return r;
  }
  std::vector<int> hits(total, 0);
  for (auto [s, e] : w) {
    if (s >= e || e > total) fail("bad window");
    for (std::size_t f = s; f < e && f < total; ++f) ++hits[f];
    if (e - s != std::min(len, total)) fail("window length");
  }
  for (std::size_t f = 0; f < total; ++f)
    if (hits[f] == 0) fail("frame " + std::to_string(f) + " uncovered");
  if (w.front().first != 0) fail("first window does not start at 0");
  if (w.back().second != total) fail("last window not right-aligned");
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i].first <= w[i - 1].first) fail("windows not increasing");
    const std::size_t shared = w[i - 1].second > w[i].first ? w[i - 1].second - w[i].first : 0;
    const bool last = i + 1 == w.size();
    if (!last && shared != overlap) fail("interior overlap " + std::to_string(shared));
    if (last && shared < overlap) fail("last overlap " + std::to_string(shared) + " below minimum");
  }
  return r;
}

}  // namespace oracle
