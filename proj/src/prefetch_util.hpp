// Small helpers shared by the prefetch engines.

#pragma once

#include <deque>
#include <unordered_set>
#include <vector>

#include "nvrsim/memory.hpp"

namespace nvrsim {

/// Remembers the last `capacity` lines requested so engines do not re-request them every step.
class RecentFilter {
 public:
  explicit RecentFilter(std::size_t capacity) : capacity_(capacity) {}
  /// True if `line` was requested recently; otherwise records it.
  bool seen(Addr line) {
    if (set_.count(line)) return true;
    set_.insert(line);
    order_.push_back(line);
    if (order_.size() > capacity_) {
      set_.erase(order_.front());
      order_.pop_front();
    }
    return false;
  }
  void forget(Addr line) { set_.erase(line); }

 private:
  std::size_t capacity_;
  std::unordered_set<Addr> set_;
  std::deque<Addr> order_;
};

/// Order-preserving duplicate removal.
inline void dedup_lines(std::vector<Addr>& v) {
  std::unordered_set<Addr> s;
  std::size_t w = 0;
  for (Addr a : v)
    if (s.insert(a).second) v[w++] = a;
  v.resize(w);
}

/// Byte addresses to distinct line numbers, order preserved.
inline void to_lines(std::vector<Addr>& v, std::uint32_t line_bytes) {
  for (auto& a : v) a /= line_bytes;
  dedup_lines(v);
}

inline MemRequest line_request(Addr line, std::uint32_t line_bytes, Cycle t, Origin o, FillTarget target) {
  MemRequest q;
  q.address = line * line_bytes;
  q.size_bytes = line_bytes;
  q.kind = ReqKind::Prefetch;
  q.origin = o;
  q.issue_cycle = t;
  q.target = target;
  return q;
}

}  // namespace nvrsim
