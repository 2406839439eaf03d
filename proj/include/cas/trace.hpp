#ifndef CAS_TRACE_HPP_
#define CAS_TRACE_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cas {

// One event per line, tab-separated: step, cycle, node, kind, payload.
// Payloads are space-separated key=value pairs.
struct TraceEvent {
  std::int64_t step = 0;
  std::int64_t cycle = 0;
  int node = 0;  // 0 = system
  std::string kind;
  std::string payload;
};

struct Trace {
  std::vector<TraceEvent> events;
  bool incomplete = false;  // step budget exhausted with scripted work pending

  void write(std::ostream& os) const;
  std::string to_string() const;
  static Trace read(std::istream& is);
};

// "k1=v1 k2=v2 ..." -> lookup helper; returns empty string when absent.
std::string payload_get(const std::string& payload, const std::string& key);

}  // namespace cas

#endif  // CAS_TRACE_HPP_
