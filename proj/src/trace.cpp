#include "cas/trace.hpp"

#include <sstream>

namespace cas {

void Trace::write(std::ostream& os) const {
  for (const auto& e : events)
    os << e.step << '\t' << e.cycle << '\t' << e.node << '\t' << e.kind << '\t' << e.payload
       << '\n';
  if (incomplete) os << "# incomplete: step budget exhausted\n";
}

std::string Trace::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

Trace Trace::read(std::istream& is) {
  Trace t;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("incomplete") != std::string::npos) t.incomplete = true;
      continue;
    }
    TraceEvent e;
    std::istringstream ls(line);
    std::string field;
    if (!std::getline(ls, field, '\t')) continue;
    e.step = std::stoll(field);
    if (!std::getline(ls, field, '\t')) continue;
    e.cycle = std::stoll(field);
    if (!std::getline(ls, field, '\t')) continue;
    e.node = std::stoi(field);
    if (!std::getline(ls, e.kind, '\t')) continue;
    std::getline(ls, e.payload, '\t');
    t.events.push_back(std::move(e));
  }
  return t;
}

std::string payload_get(const std::string& payload, const std::string& key) {
  const std::string needle = key + "=";
  std::size_t pos = 0;
  while (pos < payload.size()) {
    std::size_t end = payload.find(' ', pos);
    if (end == std::string::npos) end = payload.size();
    if (payload.compare(pos, needle.size(), needle) == 0)
      return payload.substr(pos + needle.size(), end - pos - needle.size());
    pos = end + 1;
  }
  return "";
}

}  // namespace cas
