#include "cas/core.hpp"

#include <cstdio>

namespace cas {

std::string tag_str(const Tag& t) {
  if (t.bottom) return "t0";
  return std::to_string(t.z) + "." + std::to_string(t.owner);
}

std::optional<Tag> tag_parse(const std::string& s) {
  if (s == "t0") return Tag::t0();
  auto dot = s.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 >= s.size()) return std::nullopt;
  try {
    std::size_t used = 0;
    long long z = std::stoll(s.substr(0, dot), &used);
    if (used != dot) return std::nullopt;
    int owner = std::stoi(s.substr(dot + 1), &used);
    if (used != s.size() - dot - 1) return std::nullopt;
    if (z < 1 || owner < 1) return std::nullopt;
    return Tag::of(z, owner);
  } catch (...) {
    return std::nullopt;
  }
}

std::string phase_str(Phase p) {
  switch (p) {
    case Phase::Pre: return "pre";
    case Phase::Fin: return "fin";
    case Phase::FINAL: return "FIN";
    case Phase::Qry: return "qry";
  }
  return "?";
}

std::optional<Phase> phase_parse(const std::string& s) {
  if (s == "pre") return Phase::Pre;
  if (s == "fin") return Phase::Fin;
  if (s == "FIN") return Phase::FINAL;
  if (s == "qry") return Phase::Qry;
  return std::nullopt;
}

}  // namespace cas
