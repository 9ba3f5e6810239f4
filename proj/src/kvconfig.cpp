#include "kvconfig.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "errors.hpp"

namespace reslab {

const char* err_name(Err e) {
  switch (e) {
    case Err::Parse: return "ParseError";
    case Err::InvalidPotential: return "InvalidPotential";
    case Err::OutsideAnalyticityCone: return "OutsideAnalyticityCone";
    case Err::InsideCore: return "InsideCore";
    case Err::FitFailed: return "FitFailed";
    case Err::HypothesesNotVerified: return "HypothesesNotVerified";
    case Err::NoMinimum: return "NoMinimum";
    case Err::TieAtGlobalMin: return "TieAtGlobalMin";
    case Err::OutOfDomain: return "OutOfDomain";
    case Err::TooLarge: return "TooLarge";
    case Err::DegenerateDepths: return "DegenerateDepths";
    case Err::QuadratureFailure: return "QuadratureFailure";
    case Err::GridTooCoarse: return "GridTooCoarse";
    case Err::ConeViolation: return "ConeViolation";
    case Err::TruncationTooTight: return "TruncationTooTight";
    case Err::ClusterUnresolved: return "ClusterUnresolved";
    case Err::SingularShift: return "SingularShift";
    case Err::NoConvergence: return "NoConvergence";
    case Err::ResonanceNotFound: return "ResonanceNotFound";
    case Err::EmptyGrid: return "EmptyGrid";
    case Err::RegionEmpty: return "RegionEmpty";
    case Err::InsufficientPoints: return "InsufficientPoints";
    case Err::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
    case Err::Io: return "IoError";
    case Err::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& raw) {
  std::string s = trim(raw);
  if (s == "inf" || s == "+inf" || s == "infinity") return INFINITY;
  if (s == "-inf") return -INFINITY;
  if (s.empty()) throw Error(Err::Parse, "empty number");
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw Error(Err::Parse, "not a number: '" + s + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream in(s);
  while (std::getline(in, tok, ',')) {
    if (trim(tok).empty()) continue;
    out.push_back(parse_double(tok));
  }
  return out;
}

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Err::Parse, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error(Err::Parse, "line " + std::to_string(lineno) + ": empty key");
    c.kv_[key] = val;
  }
  return c;
}

std::string KvConfig::str(const std::string& key, const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KvConfig::num(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const Error&) {
    throw Error(Err::Parse, "key '" + key + "': not a number");
  }
}

double KvConfig::num(const std::string& key) const {
  if (!has(key)) throw Error(Err::Parse, "missing key '" + key + "'");
  return num(key, 0.0);
}

long KvConfig::integer(const std::string& key, long fallback) const {
  double v = num(key, static_cast<double>(fallback));
  if (v != std::floor(v)) throw Error(Err::Parse, "key '" + key + "': not an integer");
  return static_cast<long>(v);
}

bool KvConfig::flag(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(Err::Parse, "key '" + key + "': not a boolean");
}

std::vector<double> KvConfig::list(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return {};
  try {
    return parse_list(it->second);
  } catch (const Error&) {
    throw Error(Err::Parse, "key '" + key + "': bad list");
  }
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) out += k + "=" + v + "\n";
  return out;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string KvConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

}  // namespace reslab
