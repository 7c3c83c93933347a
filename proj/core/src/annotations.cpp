#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "deformreg/error.hpp"
#include "deformreg/io.hpp"

namespace deformreg::io {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* what) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) {
    throw FormatError("landmarks line " + std::to_string(line) + ": bad " + what + " '" + s + "'", line);
  }
  return v;
}

}  // namespace

// FormatError offsets here are 1-based line numbers.
LandmarkSet parse_landmarks(const std::string& text, std::optional<ImageBounds> bounds) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::set<int> seen;
  LandmarkSet set;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!header_seen) {
      auto cols = split_commas(line);
      if (cols.size() != 3 || cols[0] != "index" || cols[1] != "x" || cols[2] != "y") {
        throw FormatError("landmarks line " + std::to_string(lineno) + ": expected header 'index,x,y'", lineno);
      }
      header_seen = true;
      continue;
    }
    auto cols = split_commas(line);
    if (cols.size() != 3) {
      throw FormatError("landmarks line " + std::to_string(lineno) + ": expected 3 columns, got " +
                            std::to_string(cols.size()),
                        lineno);
    }
    Landmark lm;
    lm.index = parse_number<int>(cols[0], lineno, "index");
    lm.x = parse_number<double>(cols[1], lineno, "x");
    lm.y = parse_number<double>(cols[2], lineno, "y");
    if (!std::isfinite(lm.x) || !std::isfinite(lm.y)) {
      throw FormatError("landmarks line " + std::to_string(lineno) + ": non-finite coordinate", lineno);
    }
    if (!seen.insert(lm.index).second) {
      throw FormatError("landmarks line " + std::to_string(lineno) + ": duplicate index " + std::to_string(lm.index),
                        lineno);
    }
    if (bounds && (lm.x < 0.0 || lm.y < 0.0 || lm.x > bounds->width - 1 || lm.y > bounds->height - 1)) {
      std::ostringstream os;
      os << "landmarks line " << lineno << ": point " << lm.index << " (" << lm.x << "," << lm.y
         << ") outside image " << bounds->width << "x" << bounds->height;
      throw FormatError(os.str(), lineno);
    }
    set.points.push_back(lm);
  }
  if (!header_seen) throw FormatError("landmarks: empty file, expected header 'index,x,y'", 0);
  return set;
}

LandmarkSet read_landmarks(const std::string& path, std::optional<ImageBounds> bounds) {
  const auto bytes = read_file(path);
  try {
    return parse_landmarks(std::string(bytes.begin(), bytes.end()), bounds);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.offset());
  }
}

void write_landmarks(const std::string& path, const LandmarkSet& points) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << "index,x,y\n" << std::setprecision(17);
  for (const auto& p : points.points) f << p.index << ',' << p.x << ',' << p.y << '\n';
  if (!f) throw Error("write to '" + path + "' failed");
}

}  // namespace deformreg::io
