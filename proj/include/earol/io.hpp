#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "earol/so3.hpp"

namespace earol {

// Stable shortest-roundtrip formatting so reruns are byte-identical.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    out << header[i] << (i + 1 < header.size() ? "," : "");
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << format_number(row[i]) << (i + 1 < row.size() ? "," : "");
    }
    out << "\n";
  }
}

inline void write_ply(const std::string& path, std::span<const Vec3> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const Vec3& p : points) {
    out << format_number(p.x()) << " " << format_number(p.y()) << " "
        << format_number(p.z()) << "\n";
  }
}

inline void write_pgm(const std::string& path, int width, int height,
                      std::span<const uint8_t> pixels) {
  if (static_cast<size_t>(width) * height != pixels.size()) {
    throw std::invalid_argument("write_pgm: size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

// Flat key=value metrics file, insertion-ordered.
class MetricsWriter {
 public:
  void set(const std::string& key, double value) {
    entries_.emplace_back(key, format_number(value));
  }
  void set(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::vector<std::pair<std::string, std::string>> read_metrics(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read metrics file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return out;
}

}  // namespace earol
