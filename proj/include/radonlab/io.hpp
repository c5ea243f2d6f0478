#pragma once
// Serialization helpers: JSON round-trips, atomic file writes, run-length
// masks, CSV emission, and a stable config hash.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "measure.hpp"

namespace radonlab {

using json = nlohmann::json;

inline void to_json(json& j, const DiscreteMeasure& m) {
  json atoms = json::array();
  for (const auto& a : m.atoms) {
    json c = json::array({a.c[0]});
    if (m.n == 2) c.push_back(a.c[1]);
    atoms.push_back(json::array({c, a.w}));
  }
  j = json{{"dimension", m.n},
           {"unit_cells", m.u},
           {"mean_zero", m.mean_zero},
           {"atoms", atoms}};
}

inline void from_json(const json& j, DiscreteMeasure& m) {
  m.n = j.at("dimension").get<int>();
  m.u = j.at("unit_cells").get<int>();
  m.mean_zero = j.at("mean_zero").get<bool>();
  m.atoms.clear();
  for (const auto& e : j.at("atoms")) {
    MeasureAtom a;
    const auto& c = e.at(0);
    a.c[0] = c.at(0).get<int64_t>();
    a.c[1] = c.size() > 1 ? c.at(1).get<int64_t>() : 0;
    a.w = e.at(1).get<double>();
    m.atoms.push_back(a);
  }
}

// Write via a temp file in the same directory, then rename into place, so a
// reader never observes a half-written file.
inline void atomic_write(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
    out.write(contents.data(), std::streamsize(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

inline void write_json(const std::string& path, const json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_json: cannot open " + path);
  json j;
  in >> j;
  return j;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Run-length encoding of a sorted list of flat cell indices as
// [start, length] pairs; the canonical on-disk form of a cell mask.
inline json rle_encode(const std::vector<int64_t>& sorted_cells) {
  json runs = json::array();
  size_t i = 0;
  while (i < sorted_cells.size()) {
    int64_t start = sorted_cells[i];
    int64_t len = 1;
    while (i + size_t(len) < sorted_cells.size() &&
           sorted_cells[i + size_t(len)] == start + len)
      ++len;
    runs.push_back(json::array({start, len}));
    i += size_t(len);
  }
  return runs;
}

inline std::vector<int64_t> rle_decode(const json& runs) {
  std::vector<int64_t> cells;
  for (const auto& r : runs) {
    int64_t start = r.at(0).get<int64_t>();
    int64_t len = r.at(1).get<int64_t>();
    for (int64_t k = 0; k < len; ++k) cells.push_back(start + k);
  }
  return cells;
}

inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// CSV with LF line endings and %.17g numeric cells.
struct CsvWriter {
  std::ostringstream ss;
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (size_t i = 0; i < header.size(); ++i)
      ss << (i ? "," : "") << header[i];
    ss << "\n";
  }
  void row(const std::vector<double>& vals) {
    for (size_t i = 0; i < vals.size(); ++i)
      ss << (i ? "," : "") << format_g17(vals[i]);
    ss << "\n";
  }
  void save(const std::string& path) const { atomic_write(path, ss.str()); }
};

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace radonlab
