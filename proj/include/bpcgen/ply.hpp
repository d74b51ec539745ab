// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bpcgen/error.hpp"
#include "bpcgen/point_cloud.hpp"

namespace bpcgen {

namespace detail {

inline std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_int(std::string_view tok, long long& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// The exact ASCII PLY header for a cloud of `n` vertices.
inline std::string ply_header(Index n, bool colored) {
  std::string h = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(n) +
                  "\nproperty float x\nproperty float y\nproperty float z\n";
  if (colored) h += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  h += "end_header\n";
  return h;
}

/// Serializes to ASCII PLY; coordinates with 9 significant digits.
inline std::string to_ply_string(const PointCloud& pc) {
  pc.validate();
  const bool colored = pc.vertex_colors.has_value();
  std::string out = ply_header(pc.count(), colored);
  for (Index i = 0; i < pc.count(); ++i) {
    out += detail::format_g9(pc.points(i, 0));
    out += ' ';
    out += detail::format_g9(pc.points(i, 1));
    out += ' ';
    out += detail::format_g9(pc.points(i, 2));
    if (colored) {
      for (int c = 0; c < 3; ++c) {
        out += ' ';
        out += std::to_string(static_cast<int>((*pc.vertex_colors)(i, c)));
      }
    }
    out += '\n';
  }
  return out;
}

inline void write_ply(const PointCloud& pc, const std::filesystem::path& path) {
  const std::string body = to_ply_string(pc);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

/// Parses the ASCII PLY dialect produced by write_ply (comment lines are skipped).
inline PointCloud parse_ply(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&](const char* expecting) -> std::string_view {
    if (!std::getline(in, line))
      throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + expecting);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  auto header_line = [&](const char* expecting) -> std::string_view {
    for (;;) {
      std::string_view l = next_line(expecting);
      if (l.rfind("comment", 0) != 0 && l.rfind("obj_info", 0) != 0) return l;
    }
  };

  if (header_line("'ply'") != "ply") throw ParseError(lineno, "missing 'ply' magic");
  if (header_line("format line") != "format ascii 1.0")
    throw ParseError(lineno, "only 'format ascii 1.0' is supported");

  long long n = -1;
  {
    auto toks = detail::split_ws(header_line("element vertex"));
    if (toks.size() != 3 || toks[0] != "element" || toks[1] != "vertex" ||
        !detail::parse_int(toks[2], n) || n < 0)
      throw ParseError(lineno, "expected 'element vertex <N>'");
  }
  const char* xyz[] = {"x", "y", "z"};
  for (const char* axis : xyz) {
    auto toks = detail::split_ws(header_line("coordinate property"));
    if (toks.size() != 3 || toks[0] != "property" || (toks[1] != "float" && toks[1] != "double") ||
        toks[2] != axis)
      throw ParseError(lineno, std::string("expected 'property float ") + axis + "'");
  }
  bool colored = false;
  std::string_view l = header_line("'end_header'");
  if (l == "property uchar red") {
    if (header_line("green") != "property uchar green")
      throw ParseError(lineno, "expected 'property uchar green'");
    if (header_line("blue") != "property uchar blue")
      throw ParseError(lineno, "expected 'property uchar blue'");
    colored = true;
    l = header_line("'end_header'");
  }
  if (l != "end_header") throw ParseError(lineno, "expected 'end_header', got '" + std::string(l) + "'");

  PointCloud pc;
  pc.points.resize(n, 3);
  if (colored) pc.vertex_colors = Colors3(n, 3);
  const std::size_t fields = colored ? 6 : 3;
  for (long long i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw ParseError(lineno + 1, "header declares " + std::to_string(n) + " vertices but only " +
                                       std::to_string(i) + " present");
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.size() != fields)
      throw ParseError(lineno, "expected " + std::to_string(fields) + " values, found " +
                                   std::to_string(toks.size()));
    for (int k = 0; k < 3; ++k) {
      double v;
      if (!detail::parse_double(toks[static_cast<std::size_t>(k)], v) || !std::isfinite(v))
        throw ParseError(lineno, "invalid or non-finite coordinate '" +
                                     std::string(toks[static_cast<std::size_t>(k)]) + "'");
      pc.points(i, k) = v;
    }
    if (colored) {
      for (int k = 0; k < 3; ++k) {
        long long c;
        const auto tok = toks[static_cast<std::size_t>(3 + k)];
        if (!detail::parse_int(tok, c) || c < 0 || c > 255)
          throw ParseError(lineno, "invalid color channel '" + std::string(tok) + "'");
        (*pc.vertex_colors)(i, k) = static_cast<std::uint8_t>(c);
      }
    }
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::split_ws(line).empty())
      throw ParseError(lineno, "trailing data after " + std::to_string(n) + " vertices");
  }
  return pc;
}

inline PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  try {
    return parse_ply(f);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.detail());
  }
}

// Region boxes file: JSON array of {name, min:[3], max:[3]}.

inline nlohmann::json region_boxes_to_json(const std::vector<RegionBox>& boxes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : boxes)
    arr.push_back({{"name", b.name},
                   {"min", {b.min_corner[0], b.min_corner[1], b.min_corner[2]}},
                   {"max", {b.max_corner[0], b.max_corner[1], b.max_corner[2]}}});
  return arr;
}

inline std::vector<RegionBox> region_boxes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError(0, "region boxes: expected a JSON array");
  std::vector<RegionBox> boxes;
  for (const auto& e : j) {
    RegionBox b;
    try {
      b.name = e.at("name").get<std::string>();
      const auto mn = e.at("min").get<std::vector<double>>();
      const auto mx = e.at("max").get<std::vector<double>>();
      if (mn.size() != 3 || mx.size() != 3) throw ParseError(0, "region boxes: min/max need 3 values");
      b.min_corner = {mn[0], mn[1], mn[2]};
      b.max_corner = {mx[0], mx[1], mx[2]};
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(0, std::string("region boxes: ") + ex.what());
    }
    b.validate();
    boxes.push_back(std::move(b));
  }
  if (boxes.empty()) throw ParseError(0, "region boxes: empty list");
  return boxes;
}

inline std::vector<RegionBox> read_region_boxes(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, path.string() + ": " + ex.what());
  }
  return region_boxes_from_json(j);
}

inline void write_region_boxes(const std::vector<RegionBox>& boxes, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << region_boxes_to_json(boxes).dump(2) << '\n';
}

}  // namespace bpcgen
