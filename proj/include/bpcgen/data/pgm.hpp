// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "bpcgen/error.hpp"
#include "bpcgen/model/encoder.hpp"

namespace bpcgen {

/// Binary 16-bit PGM (P5, maxval 65535, big-endian), value = round(v * 65535).
inline void write_pgm16(const Eigen::MatrixXd& pixels, const std::filesystem::path& path) {
  const auto h = pixels.rows(), w = pixels.cols();
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  out.reserve(out.size() + static_cast<std::size_t>(h * w * 2));
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const double v = pixels(y, x);
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("write_pgm16: pixel outside [0,1]");
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      out.push_back(static_cast<char>(q >> 8));
      out.push_back(static_cast<char>(q & 0xff));
    }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

/// Raw 16-bit samples of a P5 file, row-major.
struct Pgm16 {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<std::uint16_t> samples;
};

inline Pgm16 read_pgm16_raw(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  auto token = [&]() {
    std::string t;
    int c;
    while ((c = f.get()) != EOF) {
      if (c == '#') {
        while ((c = f.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(static_cast<char>(c));
    }
    return t;
  };
  Pgm16 img;
  if (token() != "P5") throw ParseError(0, path.string() + ": not a binary PGM (P5)");
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    img.maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError(0, path.string() + ": malformed PGM header");
  }
  if (img.width <= 0 || img.height <= 0 || img.maxval < 256 || img.maxval > 65535)
    throw ParseError(0, path.string() + ": expected a 16-bit PGM");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  std::vector<unsigned char> raw(n * 2);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size()) throw ParseError(0, path.string() + ": truncated pixel data");
  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    if (img.samples[i] > img.maxval) throw ParseError(0, path.string() + ": sample exceeds maxval");
  }
  return img;
}

inline SliceImage read_pgm16(const std::filesystem::path& path, SlicePlane plane = SlicePlane::axial) {
  const Pgm16 raw = read_pgm16_raw(path);
  SliceImage img;
  img.plane = plane;
  img.pixels.resize(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      img.pixels(y, x) = raw.samples[static_cast<std::size_t>(y) * raw.width + x] / static_cast<double>(raw.maxval);
  return img;
}

}  // namespace bpcgen
