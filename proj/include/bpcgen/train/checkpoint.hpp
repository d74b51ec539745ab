// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpcgen/error.hpp"
#include "bpcgen/nn/adam.hpp"
#include "bpcgen/run_config.hpp"

namespace bpcgen {

/// One line of the training metrics log.
struct LogRecord {
  int epoch = 0;        ///< 1-based
  long long step = 0;   ///< encoder+generator updates so far
  double loss_d = 0;    ///< epoch mean of the critic loss (0 without a critic)
  double loss_eg = 0;   ///< epoch mean
  double kl = 0;        ///< epoch mean
  double cd = 0;        ///< held-out probe mean CD at z = mean, after the epoch
  double lambda2 = 0;
  double wall_ms = 0;

  bool operator==(const LogRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const LogRecord& r) {
  j = {{"epoch", r.epoch}, {"step", r.step}, {"loss_d", r.loss_d}, {"loss_eg", r.loss_eg},
       {"kl", r.kl},       {"cd", r.cd},     {"lambda2", r.lambda2}, {"wall_ms", r.wall_ms}};
}
inline void from_json(const nlohmann::json& j, LogRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.step = j.at("step").get<long long>();
  r.loss_d = j.at("loss_d").get<double>();
  r.loss_eg = j.at("loss_eg").get<double>();
  r.kl = j.at("kl").get<double>();
  r.cd = j.at("cd").get<double>();
  r.lambda2 = j.at("lambda2").get<double>();
  r.wall_ms = j.at("wall_ms").get<double>();
}

inline constexpr char kCheckpointMagic[] = "BPCGEN1\n";

/// Single-file archive: magic, u64 little-endian header length, JSON header, then the
/// float32 blobs back to back in header order.
struct Checkpoint {
  RunConfig config;
  int epoch = 0;  ///< completed epochs
  std::vector<LogRecord> history;
  std::map<std::string, long long> counters;  ///< optimizer step counts
  std::vector<std::pair<std::string, nn::Mat<float>>> blobs;

  const nn::Mat<float>& blob(const std::string& name) const {
    for (const auto& [n, m] : blobs)
      if (n == name) return m;
    throw ParseError(0, "checkpoint: missing blob '" + name + "'");
  }
};

/// Appends every parameter of `params` as a blob named prefix + parameter name.
template <class P>
void append_blobs(const P& params, const std::string& prefix, Checkpoint& ck) {
  params.for_each([&](const std::string& name, const nn::Mat<float>& m) { ck.blobs.emplace_back(prefix + name, m); });
}

/// Copies blobs back into `params`, checking shapes.
template <class P>
void restore_blobs(P& params, const std::string& prefix, const Checkpoint& ck) {
  params.for_each([&](const std::string& name, nn::Mat<float>& m) {
    const auto& b = ck.blob(prefix + name);
    if (b.rows() != m.rows() || b.cols() != m.cols())
      throw ParseError(0, "checkpoint: blob '" + prefix + name + "' has the wrong shape");
    m = b;
  });
}

inline void append_adam(const nn::Adam<float>& opt, const std::string& name, Checkpoint& ck) {
  ck.counters["adam." + name] = opt.steps();
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    ck.blobs.emplace_back("adam." + name + ".m1." + std::to_string(i), opt.first_moments()[i]);
    ck.blobs.emplace_back("adam." + name + ".m2." + std::to_string(i), opt.second_moments()[i]);
  }
}

inline void restore_adam(nn::Adam<float>& opt, const std::string& name, const Checkpoint& ck) {
  const auto it = ck.counters.find("adam." + name);
  if (it == ck.counters.end()) throw ParseError(0, "checkpoint: missing optimizer '" + name + "'");
  opt.set_steps(it->second);
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    const auto& m1 = ck.blob("adam." + name + ".m1." + std::to_string(i));
    const auto& m2 = ck.blob("adam." + name + ".m2." + std::to_string(i));
    if (m1.rows() != opt.first_moments()[i].rows() || m1.cols() != opt.first_moments()[i].cols() ||
        m2.rows() != m1.rows() || m2.cols() != m1.cols())
      throw ParseError(0, "checkpoint: optimizer '" + name + "' moment shape mismatch");
    opt.first_moments()[i] = m1;
    opt.second_moments()[i] = m2;
  }
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& [name, m] : ck.blobs) blobs.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const nlohmann::json header = {{"format", "BPCGEN1"}, {"config", ck.config},     {"epoch", ck.epoch},
                                 {"history", ck.history}, {"counters", ck.counters}, {"blobs", blobs}};
  const std::string text = header.dump();
  std::uint64_t len = text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(len >> (8 * i));

  // Write to a sibling temp file first so an interrupted save never clobbers a good checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
    f.write(kCheckpointMagic, 8);
    f.write(reinterpret_cast<const char*>(len_bytes), 8);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, m] : ck.blobs)
      f.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
    if (!f) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ParseError(0, path.string() + ": not a BPCGEN1 checkpoint");
  unsigned char len_bytes[8];
  if (!f.read(reinterpret_cast<char*>(len_bytes), 8)) throw ParseError(0, path.string() + ": truncated header");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
  if (len > (1ull << 31)) throw ParseError(0, path.string() + ": implausible header length");
  std::string text(static_cast<std::size_t>(len), '\0');
  if (!f.read(text.data(), static_cast<std::streamsize>(len))) throw ParseError(0, path.string() + ": truncated header");

  Checkpoint ck;
  try {
    const nlohmann::json h = nlohmann::json::parse(text);
    ck.config = h.at("config").get<RunConfig>();
    ck.epoch = h.at("epoch").get<int>();
    ck.history = h.at("history").get<std::vector<LogRecord>>();
    ck.counters = h.at("counters").get<std::map<std::string, long long>>();
    for (const auto& b : h.at("blobs")) {
      nn::Mat<float> m(b.at("rows").get<Index>(), b.at("cols").get<Index>());
      ck.blobs.emplace_back(b.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, path.string() + ": bad checkpoint header: " + ex.what());
  }
  for (auto& [name, m] : ck.blobs)
    if (!f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float))))
      throw ParseError(0, path.string() + ": truncated blob '" + name + "'");
  if (f.peek() != std::char_traits<char>::eof()) throw ParseError(0, path.string() + ": trailing bytes after blobs");
  return ck;
}

}  // namespace bpcgen
