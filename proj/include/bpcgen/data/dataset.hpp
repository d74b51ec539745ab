// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpcgen/data/pgm.hpp"
#include "bpcgen/data/phantom.hpp"
#include "bpcgen/error.hpp"
#include "bpcgen/ply.hpp"

namespace bpcgen {

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct SubjectEntry {
  std::string id;
  std::map<std::string, std::string> slice_paths;  ///< plane name -> path relative to the manifest
  std::string cloud_path;
  Split split = Split::train;
};

struct DatasetManifest {
  std::vector<SubjectEntry> subjects;
  Index point_count = 2048;
  std::string normalization = "centroid_maxabs_unit";
  std::uint64_t master_seed = 0;
  /// Directory that relative paths resolve against; not serialized.
  std::filesystem::path root;

  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }

  std::vector<const SubjectEntry*> split(Split s) const {
    std::vector<const SubjectEntry*> out;
    for (const auto& e : subjects)
      if (e.split == s) out.push_back(&e);
    return out;
  }
};

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : m.subjects)
    subjects.push_back({{"id", s.id}, {"slice_paths", s.slice_paths}, {"cloud_path", s.cloud_path},
                        {"split", to_string(s.split)}});
  return {{"subjects", subjects},
          {"point_count", m.point_count},
          {"normalization", m.normalization},
          {"master_seed", m.master_seed}};
}

/// Reads a manifest and checks that ids are unique and every referenced file exists.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.root = path.parent_path();
  try {
    nlohmann::json j;
    f >> j;
    m.point_count = j.at("point_count").get<Index>();
    m.normalization = j.at("normalization").get<std::string>();
    m.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& s : j.at("subjects")) {
      SubjectEntry e;
      e.id = s.at("id").get<std::string>();
      e.slice_paths = s.at("slice_paths").get<std::map<std::string, std::string>>();
      e.cloud_path = s.at("cloud_path").get<std::string>();
      const auto split = s.at("split").get<std::string>();
      if (split != "train" && split != "test") throw ParseError(0, "unknown split '" + split + "'");
      e.split = split == "train" ? Split::train : Split::test;
      m.subjects.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, path.string() + ": " + ex.what());
  }
  std::set<std::string> ids;
  for (const auto& e : m.subjects) {
    if (!ids.insert(e.id).second) throw InvalidInput("manifest: duplicate subject id '" + e.id + "'");
    if (!std::filesystem::exists(m.resolve(e.cloud_path)))
      throw IoError("manifest: missing cloud file '" + e.cloud_path + "'");
    for (const auto& [plane, rel] : e.slice_paths) {
      slice_plane_from_string(plane);
      if (!std::filesystem::exists(m.resolve(rel))) throw IoError("manifest: missing slice file '" + rel + "'");
    }
  }
  return m;
}

struct DatasetOptions {
  Index point_count = 2048;
  bool overwrite = false;
  PhantomSpec phantom{};  ///< per-subject phantoms are jittered copies of this template
  std::vector<SlicePlane> planes{SlicePlane::axial, SlicePlane::coronal, SlicePlane::sagittal};
};

/// Number of training subjects for a split fraction; both splits stay nonempty.
inline int train_count(int n_subjects, double split_fraction) {
  const int n = static_cast<int>(std::lround(n_subjects * split_fraction));
  return std::clamp(n, 1, n_subjects - 1);
}

/// Writes per-subject slices (PGM) and clouds (PLY) plus manifest.json under `out_dir`.
/// Output is a pure function of (options, n_subjects, split_fraction, master_seed).
inline DatasetManifest build_dataset(int n_subjects, double split_fraction, const std::filesystem::path& out_dir,
                                     std::uint64_t master_seed, const DatasetOptions& opt = {}) {
  namespace fs = std::filesystem;
  if (n_subjects < 2) throw InvalidInput("build_dataset: need at least 2 subjects");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw InvalidInput("build_dataset: split_fraction must lie in (0,1)");
  if (opt.planes.empty()) throw InvalidInput("build_dataset: at least one slice plane is required");
  std::error_code ec;
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!opt.overwrite)
      throw IoError("output directory '" + out_dir.string() + "' is not empty (pass overwrite to replace it)");
    for (const auto& entry : fs::directory_iterator(out_dir)) fs::remove_all(entry.path());
  }
  fs::create_directories(out_dir / "slices", ec);
  fs::create_directories(out_dir / "clouds", ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  std::vector<int> order(static_cast<std::size_t>(n_subjects));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(mix_seed(master_seed, 0x5117));
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<Split> splits(static_cast<std::size_t>(n_subjects), Split::test);
  const int n_train = train_count(n_subjects, split_fraction);
  for (int r = 0; r < n_train; ++r) splits[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = Split::train;

  DatasetManifest m;
  m.point_count = opt.point_count;
  m.master_seed = master_seed;
  m.root = out_dir;
  for (int s = 0; s < n_subjects; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "subject_%04d", s);
    SubjectEntry e;
    e.id = id;
    e.split = splits[static_cast<std::size_t>(s)];
    const PhantomSpec spec = opt.phantom.subject(mix_seed(master_seed, static_cast<std::uint64_t>(s)));
    const Volume vol = make_phantom_volume(spec);
    const auto intensity = smooth_intensity(vol);
    for (SlicePlane plane : opt.planes) {
      const SliceImage img =
          extract_slice_from_intensity(vol, intensity, plane, plane_extent(vol.dims, plane) / 2);
      const std::string rel = std::string("slices/") + e.id + "_" + to_string(plane) + ".pgm";
      write_pgm16(img.pixels, out_dir / rel);
      e.slice_paths[to_string(plane)] = rel;
    }
    e.cloud_path = "clouds/" + e.id + ".ply";
    write_ply(volume_to_cloud(vol, opt.point_count, 0), out_dir / e.cloud_path);
    m.subjects.push_back(std::move(e));
  }
  std::ofstream f(out_dir / "manifest.json", std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in '" + out_dir.string() + "'");
  f << manifest_to_json(m).dump(2) << '\n';
  return m;
}

}  // namespace bpcgen
