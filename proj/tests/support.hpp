// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bpcgen/bpcgen.hpp"

namespace bpcgen::test {

inline Points3 random_points(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Points3 p(n, 3);
  for (Index i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) p(i, k) = u(rng);
  return p;
}

template <class T>
nn::Mat<T> random_mat(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  nn::Mat<T> m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(g(rng));
  return m;
}

/// Fresh empty directory under the build tree.
inline std::filesystem::path temp_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(BPCGEN_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Runs the CLI with `args`, capturing stdout+stderr into `output`; returns the exit code.
inline int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::filesystem::path log = std::filesystem::path(BPCGEN_TEST_TMP) / "cli_output.txt";
  std::filesystem::create_directories(log.parent_path());
  const std::string cmd = std::string("\"") + BPCGEN_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Recursively compares two directory trees byte for byte.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
  namespace fs = std::filesystem;
  std::vector<std::string> la, lb;
  for (const auto& e : fs::recursive_directory_iterator(a)) la.push_back(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b)) lb.push_back(fs::relative(e.path(), b).string());
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  if (la != lb) return false;
  for (const auto& rel : la)
    if (fs::is_regular_file(a / rel) && slurp(a / rel) != slurp(b / rel)) return false;
  return true;
}

/// A tiny but complete run configuration for fast end-to-end tests.
inline RunConfig tiny_config() {
  RunConfig c;
  c.generator.degrees = {2, 4};
  c.generator.widths = {96, 8, 3};
  c.generator.support_count = 2;
  c.generator.point_count = 8;
  c.encoder.input_height = 16;
  c.encoder.input_width = 16;
  c.encoder.channels = {2, 4};
  c.critic.point_widths = {3, 8, 8};
  c.critic.head_widths = {8, 4, 1};
  c.train.epochs = 4;
  c.train.batch_size = 2;
  c.train.critic_steps_per_gen_step = 2;
  c.train.seed = 11;
  c.train.checkpoint_every = 2;
  return c;
}

}  // namespace bpcgen::test
