// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bpcgen/error.hpp"
#include "bpcgen/metrics/emd.hpp"
#include "bpcgen/model/critic.hpp"
#include "bpcgen/model/encoder.hpp"
#include "bpcgen/model/tree_generator.hpp"

namespace bpcgen {

struct TrainConfig {
  double lambda1 = 0.1;
  double lambda_gp = 10.0;
  double lambda2_start = 0.1;
  double lambda2_end = 1.0;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int epochs = 2000;
  int batch_size = 16;
  int critic_steps_per_gen_step = 5;
  std::uint64_t seed = 0;
  /// false trains encoder+generator on KL + Chamfer only (the no-discriminator ablation).
  bool adversarial = true;
  int checkpoint_every = 100;

  void validate() const {
    if (!(lambda1 > 0 && lambda_gp > 0 && lambda2_start > 0 && lambda2_end > 0 && learning_rate > 0))
      throw ConfigError("train: lambdas and learning_rate must be positive");
    if (lambda2_start > lambda2_end) throw ConfigError("train: lambda2_start must not exceed lambda2_end");
    if (epochs < 1 || batch_size < 1 || critic_steps_per_gen_step < 1 || checkpoint_every < 1)
      throw ConfigError("train: epochs, batch_size, critic steps and checkpoint_every must be positive");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
      throw ConfigError("train: Adam betas must lie in [0,1)");
  }
};

/// Linear ramp of the Chamfer weight from lambda2_start (epoch 0) to lambda2_end (last epoch).
inline double lambda2_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) throw InvalidInput("lambda2_at: epoch outside [0, epochs)");
  if (cfg.epochs == 1) return cfg.lambda2_start;
  if (epoch == cfg.epochs - 1) return cfg.lambda2_end;
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return std::min(cfg.lambda2_start + (cfg.lambda2_end - cfg.lambda2_start) * t, cfg.lambda2_end);
}

struct EvalConfig {
  Index exact_emd_limit = kDefaultExactEmdLimit;
  double emd_epsilon = kDefaultEmdEpsilon;
};

/// Everything a run needs; serialized into checkpoints.
struct RunConfig {
  std::string manifest;  ///< path to manifest.json
  std::string regions;   ///< region boxes JSON; empty selects the built-in boxes
  std::string out_dir = "run";
  SlicePlane slice_plane = SlicePlane::axial;
  GeneratorConfig generator;
  EncoderConfig encoder;
  CriticConfig critic;
  TrainConfig train;
  EvalConfig eval;

  void validate() const {
    generator.validate();
    encoder.validate();
    critic.validate();
    train.validate();
    if (eval.exact_emd_limit < 1 || !(eval.emd_epsilon > 0)) throw ConfigError("eval: invalid EMD settings");
  }

  /// The small configuration used for desk-scale runs: 256-point clouds, a 48x56 encoder
  /// input, reduced critic, one critic step per generator step.
  static RunConfig toy() {
    RunConfig c;
    c.generator.degrees = {2, 2, 4, 16};
    c.generator.widths = {96, 64, 64, 32, 3};
    c.generator.point_count = 256;
    c.encoder.input_height = 48;
    c.encoder.input_width = 56;
    c.encoder.channels = {8, 16, 32, 64};
    c.critic.point_widths = {3, 32, 64, 128, 256};
    c.critic.head_widths = {256, 64, 32, 1};
    c.train.epochs = 300;
    c.train.batch_size = 16;
    c.train.critic_steps_per_gen_step = 1;
    return c;
  }
};

// JSON conversions. Missing keys keep their defaults so configs may be partial.

inline void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"degrees", c.degrees},
       {"widths", c.widths},
       {"support_count", c.support_count},
       {"leaky_slope", c.leaky_slope},
       {"point_count", c.point_count},
       {"branch_mode", c.branch_mode == BranchMode::learned ? "learned" : "replicate"}};
}
inline void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c.degrees = j.value("degrees", c.degrees);
  c.widths = j.value("widths", c.widths);
  c.support_count = j.value("support_count", c.support_count);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.point_count = j.value("point_count", c.point_count);
  const std::string mode = j.value("branch_mode", std::string("learned"));
  if (mode != "learned" && mode != "replicate") throw ConfigError("generator: unknown branch_mode '" + mode + "'");
  c.branch_mode = mode == "learned" ? BranchMode::learned : BranchMode::replicate;
}

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"input_height", c.input_height},
       {"input_width", c.input_width},
       {"channels", c.channels},
       {"latent_dim", c.latent_dim},
       {"leaky_slope", c.leaky_slope}};
}
inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.input_height = j.value("input_height", c.input_height);
  c.input_width = j.value("input_width", c.input_width);
  c.channels = j.value("channels", c.channels);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
}

inline void to_json(nlohmann::json& j, const CriticConfig& c) {
  j = {{"point_widths", c.point_widths}, {"head_widths", c.head_widths}, {"leaky_slope", c.leaky_slope}};
}
inline void from_json(const nlohmann::json& j, CriticConfig& c) {
  c.point_widths = j.value("point_widths", c.point_widths);
  c.head_widths = j.value("head_widths", c.head_widths);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lambda1", c.lambda1},
       {"lambda_gp", c.lambda_gp},
       {"lambda2_start", c.lambda2_start},
       {"lambda2_end", c.lambda2_end},
       {"learning_rate", c.learning_rate},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"critic_steps_per_gen_step", c.critic_steps_per_gen_step},
       {"seed", c.seed},
       {"adversarial", c.adversarial},
       {"checkpoint_every", c.checkpoint_every}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lambda1 = j.value("lambda1", c.lambda1);
  c.lambda_gp = j.value("lambda_gp", c.lambda_gp);
  c.lambda2_start = j.value("lambda2_start", c.lambda2_start);
  c.lambda2_end = j.value("lambda2_end", c.lambda2_end);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.critic_steps_per_gen_step = j.value("critic_steps_per_gen_step", c.critic_steps_per_gen_step);
  c.seed = j.value("seed", c.seed);
  c.adversarial = j.value("adversarial", c.adversarial);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

inline void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"exact_emd_limit", c.exact_emd_limit}, {"emd_epsilon", c.emd_epsilon}};
}
inline void from_json(const nlohmann::json& j, EvalConfig& c) {
  c.exact_emd_limit = j.value("exact_emd_limit", c.exact_emd_limit);
  c.emd_epsilon = j.value("emd_epsilon", c.emd_epsilon);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"manifest", c.manifest},   {"regions", c.regions},     {"out_dir", c.out_dir},
       {"slice_plane", to_string(c.slice_plane)},               {"generator", c.generator},
       {"encoder", c.encoder},     {"critic", c.critic},       {"train", c.train},
       {"eval", c.eval}};
}
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  c.manifest = j.value("manifest", c.manifest);
  c.regions = j.value("regions", c.regions);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.slice_plane = slice_plane_from_string(j.value("slice_plane", std::string(to_string(c.slice_plane))));
  if (j.contains("generator")) j.at("generator").get_to(c.generator);
  if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
  if (j.contains("critic")) j.at("critic").get_to(c.critic);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("eval")) j.at("eval").get_to(c.eval);
}

/// Loads a run config; relative manifest/regions/out_dir paths resolve against the file's directory.
inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  RunConfig c;
  try {
    nlohmann::json j;
    f >> j;
    c = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, path.string() + ": " + ex.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.manifest);
  resolve(c.regions);
  resolve(c.out_dir);
  c.validate();
  return c;
}

inline void save_run_config(const RunConfig& c, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << nlohmann::json(c).dump(2) << '\n';
}

}  // namespace bpcgen
