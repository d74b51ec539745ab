// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: dataset synthesis, training, evaluation, inference and metrics.
// Exit codes: 0 success, 1 usage or configuration error, 2 data, IO or numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpcgen/bpcgen.hpp"

namespace fs = std::filesystem;
using namespace bpcgen;

namespace {

/// --seed wins, then BPCGEN_SEED, then `fallback`.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("BPCGEN_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("BPCGEN_SEED is not an unsigned integer: '") + env + "'");
  }
  return fallback;
}

std::vector<RegionBox> boxes_for(const std::string& path) {
  return path.empty() ? default_region_boxes() : read_region_boxes(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f || !(f << text)) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bpcgen: brain point cloud generation from single MRI slices"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --seed appear after the subcommand name
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "random seed (falls back to BPCGEN_SEED)");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "write a synthetic phantom dataset");
  int subjects = 128;
  double split = 0.75;
  Index points = 2048;
  std::string synth_out;
  bool overwrite = false;
  synth->add_option("--subjects", subjects, "number of subjects")->check(CLI::Range(2, 100000));
  synth->add_option("--split", split, "fraction of subjects in the training split")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--points", points, "points per target cloud")->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--overwrite", overwrite, "replace an existing nonempty output directory");

  // config
  auto* config_cmd = app.add_subcommand("config", "print a run configuration template");
  bool toy = false;
  std::string config_out, config_manifest;
  config_cmd->add_flag("--toy", toy, "the small desk-scale configuration");
  config_cmd->add_option("--manifest", config_manifest, "manifest path to record in the template");
  config_cmd->add_option("--out", config_out, "write to a file instead of stdout");

  // train
  auto* train = app.add_subcommand("train", "train encoder, generator and critic");
  std::string config_path, train_out, resume_path;
  std::optional<int> epochs;
  bool no_critic = false;
  train->add_option("--config", config_path, "run configuration JSON")->required();
  train->add_option("--out", train_out, "output directory (overrides the config)");
  train->add_option("--resume", resume_path, "continue from a checkpoint");
  train->add_option("--epochs", epochs, "stop after this many completed epochs")->check(CLI::PositiveNumber);
  train->add_flag("--no-critic", no_critic, "train without the discriminator (Chamfer + KL only)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on the test split");
  std::vector<std::string> checkpoints, names;
  std::string eval_manifest, eval_regions, eval_out, eval_config;
  eval->add_option("--checkpoint", checkpoints, "checkpoint(s); the first one's outputs are saved")
      ->required()
      ;
  eval->add_option("--name", names, "model name per checkpoint");
  eval->add_option("--config", eval_config, "run configuration supplying manifest and regions")
      ;
  eval->add_option("--manifest", eval_manifest, "dataset manifest (overrides the config)");
  eval->add_option("--regions", eval_regions, "region boxes JSON (overrides the config)");
  eval->add_option("--out", eval_out, "output directory")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "reconstruct one slice into a PLY");
  std::string infer_ckpt, infer_slice, infer_out, plane_name = "axial";
  bool sample = false;
  infer->add_option("--checkpoint", infer_ckpt, "checkpoint")->required();
  infer->add_option("--slice", infer_slice, "16-bit PGM slice")->required();
  infer->add_option("--plane", plane_name, "slice plane")->check(CLI::IsMember({"axial", "coronal", "sagittal"}));
  infer->add_option("--out", infer_out, "output PLY")->required();
  infer->add_flag("--sample", sample, "draw z from the posterior instead of using its mean");

  // export-ply
  auto* exp = app.add_subcommand("export-ply", "color a generated cloud by its PC-to-PC error");
  std::string exp_pred, exp_target, exp_out;
  exp->add_option("pred", exp_pred, "generated cloud")->required();
  exp->add_option("target", exp_target, "reference cloud")->required();
  exp->add_option("--out", exp_out, "output PLY")->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "CD, EMD and PC-to-PC error between two PLY files");
  std::string met_a, met_b;
  metrics->add_option("a", met_a, "generated cloud")->required();
  metrics->add_option("b", met_b, "reference cloud")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return 1;
  }

  try {
    if (*synth) {
      DatasetOptions opt;
      opt.point_count = points;
      opt.overwrite = overwrite;
      const auto m = build_dataset(subjects, split, synth_out, resolve_seed(seed, 0), opt);
      std::cout << "wrote " << m.subjects.size() << " subjects to " << synth_out << "\n";
    } else if (*config_cmd) {
      RunConfig c = toy ? RunConfig::toy() : RunConfig{};
      c.manifest = config_manifest;
      c.train.seed = resolve_seed(seed, 0);
      const std::string text = nlohmann::json(c).dump(2) + "\n";
      if (config_out.empty()) std::cout << text;
      else write_text(config_out, text);
    } else if (*train) {
      RunConfig c = load_run_config(config_path);
      if (!train_out.empty()) c.out_dir = train_out;
      c.train.seed = resolve_seed(seed, c.train.seed);
      if (no_critic) c.train.adversarial = false;
      Trainer t = resume_path.empty() ? Trainer(c) : Trainer::resume(load_checkpoint(resume_path));
      if (c.manifest.empty()) throw ConfigError("train: the config names no dataset manifest");
      t.load_data(load_manifest(c.manifest));
      t.train(c.out_dir, epochs ? *epochs : -1, [](const LogRecord& r) {
        std::cout << nlohmann::json(r).dump() << "\n" << std::flush;
      });
    } else if (*eval) {
      if (!names.empty() && names.size() != checkpoints.size())
        throw ConfigError("eval: give one --name per --checkpoint");
      std::string manifest = eval_manifest, regions = eval_regions;
      if (!eval_config.empty()) {
        const RunConfig c = load_run_config(eval_config);
        if (manifest.empty()) manifest = c.manifest;
        if (regions.empty()) regions = c.regions;
      }
      if (manifest.empty()) manifest = load_checkpoint(checkpoints.front()).config.manifest;
      if (manifest.empty()) throw ConfigError("eval: no dataset manifest given");
      const DatasetManifest m = load_manifest(manifest);
      const auto boxes = boxes_for(regions);
      fs::create_directories(fs::path(eval_out) / "outputs");

      std::vector<EvalReport> reports;
      nlohmann::json all = nlohmann::json::array();
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const Checkpoint ck = load_checkpoint(checkpoints[k]);
        const Models models = Models::from_checkpoint(ck);
        const TrainingSet test = load_split(m, Split::test, ck.config, models.encoder);
        std::vector<Points3> preds;
        EvalReport r = evaluate(models, test, boxes, ck.config.eval, &preds);
        r.model = names.empty() ? (k == 0 ? "Our Model" : fs::path(checkpoints[k]).stem().string()) : names[k];
        if (k == 0)
          for (std::size_t i = 0; i < test.size(); ++i)
            export_colored(PointCloud(preds[i]), PointCloud(test.targets[i]),
                           fs::path(eval_out) / "outputs" / (test.ids[i] + ".ply"));
        all.push_back(report_to_json(r));
        reports.push_back(std::move(r));
      }
      const nlohmann::json doc = checkpoints.size() == 1 ? all.front() : nlohmann::json{{"reports", all}};
      write_text(fs::path(eval_out) / "report.json", doc.dump(2) + "\n");
      const std::string table = render_report_text(reports);
      write_text(fs::path(eval_out) / "report.txt", table);
      std::cout << table;
    } else if (*infer) {
      const Checkpoint ck = load_checkpoint(infer_ckpt);
      const Models models = Models::from_checkpoint(ck);
      const Mat<float> input = models.encoder.prepare_input(read_pgm16(infer_slice, slice_plane_from_string(plane_name)));
      const GaussianPosterior<float> post = models.encoder.forward(input);
      Mat<float> z = post.mean;
      if (sample) {
        std::mt19937_64 rng(resolve_seed(seed, ck.config.train.seed));
        std::normal_distribution<float> normal(0.0f, 1.0f);
        Mat<float> noise(1, post.mean.cols());
        for (Index k = 0; k < noise.size(); ++k) noise(0, k) = normal(rng);
        z = reparameterize(post, noise);
      }
      write_ply(PointCloud(Points3(models.generator.forward(z).cast<double>())), infer_out);
      std::cout << "wrote " << infer_out << "\n";
    } else if (*exp) {
      const PointCloud colored = colorize_by_error(read_ply(exp_pred), read_ply(exp_target));
      write_ply(colored, exp_out);
      std::cout << "wrote " << exp_out << "\n";
    } else if (*metrics) {
      const PointCloud a = read_ply(met_a), b = read_ply(met_b);
      const auto p = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
      };
      std::cout << "CD " << p(chamfer_distance(b, a)) << "\n";
      if (a.count() == b.count()) {
        const EmdResult e = emd(b, a);
        std::cout << "EMD " << p(e.value) << " (" << to_string(e.method) << ", bound_gap " << p(e.bound_gap) << ")\n";
      } else {
        std::cout << "EMD n/a (point counts differ: " << a.count() << " vs " << b.count() << ")\n";
      }
      std::cout << "PC2PC a->b total " << p(pc_to_pc_error_total(a, b)) << " mean " << p(pc_to_pc_errors(a, b).mean()) << "\n";
      std::cout << "PC2PC b->a total " << p(pc_to_pc_error_total(b, a)) << " mean " << p(pc_to_pc_errors(b, a).mean()) << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
