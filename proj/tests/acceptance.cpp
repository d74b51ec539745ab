// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero when any
// gating criterion fails. Tolerances and budgets are fixed below.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>

#include "oracles.hpp"
#include "support.hpp"

using namespace bpcgen;
using test::random_mat;
using test::random_points;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-9;       // criteria 1, 2
constexpr double kEmdBudgetSeconds = 10;  // criterion 1
constexpr double kGcnTol = 1e-12;         // criterion 5
constexpr double kGenGradTol = 1e-4;      // criterion 6a
constexpr double kGenGradShare = 0.99;    // criterion 6a
constexpr double kKlGradTol = 1e-6;       // criterion 6b
constexpr double kGpNormTol = 1e-4;       // criterion 6c
constexpr double kPenaltyTol = 1e-6;      // criterion 7
constexpr double kCdRatio = 0.5;          // criterion 9
constexpr double kToyBudgetMinutes = 30;  // criterion 9

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome emd_oracle() {
  std::mt19937_64 rng(101);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 2 + t % 6;
    const Points3 a = random_points(n, rng), b = random_points(n, rng);
    worst = std::max(worst, std::abs(emd_exact(PointCloud(a), PointCloud(b)).value - oracle::emd_factorial(a, b)));
  }
  const double s = seconds_since(t0);
  return {worst <= kOracleTol && s < kEmdBudgetSeconds,
          "200 pairs, max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", s) + " s"};
}

Outcome cd_oracle() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<Index> size(1, 512);
  double worst = 0;
  bool identity = true;
  for (int t = 0; t < 50; ++t) {
    const PointCloud a(random_points(size(rng), rng)), b(random_points(size(rng), rng));
    const double cd = chamfer_distance(a, b);
    worst = std::max(worst, std::abs(cd - oracle::chamfer(a.points, b.points)));
    identity = identity && pc_to_pc_error_total(a, b) + pc_to_pc_error_total(b, a) == cd;
  }
  return {worst <= kOracleTol && identity,
          "50 pairs, max |diff| " + fmt("%.3g", worst) + ", directional sum exact: " + (identity ? "yes" : "no")};
}

Outcome worked_values() {
  auto cloud = [](std::initializer_list<std::array<double, 3>> rows) {
    Points3 p(static_cast<Index>(rows.size()), 3);
    Index i = 0;
    for (const auto& r : rows) p.row(i++) << r[0], r[1], r[2];
    return PointCloud(p);
  };
  const double cd1 = chamfer_distance(cloud({{0, 0, 0}}), cloud({{1, 0, 0}}));
  const double cd2 = chamfer_distance(cloud({{0, 0, 0}, {2, 0, 0}}), cloud({{1, 0, 0}}));
  const double e = emd_exact(cloud({{0, 0, 0}, {1, 0, 0}}), cloud({{0, 1, 0}, {1, 1, 0}})).value;
  return {cd1 == 2.0 && cd2 == 3.0 && e == 2.0,
          "CD " + fmt("%.17g", cd1) + ", " + fmt("%.17g", cd2) + "; EMD " + fmt("%.17g", e)};
}

Outcome shape_contract() {
  std::mt19937_64 rng(104);
  const TreeGenerator<float> g(GeneratorConfig{}, rng);
  const Mat<float> out = g.forward(random_mat<float>(1, kLatentDim, rng));
  bool ok = out.rows() == 2048 && out.cols() == 3;
  std::uniform_int_distribution<int> deg(1, 6), depth(1, 4);
  int rejected = 0, tried = 0;
  for (int t = 0; t < 50; ++t) {
    GeneratorConfig c;
    c.degrees.clear();
    c.widths = {96};
    Index prod = 1;
    for (int l = depth(rng); l > 0; --l) {
      c.degrees.push_back(deg(rng));
      prod *= c.degrees.back();
      c.widths.push_back(8);
    }
    c.widths.back() = 3;
    c.point_count = prod + 1 + t % 5;
    ++tried;
    try {
      TreeGenerator<float> bad(c, rng);
    } catch (const ConfigError&) {
      ++rejected;
    }
    c.point_count = prod;
    try {
      TreeGenerator<float> good(c, rng);
    } catch (const ConfigError&) {
      ok = false;
    }
  }
  ok = ok && rejected == tried;
  return {ok, "default emits " + std::to_string(out.rows()) + "x" + std::to_string(out.cols()) + "; " +
                  std::to_string(rejected) + "/" + std::to_string(tried) + " mismatched configs rejected"};
}

Outcome gcn_oracle() {
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> deg(1, 3), width(1, 5), kdist(1, 3), depth(1, 3);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int levels = depth(rng);
    TreeTopology topo;
    std::vector<Mat<double>> anc;
    std::vector<Index> widths;
    for (int l = 0; l < levels; ++l) {
      widths.push_back(width(rng));
      anc.push_back(random_mat<double>(topo.level_size(l), widths.back(), rng));
      topo.extend(deg(rng));
    }
    const Index w_in = width(rng), w_out = width(rng);
    const int k = kdist(rng);
    GcnLayerParams<double> p;
    p.loop_in = random_mat<double>(w_in, k * w_in, rng);
    p.loop_out = random_mat<double>(k * w_in, w_out, rng);
    p.bias = random_mat<double>(1, w_out, rng);
    for (int j = 0; j < levels; ++j) p.ancestor_maps.push_back(random_mat<double>(widths[static_cast<std::size_t>(j)], w_out, rng));
    const Mat<double> x = random_mat<double>(topo.level_size(levels), w_in, rng);
    const bool last = t % 2;
    const auto out = gcn_block(LayerState<double>{x, levels}, std::span<const Mat<double>>(anc), topo, p,
                               last ? Activation::identity : Activation::leaky, 0.2);
    const auto& table = topo.table(levels);
    const Mat<double> expect = oracle::gcn_dense(
        x, anc, [&](Index i, int j) { return table(i, j); }, p.loop_in, p.loop_out, p.ancestor_maps, p.bias, 0.2, last);
    worst = std::max(worst, (out.features - expect).cwiseAbs().maxCoeff());
  }
  return {worst <= kGcnTol, "100 instances, max |diff| " + fmt("%.3g", worst)};
}

Outcome gradient_checks() {
  std::mt19937_64 rng(106);
  // (a) generator + Chamfer loss
  GeneratorConfig gc;
  gc.degrees = {2, 4};
  gc.widths = {96, 8, 3};
  gc.point_count = 8;
  gc.support_count = 2;
  TreeGenerator<double> g(gc, rng);
  const Mat<double> z = random_mat<double>(1, kLatentDim, rng);
  const Points3 target = random_points(8, rng);
  GeneratorTrace<double> tr;
  Mat<double> d_out;
  chamfer_with_gradient(g.forward(z, &tr), target, d_out);
  auto grad = nn::zeros_like(g.params());
  g.backward(tr, d_out, grad);
  std::vector<Mat<double>*> ps, gs;
  nn::collect_params(g.params(), ps);
  nn::collect_params(grad, gs);
  std::size_t good = 0, total = 0;
  auto loss = [&] {
    Mat<double> unused;
    return chamfer_with_gradient(g.forward(z), target, unused);
  };
  for (std::size_t t = 0; t < ps.size(); ++t)
    for (Index i = 0; i < ps[t]->size(); ++i) {
      ++total;
      const double fd = oracle::central_difference(loss, ps[t]->data() + i, 1e-5);
      if (test::rel_err(gs[t]->data()[i], fd, 1e-7) <= kGenGradTol) ++good;
    }
  const double share = static_cast<double>(good) / static_cast<double>(total);

  // (b) KL
  Mat<double> mu = random_mat<double>(1, kLatentDim, rng), h = random_mat<double>(1, kLatentDim, rng, 0.5);
  auto post = [&] { return GaussianPosterior<double>{mu, h.array().exp().matrix()}; };
  Mat<double> dmu, dh;
  kl_divergence_gradient(post(), dmu, dh);
  double kl_worst = 0;
  for (Index k = 0; k < kLatentDim; ++k) {
    auto kl = [&] { return kl_divergence(post()); };
    kl_worst = std::max(kl_worst, test::rel_err(dmu(0, k), oracle::central_difference(kl, &mu(0, k), 1e-5)));
    kl_worst = std::max(kl_worst, test::rel_err(dh(0, k), oracle::central_difference(kl, &h(0, k), 1e-5)));
  }

  // (c) gradient-penalty norm at an interior interpolate
  CriticConfig cc;
  cc.point_widths = {3, 16, 24};
  cc.head_widths = {24, 8, 1};
  const PointCritic<double> d(cc, rng);
  const Mat<double> real = random_mat<double>(9, 3, rng), fake = random_mat<double>(9, 3, rng);
  Mat<double> xh = interpolate_clouds(real, fake, 0.37);
  double sq = 0;
  for (Index i = 0; i < xh.size(); ++i) {
    const double gi = oracle::central_difference([&] { return d.score(xh); }, xh.data() + i, 1e-6);
    sq += gi * gi;
  }
  const double gp_err = test::rel_err(gradient_penalty(real, fake, d, 0.37), (std::sqrt(sq) - 1) * (std::sqrt(sq) - 1));

  return {share >= kGenGradShare && kl_worst <= kKlGradTol && gp_err <= kGpNormTol,
          "(a) " + std::to_string(good) + "/" + std::to_string(total) + " params within 1e-4; (b) KL max rel err " +
              fmt("%.2g", kl_worst) + "; (c) penalty rel err " + fmt("%.2g", gp_err)};
}

Outcome closed_form_penalty() {
  std::mt19937_64 rng(107);
  Mat<double> w = random_mat<double>(16, 3, rng);
  w *= 3.0 / w.norm();
  const LinearCritic<double> d({w, Mat<double>::Zero(1, 1)});
  const Mat<double> x = random_mat<double>(16, 3, rng);
  const double contribution = loss_d(d, std::vector<Mat<double>>{x}, std::vector<Mat<double>>{x},
                                     std::vector<double>{0.42}, 10.0)
                                  .loss;
  return {std::abs(contribution - 40.0) <= kPenaltyTol, "penalty contribution " + fmt("%.12g", contribution)};
}

Outcome schedule() {
  TrainConfig c;
  const double first = lambda2_at(0, c), last = lambda2_at(c.epochs - 1, c);
  return {first == 0.1 && last == 1.0, "lambda2(0) = " + fmt("%.15g", first) + ", lambda2(last) = " + fmt("%.15g", last)};
}

struct ToyRun {
  std::vector<LogRecord> history;
  EvalReport report;
  double seconds = 0;
};

ToyRun toy_run(const RunConfig& cfg, const DatasetManifest& m, const fs::path& out, const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  Trainer t(cfg);
  t.load_data(m);
  t.train(out, -1, [&](const LogRecord& r) {
    if (r.epoch == 1 || r.epoch % 50 == 0)
      std::cout << "  [" << label << "] epoch " << r.epoch << " probe CD " << fmt("%.4f", r.cd) << " ("
                << fmt("%.0f", seconds_since(t0)) << " s)" << std::endl;
  });
  ToyRun run;
  run.history = t.history();
  run.seconds = seconds_since(t0);
  const TrainingSet test = load_split(m, Split::test, cfg, t.models().encoder);
  run.report = evaluate(t.models(), test, default_region_boxes(), cfg.eval);
  return run;
}

bool same_logs(const std::vector<LogRecord>& a, const std::vector<LogRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    LogRecord x = a[i], y = b[i];
    x.wall_ms = y.wall_ms = 0;
    if (!(x == y)) return false;
  }
  return true;
}

Outcome toy_training(const fs::path& root, ToyRun& full) {
  DatasetOptions opt;
  opt.point_count = 256;
  build_dataset(64, 0.75, root / "data", 2026, opt);
  const DatasetManifest m = load_manifest(root / "data" / "manifest.json");
  RunConfig cfg = RunConfig::toy();
  cfg.train.seed = 7;
  full = toy_run(cfg, m, root / "full", "full");
  const ToyRun again = toy_run(cfg, m, root / "repeat", "repeat");
  const double first = full.history.front().cd, last = full.history.back().cd;
  const bool deterministic = same_logs(full.history, again.history);
  const bool fast = full.seconds <= kToyBudgetMinutes * 60;
  return {last <= kCdRatio * first && deterministic && fast,
          "probe CD " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + " (ratio " + fmt("%.3f", last / first) +
              "), " + fmt("%.0f", full.seconds) + " s per run, repeat run log identical: " +
              (deterministic ? "yes" : "no")};
}

Outcome ablation(const fs::path& root, ToyRun& full) {
  const DatasetManifest m = load_manifest(root / "data" / "manifest.json");
  RunConfig cfg = RunConfig::toy();
  cfg.train.seed = 7;
  cfg.train.adversarial = false;
  ToyRun nod = toy_run(cfg, m, root / "no_critic", "no critic");
  full.report.model = "Our Model";
  nod.report.model = "Our Model without D";
  nlohmann::json doc{{"reports", {report_to_json(full.report), report_to_json(nod.report)}}};
  std::ofstream(root / "report.json") << doc.dump(2) << '\n';
  const std::string text = render_report_text({full.report, nod.report});
  std::ofstream(root / "report.txt") << text;
  std::cout << text;
  const auto back = nlohmann::json::parse(test::slurp(root / "report.json"));
  const bool both = back["reports"].size() == 2 && back["reports"][0]["aggregates"].contains("mean_cd") &&
                    back["reports"][1]["aggregates"].contains("mean_cd");
  const double a = full.report.mean_cd, b = nod.report.mean_cd;
  return {both, "test CD full " + fmt("%.4f", a) + " vs without critic " + fmt("%.4f", b) + " (" +
                    (a < b ? "full model lower" : "full model not lower") + ", trend is informational); report at " +
                    (root / "report.json").string()};
}

Outcome synth_data(const fs::path& root) {
  const std::string base = "synth-data --seed 11 --subjects 6 --split 0.5 --out ";
  const int rc1 = test::run_cli(base + "\"" + (root / "a").string() + "\"");
  const int rc2 = test::run_cli(base + "\"" + (root / "b").string() + "\"");
  if (rc1 != 0 || rc2 != 0) return {false, "synth-data exited with " + std::to_string(rc1) + "/" + std::to_string(rc2)};
  const bool same = test::same_tree(root / "a", root / "b");
  int plys = 0, pgms = 0;
  bool valid = true;
  std::string why;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    try {
      if (e.path().extension() == ".ply") {
        valid = valid && read_ply(e.path()).count() == 2048;
        ++plys;
      } else if (e.path().extension() == ".pgm") {
        const Pgm16 img = read_pgm16_raw(e.path());
        const auto [lo, hi] = std::minmax_element(img.samples.begin(), img.samples.end());
        if (img.maxval != 65535 || *lo != 0 || *hi != 65535) {
          valid = false;
          why = " (" + e.path().filename().string() + " spans " + std::to_string(*lo) + ".." + std::to_string(*hi) + ")";
        }
        ++pgms;
      }
    } catch (const Error& ex) {
      valid = false;
      why = std::string(" (") + ex.what() + ")";
    }
  }
  return {same && valid && plys == 6 && pgms == 18,
          std::string("byte-identical: ") + (same ? "yes" : "no") + ", " + std::to_string(plys) + " PLY and " +
              std::to_string(pgms) + " PGM files valid: " + (valid ? "yes" : "no") + why};
}

}  // namespace

int main() {
  const fs::path root = fs::path(BPCGEN_TEST_TMP) / "acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  ToyRun full;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, emd_oracle},
      {2, cd_oracle},
      {3, worked_values},
      {4, shape_contract},
      {5, gcn_oracle},
      {6, gradient_checks},
      {7, closed_form_penalty},
      {8, schedule},
      {9, [&] { return toy_training(root / "toy", full); }},
      {10, [&] { return ablation(root / "toy", full); }},
      {11, [&] { return synth_data(root / "synth"); }},
  };
  int failures = 0;
  for (const auto& [n, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
