// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>

#include "oracles.hpp"
#include "support.hpp"

using namespace bpcgen;
using test::random_points;
namespace fs = std::filesystem;

namespace {

std::string g4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Fixture {
  std::vector<std::string> ids;
  std::vector<Points3> targets, preds;
};

Fixture fixture(std::size_t n, Index points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Fixture f;
  for (std::size_t i = 0; i < n; ++i) {
    f.ids.push_back("s" + std::to_string(i));
    f.targets.push_back(random_points(points, rng));
    f.preds.push_back(f.targets.back() + 0.05 * random_points(points, rng));
  }
  return f;
}

EvalReport run(const Fixture& f, const std::vector<RegionBox>& boxes = default_region_boxes()) {
  return evaluate(f.ids, f.targets, [&](std::size_t i) { return f.preds[i]; }, boxes);
}

}  // namespace

TEST(Evaluate, IdentityReconstructionIsAllZero) {
  const Fixture f = fixture(4, 6, 1);
  const EvalReport r = evaluate(f.ids, f.targets, [&](std::size_t i) { return f.targets[i]; }, default_region_boxes());
  EXPECT_EQ(r.mean_cd, 0.0);
  EXPECT_EQ(r.median_cd, 0.0);
  EXPECT_EQ(r.mean_emd, 0.0);
  EXPECT_EQ(r.region_table.total_mean, 0.0);
  EXPECT_EQ(r.region_table.total_count, 24);
  for (const auto& g : r.region_table.regions)
    if (g.mean_error) {
      EXPECT_EQ(*g.mean_error, 0.0);
    }
  for (const auto& s : r.per_subject) EXPECT_EQ(s.emd.method, EmdMethod::exact_assignment);
}

TEST(Evaluate, PerSubjectValuesMatchOracles) {
  const Fixture f = fixture(5, 7, 2);
  const EvalReport r = run(f);
  std::vector<double> cds;
  double emd_pp = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& s = r.per_subject[i];
    EXPECT_EQ(s.id, f.ids[i]);
    const double cd = oracle::chamfer(f.targets[i], f.preds[i]);
    EXPECT_NEAR(s.cd, cd, 1e-12);
    EXPECT_NEAR(s.emd.value, oracle::emd_factorial(f.targets[i], f.preds[i]), 1e-9);
    EXPECT_NEAR(s.pc2pc_total_mean, oracle::one_sided(f.preds[i], f.targets[i]) / 7, 1e-12);
    cds.push_back(cd);
    emd_pp += s.emd.value / 7;
  }
  std::sort(cds.begin(), cds.end());
  EXPECT_NEAR(r.median_cd, cds[2], 1e-12);
  EXPECT_NEAR(r.mean_cd, std::accumulate(cds.begin(), cds.end(), 0.0) / 5, 1e-12);
  EXPECT_NEAR(r.mean_emd_per_point, emd_pp / 5, 1e-12);

  // Pooled region means weight every generated vertex equally.
  double total = 0;
  for (std::size_t i = 0; i < 5; ++i) total += oracle::one_sided(f.preds[i], f.targets[i]);
  EXPECT_NEAR(r.region_table.total_mean, total / 35, 1e-12);
}

TEST(Evaluate, AggregatesRecomputeFromRows) {
  const Fixture f = fixture(4, 6, 3);
  EvalReport r = run(f);
  EvalReport copy = r;
  copy.mean_cd = copy.median_cd = copy.mean_emd = copy.mean_emd_per_point = -1;
  recompute_aggregates(copy);
  EXPECT_EQ(copy.mean_cd, r.mean_cd);
  EXPECT_EQ(copy.median_cd, r.median_cd);  // even count: midpoint of the middle pair
  EXPECT_EQ(copy.mean_emd, r.mean_emd);
  EXPECT_EQ(copy.mean_emd_per_point, r.mean_emd_per_point);
  std::vector<double> cds;
  for (const auto& s : r.per_subject) cds.push_back(s.cd);
  std::sort(cds.begin(), cds.end());
  EXPECT_NEAR(r.median_cd, 0.5 * (cds[1] + cds[2]), 1e-15);
}

TEST(Evaluate, RejectsMismatchedCounts) {
  const Fixture f = fixture(2, 6, 4);
  std::mt19937_64 rng(4);
  const Points3 short_cloud = random_points(5, rng);
  EXPECT_THROW(evaluate(f.ids, f.targets, [&](std::size_t) { return short_cloud; }, default_region_boxes()),
               InvalidInput);
  EXPECT_THROW(evaluate({}, {}, [&](std::size_t) { return short_cloud; }, default_region_boxes()), InvalidInput);
}

TEST(Evaluate, PoolingWeightsByMemberCount) {
  RegionErrorTable a, b;
  a.regions = {{"r", 1, 2.0}, {"e", 0, std::nullopt}};
  a.total_count = 4;
  a.total_mean = 1.0;
  b.regions = {{"r", 3, 6.0}, {"e", 0, std::nullopt}};
  b.total_count = 4;
  b.total_mean = 3.0;
  const auto p = pool_region_tables({a, b});
  EXPECT_EQ(p.regions[0].member_count, 4);
  EXPECT_DOUBLE_EQ(*p.regions[0].mean_error, (2.0 + 18.0) / 4);
  EXPECT_FALSE(p.regions[1].mean_error.has_value());
  EXPECT_DOUBLE_EQ(p.total_mean, 2.0);
}

TEST(Colorize, ZeroErrorIsAllBlue) {
  const Colors3 c = error_colors(Eigen::VectorXd::Zero(10));
  for (Index i = 0; i < 10; ++i) {
    EXPECT_EQ(c(i, 0), 0);
    EXPECT_EQ(c(i, 1), 0);
    EXPECT_EQ(c(i, 2), 255);
  }
}

TEST(Colorize, DisplacedVertexIsRed) {
  std::mt19937_64 rng(5);
  const Points3 target = random_points(100, rng);
  Points3 pred = target;
  pred.row(17) << 9, 9, 9;
  const PointCloud out = colorize_by_error(PointCloud(pred), PointCloud(target));
  ASSERT_TRUE(out.vertex_colors.has_value());
  for (Index i = 0; i < 100; ++i) {
    const bool far = i == 17;
    EXPECT_EQ((*out.vertex_colors)(i, 0), far ? 255 : 0);
    EXPECT_EQ((*out.vertex_colors)(i, 2), far ? 0 : 255);
  }
  EXPECT_GT((*out.vertex_errors)(17), 100.0);
}

TEST(Colorize, RampMatchesHandComputedPercentile) {
  Eigen::VectorXd e(32);
  for (int i = 0; i < 32; ++i) e(i) = (i * 7) % 32;  // a permutation of 0..31
  // 99th percentile at position 0.99 * 31 = 30.69 between 30 and 31.
  const double p99 = 30.69;
  EXPECT_NEAR(quantile(std::vector<double>(e.data(), e.data() + 32), 0.99), p99, 1e-12);
  const Colors3 c = error_colors(e);
  for (int i = 0; i < 32; ++i) {
    const double t = std::min(e(i) / p99, 1.0);
    EXPECT_EQ(c(i, 0), static_cast<int>(std::lround(255 * t))) << i;
    EXPECT_EQ(c(i, 1), 0);
    EXPECT_EQ(c(i, 2), static_cast<int>(std::lround(255 * (1 - t)))) << i;
  }
}

TEST(Colorize, ExportWritesColoredPly) {
  std::mt19937_64 rng(6);
  const Points3 target = random_points(20, rng), pred = random_points(20, rng);
  const fs::path d = test::temp_dir("colored");
  export_colored(PointCloud(pred), PointCloud(target), d / "c.ply");
  const PointCloud back = read_ply(d / "c.ply");
  ASSERT_TRUE(back.vertex_colors.has_value());
  EXPECT_EQ(*back.vertex_colors, *colorize_by_error(PointCloud(pred), PointCloud(target)).vertex_colors);
  EXPECT_THROW(export_colored(PointCloud(), PointCloud(target), d / "x.ply"), InvalidInput);
}

TEST(Report, JsonRoundTrip) {
  const Fixture f = fixture(3, 6, 7);
  EvalReport r = run(f, {{"nowhere", {5, 5, 5}, {6, 6, 6}}, {"all", {-2, -2, -2}, {2, 2, 2}}});
  r.model = "Variant";
  const nlohmann::json j = report_to_json(r);
  EXPECT_TRUE(j.contains("per_subject") && j.contains("region_table") && j.contains("aggregates"));
  EXPECT_TRUE(j["region_table"]["regions"][0]["mean_error"].is_null());
  EXPECT_TRUE(j["region_table"]["regions"][0]["empty"].get<bool>());
  const EvalReport back = report_from_json(j);
  EXPECT_EQ(report_to_json(back), j);
  EXPECT_EQ(back.model, "Variant");
  EXPECT_EQ(back.mean_cd, r.mean_cd);
}

TEST(Report, TablesShowTheJsonNumbers) {
  const Fixture f = fixture(3, 6, 8);
  EvalReport a = run(f), b = a;
  b.model = "Without D";
  const nlohmann::json j = report_to_json(a);
  const std::string region = render_region_table({a, b});
  EXPECT_EQ(region.rfind("PC-to-PC error (x10^-4)", 0), 0u);
  EXPECT_NE(region.find("Area/Model"), std::string::npos);
  EXPECT_NE(region.find("Without D"), std::string::npos);
  for (const auto& g : j["region_table"]["regions"]) {
    EXPECT_NE(region.find(g["name"].get<std::string>()), std::string::npos);
    const std::string cell = g["mean_error"].is_null() ? "empty" : g4(g["mean_error"].get<double>() * 1e4);
    EXPECT_NE(region.find(cell), std::string::npos) << cell;
  }
  EXPECT_NE(region.find(g4(j["region_table"]["total_mean"].get<double>() * 1e4)), std::string::npos);

  const std::string metric = render_metric_table({a, b});
  EXPECT_NE(metric.find("EMD (x10^-1)"), std::string::npos);
  EXPECT_NE(metric.find(g4(a.mean_cd)), std::string::npos);
  EXPECT_NE(metric.find(g4(a.mean_emd_per_point * 10)), std::string::npos);
}

TEST(Evaluate, CheckpointPathMatchesInMemoryModels) {
  const fs::path d = test::temp_dir("eval_ckpt");
  DatasetOptions opt;
  opt.point_count = 8;
  build_dataset(4, 0.5, d / "data", 5, opt);
  const DatasetManifest m = load_manifest(d / "data" / "manifest.json");
  Trainer t(test::tiny_config());
  t.load_data(m);
  t.train(d / "run", 2);
  std::vector<std::string> ids;
  std::vector<Points3> preds;
  const EvalReport from_file = evaluate(d / "run" / "latest.ckpt", m, default_region_boxes(), &preds, &ids);
  const TrainingSet test = load_split(m, Split::test, t.config(), t.models().encoder);
  const EvalReport direct = evaluate(t.models(), test, default_region_boxes());
  EXPECT_EQ(report_to_json(from_file), report_to_json(direct));
  EXPECT_EQ(ids, test.ids);
  EXPECT_EQ(preds.size(), 2u);
}
