// SPDX-FileCopyrightText: 2026 bpcgen contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bpcgen/error.hpp"
#include "bpcgen/metrics/chamfer.hpp"
#include "bpcgen/metrics/emd.hpp"
#include "bpcgen/metrics/region_report.hpp"
#include "bpcgen/run_config.hpp"
#include "bpcgen/train/trainer.hpp"

namespace bpcgen {

inline constexpr double kPc2pcScale = 1e4;  ///< tables print PC-to-PC error in units of 1e-4
inline constexpr double kEmdScale = 1e1;    ///< and per-point EMD in units of 1e-1

struct SubjectResult {
  std::string id;
  double cd = 0;                ///< symmetric Chamfer distance (sum of squared NN distances)
  EmdResult emd;                ///< total transport cost
  double pc2pc_total_mean = 0;  ///< mean per-vertex PC-to-PC error of the generated cloud
  Index point_count = 0;
};

struct EvalReport {
  std::string model = "Our Model";
  std::vector<SubjectResult> per_subject;
  RegionErrorTable region_table;  ///< pooled over every generated vertex of every subject
  double mean_cd = 0;
  double median_cd = 0;
  double mean_emd = 0;            ///< mean total EMD
  double mean_emd_per_point = 0;  ///< mean of EMD / N
};

/// Fills the aggregate fields from the per-subject rows.
inline void recompute_aggregates(EvalReport& r) {
  if (r.per_subject.empty()) throw InvalidInput("evaluate: no subjects");
  std::vector<double> cds;
  double emd = 0, emd_pp = 0;
  for (const auto& s : r.per_subject) {
    cds.push_back(s.cd);
    emd += s.emd.value;
    if (s.point_count < 1) throw InvalidInput("evaluate: subject '" + s.id + "' has no points");
    emd_pp += s.emd.value / static_cast<double>(s.point_count);
  }
  const double n = static_cast<double>(r.per_subject.size());
  r.mean_cd = std::accumulate(cds.begin(), cds.end(), 0.0) / n;
  std::sort(cds.begin(), cds.end());
  const std::size_t m = cds.size() / 2;
  r.median_cd = cds.size() % 2 ? cds[m] : 0.5 * (cds[m - 1] + cds[m]);
  r.mean_emd = emd / n;
  r.mean_emd_per_point = emd_pp / n;
}

/// Pools region tables of several subjects into one: sums per-region errors and counts.
inline RegionErrorTable pool_region_tables(const std::vector<RegionErrorTable>& tables) {
  if (tables.empty()) throw InvalidInput("pool_region_tables: no tables");
  RegionErrorTable out;
  std::vector<double> sums(tables.front().regions.size(), 0.0);
  double total_sum = 0;
  for (const auto& r : tables.front().regions) out.regions.push_back({r.name, 0, std::nullopt});
  for (const auto& t : tables) {
    if (t.regions.size() != out.regions.size()) throw InvalidInput("pool_region_tables: region lists differ");
    for (std::size_t b = 0; b < t.regions.size(); ++b) {
      out.regions[b].member_count += t.regions[b].member_count;
      if (t.regions[b].mean_error) sums[b] += *t.regions[b].mean_error * static_cast<double>(t.regions[b].member_count);
    }
    out.total_count += t.total_count;
    total_sum += t.total_mean * static_cast<double>(t.total_count);
  }
  for (std::size_t b = 0; b < out.regions.size(); ++b)
    if (out.regions[b].member_count > 0) out.regions[b].mean_error = sums[b] / static_cast<double>(out.regions[b].member_count);
  out.total_mean = total_sum / static_cast<double>(out.total_count);
  return out;
}

/// Evaluates reconstructions against targets. `reconstruct(i)` returns the generated cloud
/// for subject i. Generated clouds are stored in `predictions` when given.
template <class Reconstruct>
EvalReport evaluate(const std::vector<std::string>& ids, const std::vector<Points3>& targets, Reconstruct&& reconstruct,
                    const std::vector<RegionBox>& boxes, const EvalConfig& ec = {},
                    std::vector<Points3>* predictions = nullptr) {
  if (ids.empty() || ids.size() != targets.size()) throw InvalidInput("evaluate: test split is empty or mismatched");
  EvalReport r;
  std::vector<RegionErrorTable> tables;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const PointCloud target(targets[i]);
    const PointCloud pred(Points3(reconstruct(i)));
    if (pred.count() != target.count())
      throw InvalidInput("evaluate: subject '" + ids[i] + "' generated " + std::to_string(pred.count()) +
                         " points but the target has " + std::to_string(target.count()));
    SubjectResult s;
    s.id = ids[i];
    s.cd = chamfer_distance(target, pred);
    s.emd = emd(target, pred, ec.exact_emd_limit, ec.emd_epsilon);
    tables.push_back(region_error_report(pred, target, boxes));
    s.pc2pc_total_mean = tables.back().total_mean;
    s.point_count = target.count();
    r.per_subject.push_back(std::move(s));
    if (predictions) predictions->push_back(pred.points);
  }
  r.region_table = pool_region_tables(tables);
  recompute_aggregates(r);
  return r;
}

/// Evaluates trained models on a test set at z = posterior mean.
inline EvalReport evaluate(const Models& models, const TrainingSet& test, const std::vector<RegionBox>& boxes,
                           const EvalConfig& ec = {}, std::vector<Points3>* predictions = nullptr) {
  return evaluate(
      test.ids, test.targets, [&](std::size_t i) { return models.reconstruct(test.inputs[i]); }, boxes, ec,
      predictions);
}

/// Loads a checkpoint and evaluates it on the test split of `manifest`.
inline EvalReport evaluate(const std::filesystem::path& checkpoint_path, const DatasetManifest& manifest,
                           const std::vector<RegionBox>& boxes, std::vector<Points3>* predictions = nullptr,
                           std::vector<std::string>* ids = nullptr) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const Models models = Models::from_checkpoint(ck);
  const TrainingSet test = load_split(manifest, Split::test, ck.config, models.encoder);
  if (test.size() == 0) throw InvalidInput("evaluate: manifest has no test subjects");
  if (ids) *ids = test.ids;
  return evaluate(models, test, boxes, ck.config.eval, predictions);
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : r.per_subject)
    rows.push_back({{"id", s.id},
                    {"cd", s.cd},
                    {"emd", {{"value", s.emd.value}, {"method", to_string(s.emd.method)}, {"bound_gap", s.emd.bound_gap}}},
                    {"pc2pc_total_mean", s.pc2pc_total_mean},
                    {"point_count", s.point_count}});
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& g : r.region_table.regions)
    regions.push_back({{"name", g.name},
                       {"member_count", g.member_count},
                       {"mean_error", g.mean_error ? nlohmann::json(*g.mean_error) : nlohmann::json(nullptr)},
                       {"empty", !g.mean_error.has_value()}});
  return {{"model", r.model},
          {"per_subject", rows},
          {"region_table",
           {{"regions", regions}, {"total_count", r.region_table.total_count}, {"total_mean", r.region_table.total_mean}}},
          {"aggregates",
           {{"mean_cd", r.mean_cd},
            {"median_cd", r.median_cd},
            {"mean_emd", r.mean_emd},
            {"mean_emd_per_point", r.mean_emd_per_point},
            {"cd_definition", "per-subject mean of the symmetric Chamfer distance"},
            {"scale_tags", {{"pc2pc", "x10^-4"}, {"emd", "x10^-1"}}}}}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.model = j.at("model").get<std::string>();
    for (const auto& row : j.at("per_subject")) {
      SubjectResult s;
      s.id = row.at("id").get<std::string>();
      s.cd = row.at("cd").get<double>();
      s.emd.value = row.at("emd").at("value").get<double>();
      const auto method = row.at("emd").at("method").get<std::string>();
      if (method != "exact_assignment" && method != "approximate") throw InvalidInput("report: unknown EMD method");
      s.emd.method = method == "approximate" ? EmdMethod::approximate : EmdMethod::exact_assignment;
      s.emd.bound_gap = row.at("emd").at("bound_gap").get<double>();
      s.pc2pc_total_mean = row.at("pc2pc_total_mean").get<double>();
      s.point_count = row.at("point_count").get<Index>();
      r.per_subject.push_back(std::move(s));
    }
    const auto& t = j.at("region_table");
    for (const auto& g : t.at("regions")) {
      RegionError e{g.at("name").get<std::string>(), g.at("member_count").get<Index>(), std::nullopt};
      if (!g.at("mean_error").is_null()) e.mean_error = g.at("mean_error").get<double>();
      r.region_table.regions.push_back(std::move(e));
    }
    r.region_table.total_count = t.at("total_count").get<Index>();
    r.region_table.total_mean = t.at("total_mean").get<double>();
    const auto& a = j.at("aggregates");
    r.mean_cd = a.at("mean_cd").get<double>();
    r.median_cd = a.at("median_cd").get<double>();
    r.mean_emd = a.at("mean_emd").get<double>();
    r.mean_emd_per_point = a.at("mean_emd_per_point").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(0, std::string("report: ") + ex.what());
  }
  return r;
}

namespace detail {
inline std::string sig4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) os << "  ";
      os << rows[r][c] << std::string(width[c] - rows[r][c].size(), ' ');
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return os.str();
}
}  // namespace detail

/// Region-wise PC-to-PC table, one row per model, values in units of 1e-4.
inline std::string render_region_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidInput("render_region_table: no reports");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Area/Model"};
  for (const auto& g : reports.front().region_table.regions) head.push_back(g.name);
  head.push_back("Total");
  rows.push_back(head);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.model};
    for (const auto& g : r.region_table.regions)
      row.push_back(g.mean_error ? detail::sig4(*g.mean_error * kPc2pcScale) : "empty");
    row.push_back(detail::sig4(r.region_table.total_mean * kPc2pcScale));
    rows.push_back(row);
  }
  return "PC-to-PC error (x10^-4)\n" + detail::render_rows(rows);
}

/// CD / EMD table, one column per model. EMD is the per-point mean in units of 1e-1.
inline std::string render_metric_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidInput("render_metric_table: no reports");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"Metric"}, cd{"CD"}, emd{"EMD (x10^-1)"};
  for (const auto& r : reports) {
    head.push_back(r.model);
    cd.push_back(detail::sig4(r.mean_cd));
    emd.push_back(detail::sig4(r.mean_emd_per_point * kEmdScale));
  }
  rows = {head, cd, emd};
  return detail::render_rows(rows);
}

inline std::string render_report_text(const std::vector<EvalReport>& reports) {
  return render_region_table(reports) + "\n" + render_metric_table(reports);
}

}  // namespace bpcgen
