#pragma once

// Centerline CSV files and metric report serialization (JSON, CSV).

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ribkit/centerline.hpp"
#include "ribkit/error.hpp"
#include "ribkit/metrics.hpp"
#include "ribkit/nifti.hpp"

namespace ribkit::io {

inline constexpr const char* kCenterlineHeader = "z_mm,x_mm,y_mm";

inline Centerline parse_centerline(std::istream& in, const std::string& name = "centerline") {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCenterlineHeader)
    throw FormatError(name + ": header must be \"" + std::string(kCenterlineHeader) + "\"");
  std::vector<Point3> pts;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string a, b, c, extra;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
        !std::getline(fields, c, ',') || std::getline(fields, extra, ','))
      throw FormatError(name + ": row " + std::to_string(row) + " must have 3 fields");
    Point3 p;
    try {
      std::size_t used = 0;
      p.z = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      p.x = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      p.y = std::stod(c, &used);
      if (used != c.size()) throw std::invalid_argument(c);
    } catch (const std::exception&) {
      throw FormatError(name + ": row " + std::to_string(row) + " is not numeric");
    }
    if (!pts.empty() && !(p.z > pts.back().z))
      throw FormatError(name + ": z not strictly increasing at row " + std::to_string(row));
    pts.push_back(p);
  }
  if (pts.size() < 2) throw FormatError(name + ": need at least 2 points");
  return Centerline(std::move(pts));
}

inline Centerline read_centerline(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_centerline(in, "'" + path + "'");
}

inline void write_centerline(const Centerline& line, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << kCenterlineHeader << "\n";
  char buf[128];
  for (const auto& p : line.points()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.z, p.x, p.y);
    out << buf;
  }
  if (!out) throw IoError("error writing '" + path + "'");
}

// ---- reports -------------------------------------------------------------------

// Percentages are serialized with one decimal.
inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

inline std::string format_percent(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

inline std::string format_dice(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

inline nlohmann::json percent_json(const std::optional<double>& v) {
  return v ? nlohmann::json(round1(*v)) : nlohmann::json(nullptr);
}
inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const GroupAccuracy& g) {
  return {{"percent", percent_json(g.percent())}, {"correct", g.correct}, {"present", g.present}};
}

inline nlohmann::json to_json(const LabelAccuracy& a) {
  return {{"A", to_json(a.all)}, {"F", to_json(a.first)},
          {"I", to_json(a.intermediate)}, {"T", to_json(a.twelfth)}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json ribs = nlohmann::json::array();
  for (const auto& s : r.per_rib)
    ribs.push_back({{"label", s.rib_label},
                    {"type", s.rib_type},
                    {"gt_present", s.gt_present},
                    {"gt_voxels", s.gt_voxels},
                    {"pred_voxels", s.pred_voxels},
                    {"overlap", s.overlap},
                    {"recall", opt_json(s.recall)},
                    {"dice", opt_json(s.dice)}});
  return {{"id", r.case_id},
          {"cut_mode", r.cut_mode},
          {"label_accuracy", to_json(r.accuracy)},
          {"dice_avg", opt_json(r.dice_avg)},
          {"dice_min", opt_json(r.dice_min)},
          {"hallucinated_labels", r.hallucinated_labels},
          {"per_rib", ribs}};
}

inline nlohmann::json to_json(const DatasetSummary& s) {
  return {{"cases", s.cases},
          {"micro", to_json(s.micro)},
          {"macro",
           {{"A", percent_json(s.macro.all)},
            {"F", percent_json(s.macro.first)},
            {"I", percent_json(s.macro.intermediate)},
            {"T", percent_json(s.macro.twelfth)}}},
          {"dice_avg", opt_json(s.dice_avg)},
          {"dice_min", opt_json(s.dice_min)}};
}

// One evaluated case: raw scores and, when a centerline was given, the
// spine-cut scores.
struct CaseReports {
  std::string id;
  MetricsReport raw;
  std::optional<MetricsReport> cut;
};

struct EvaluationReport {
  std::vector<CaseReports> cases;  // sorted by id

  DatasetSummary raw_summary() const {
    std::vector<MetricsReport> v;
    for (const auto& c : cases) v.push_back(c.raw);
    return summarize(v);
  }
  std::optional<DatasetSummary> cut_summary() const {
    std::vector<MetricsReport> v;
    for (const auto& c : cases)
      if (c.cut) v.push_back(*c.cut);
    if (v.empty()) return std::nullopt;
    return summarize(v);
  }
};

inline nlohmann::json to_json(const EvaluationReport& e) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : e.cases) {
    nlohmann::json j = {{"id", c.id}, {"raw", to_json(c.raw)}};
    j["cut"] = c.cut ? to_json(*c.cut) : nlohmann::json(nullptr);
    cases.push_back(std::move(j));
  }
  nlohmann::json out = {{"cases", cases}, {"aggregate", {{"raw", to_json(e.raw_summary())}}}};
  const auto cut = e.cut_summary();
  out["aggregate"]["cut"] = cut ? to_json(*cut) : nlohmann::json(nullptr);
  return out;
}

inline constexpr const char* kCsvHeader = "id,A,F,I,T,dice_avg,dice_min";

inline std::string csv_row(const std::string& id, const LabelAccuracy& a,
                           const std::optional<double>& dice_avg,
                           const std::optional<double>& dice_min) {
  return id + "," + format_percent(a.all.percent()) + "," + format_percent(a.first.percent()) +
         "," + format_percent(a.intermediate.percent()) + "," +
         format_percent(a.twelfth.percent()) + "," + format_dice(dice_avg) + "," +
         format_dice(dice_min);
}

// One row per case; spine-cut rows carry the id with a trailing '*'. The
// aggregate rows ("ALL", "ALL*") use micro-averaged accuracy.
inline std::string to_csv(const EvaluationReport& e) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& c : e.cases) {
    out += csv_row(c.id, c.raw.accuracy, c.raw.dice_avg, c.raw.dice_min) + "\n";
    if (c.cut) out += csv_row(c.id + "*", c.cut->accuracy, c.cut->dice_avg, c.cut->dice_min) + "\n";
  }
  const DatasetSummary raw = e.raw_summary();
  out += csv_row("ALL", raw.micro, raw.dice_avg, raw.dice_min) + "\n";
  if (const auto cut = e.cut_summary())
    out += csv_row("ALL*", cut->micro, cut->dice_avg, cut->dice_min) + "\n";
  return out;
}

enum class ReportFormat { json, csv };

inline void write_report(const EvaluationReport& e, const std::string& path, ReportFormat fmt) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (fmt == ReportFormat::json)
    out << to_json(e).dump(2) << "\n";
  else
    out << to_csv(e);
  if (!out) throw IoError("error writing '" + path + "'");
}

}  // namespace ribkit::io
