#pragma once

#include <json.hpp>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "madiag/rng.hpp"

namespace madiag {

inline const char* build_stamp() { return "madiag 0.1.0"; }

/// Outcome of one identity/bound check over a point sample.
struct CheckResult {
  std::string id;
  std::string instance;
  int points = 0;
  double max_abs_residual = 0.0;
  std::vector<double> worst_point;
  double tolerance = 0.0;
  enum class Status { Pass, Fail, Skipped } status = Status::Pass;
  std::string notes;

  /// Per-point residual trace for plot emission; not part of the JSON report.
  std::vector<std::pair<std::vector<double>, double>> trace;

  static CheckResult skipped(std::string id, std::string instance, std::string why) {
    CheckResult r;
    r.id = std::move(id);
    r.instance = std::move(instance);
    r.status = Status::Skipped;
    r.notes = std::move(why);
    return r;
  }
};

inline const char* status_str(CheckResult::Status s) {
  switch (s) {
    case CheckResult::Status::Pass: return "pass";
    case CheckResult::Status::Fail: return "fail";
    case CheckResult::Status::Skipped: return "skipped";
  }
  return "?";
}

struct Report {
  std::string suite;
  std::string build = build_stamp();
  std::uint64_t seed = 0;
  std::vector<std::string> instances;
  std::vector<CheckResult> checks;
  double wall_time_ms = 0.0;

  bool all_passed() const {
    for (const auto& c : checks)
      if (c.status == CheckResult::Status::Fail) return false;
    return true;
  }
  int failures() const {
    int f = 0;
    for (const auto& c : checks) f += (c.status == CheckResult::Status::Fail);
    return f;
  }
};

inline std::string report_to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["suite"] = r.suite;
  j["build"] = r.build;
  j["seed"] = r.seed;
  j["instances"] = r.instances;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["instance"] = c.instance;
    cj["points"] = c.points;
    cj["max_abs_residual"] = c.max_abs_residual;
    cj["worst_point"] = c.worst_point;
    cj["tolerance"] = c.tolerance;
    cj["status"] = status_str(c.status);
    cj["notes"] = c.notes;
    j["checks"].push_back(std::move(cj));
  }
  j["wall_time_ms"] = r.wall_time_ms;
  return j.dump(2) + "\n";
}

/// Removes the wall-time line so byte comparisons see only deterministic
/// content.
inline std::string strip_wall_time(const std::string& json) {
  std::istringstream in(json);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("\"wall_time_ms\"") != std::string::npos) continue;
    out << line << "\n";
  }
  return out.str();
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

inline std::string report_to_csv(const Report& r) {
  std::ostringstream os;
  os << "id,instance,points,max_abs_residual,worst_point,tolerance,status,notes\n";
  for (const auto& c : r.checks) {
    std::ostringstream wp;
    for (std::size_t i = 0; i < c.worst_point.size(); ++i) {
      if (i) wp << ' ';
      wp << c.worst_point[i];
    }
    os << csv_escape(c.id) << ',' << csv_escape(c.instance) << ',' << c.points << ','
       << c.max_abs_residual << ',' << csv_escape(wp.str()) << ',' << c.tolerance << ','
       << status_str(c.status) << ',' << csv_escape(c.notes) << "\n";
  }
  return os.str();
}

/// Residual-vs-point rows for external plotting.
inline std::string traces_to_csv(const Report& r) {
  std::ostringstream os;
  os << "id,instance,point,residual\n";
  for (const auto& c : r.checks) {
    for (const auto& [pt, res] : c.trace) {
      std::ostringstream ps;
      for (std::size_t i = 0; i < pt.size(); ++i) {
        if (i) ps << ' ';
        ps << pt[i];
      }
      os << csv_escape(c.id) << ',' << csv_escape(c.instance) << ',' << csv_escape(ps.str())
         << ',' << res << "\n";
    }
  }
  return os.str();
}

}  // namespace madiag
