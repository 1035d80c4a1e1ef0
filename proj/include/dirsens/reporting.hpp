#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "dirsens/multiplier_engine.hpp"

namespace dirsens::report {

struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Check {
  Cones,
  Dini,
  Subdiff,
  Thm3_1,
  Thm3_2,
  Thm3_3,
  FOSCMS,
  Abadie,
  Danskin,
  Stability,
};
std::string to_string(Check c);
Check check_from_string(const std::string& s);

struct AnalysisPlan {
  std::string name = "plan";
  std::string problem_path;
  expr::ParametricProblem problem;
  Vec base_point;
  std::vector<Vec> directions;
  std::vector<Check> checks;  // execution order is fixed internally
  SequenceSchedule schedule;
  solver::SolveOptions solve_opts;
  oracle::OracleOptions oracle_opts;
  engine::EngineOptions engine_opts;
  uint64_t seed = 0;
  bool include_timings = false;
};

// Parses a plan file and loads the problem it references (relative paths are
// resolved against the plan file's directory).
AnalysisPlan parse_plan_file(const std::string& path);
AnalysisPlan parse_plan(const std::string& text, const std::string& base_dir);

struct AnalysisReport {
  std::string name;
  int dim_n = 0;
  nlohmann::ordered_json payload;
  std::vector<std::pair<int, ShellSample>> shells;  // (direction index, row)
  int violated = 0;
  int errors = 0;
};

// Executes the plan: solver, oracle and engine records per direction, with
// per-record error capture (a failing record never aborts the plan).
AnalysisReport run_plan(const AnalysisPlan& plan);

enum class EmitFormat { Json, Csv, Text };

// Writes report files under out_dir and returns their paths.
std::vector<std::string> emit(const AnalysisReport& report, const std::string& out_dir,
                              EmitFormat format);

std::string summary_text(const AnalysisReport& report);

}  // namespace dirsens::report
