#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sojourn/branches.hpp"
#include "sojourn/radiation_pde.hpp"
#include "sojourn/synthesis.hpp"

namespace sojourn {

enum class TaskKind {
  SojournTable,
  BranchSearch,
  KernelSynthesis,
  OracleCompare,
  PdeCrossCheck,
  CatalogValidate,
};

struct Scenario {
  ModelSpec model;
  TaskKind task = TaskKind::SojournTable;
  std::uint64_t seed = 0;

  std::vector<Vecd> zs;    // interior points
  std::vector<Vecd> dirs;  // covector directions (normalized on use)
  std::vector<Vecd> ys;    // boundary targets

  LambdaGrid lambda;
  Mollifier mollifier;

  ReducedGrid pde_grid;
  PulseSpec pulse;

  int multistart = 0;  // 0 = module default
  std::string out_prefix = "run";
  bool export_paths = false;  // per-geodesic CSV (param, chart, coords, momenta, s, sigma)
  int snapshot_stride = 0;    // every k-th PDE slice to a field CSV; 0 disables

  std::string resolved_text;  // canonical echo stored in metadata sidecars
};

// Parses the sectioned key = value scenario format ('#' comments). Unknown
// sections/keys raise ParseError with the line number; missing task
// requirements raise ValidationError listing the fields.
Scenario parse_scenario(const std::string& text);
Scenario parse_scenario_file(const std::string& path);

struct RunReport {
  bool pass = true;
  int exit_code = 0;
  std::vector<std::string> files_written;
  std::map<std::string, double> metrics;
};

RunReport run_scenario(const Scenario& s, const std::string& out_dir, int threads = 1,
                       bool verbose = false);

const char* task_name(TaskKind t);
const char* model_name(ModelId m);

}  // namespace sojourn
