// Scenario-driven front end; links the C API only.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sojourn/sojourn_c.h"

int main(int argc, char** argv) {
  CLI::App app{"sojourn: sojourn relations, kernel synthesis and radiation-field checks"};

  std::string scenario_path;
  std::string out_dir = ".";
  int threads = 1;
  bool verbose = false;
  bool validate_only = false;

  app.add_option("--scenario", scenario_path, "scenario file")->required();
  app.add_option("--out", out_dir, "output directory (default: .)");
  app.add_option("--threads", threads, "worker pool size (default: 1)");
  app.add_flag("--verbose", verbose, "per-check progress on stderr");
  app.add_flag("--validate-only", validate_only, "parse and validate, run nothing");

  CLI11_PARSE(app, argc, argv);

  sj_scenario* sc = nullptr;
  sj_status st = sj_scenario_parse_file(scenario_path.c_str(), &sc);
  if (st != SJ_OK) {
    std::fprintf(stderr, "sojourn: %s\n", sj_last_error());
    return st == SJ_ERR_IO ? 3 : 1;
  }
  if (validate_only) {
    std::printf("scenario ok: %s\n", scenario_path.c_str());
    sj_scenario_free(sc);
    return 0;
  }

  sj_report* rep = nullptr;
  st = sj_scenario_run(sc, out_dir.c_str(), threads, verbose ? 1 : 0, &rep);
  sj_scenario_free(sc);
  if (st != SJ_OK) {
    std::fprintf(stderr, "sojourn: %s\n", sj_last_error());
    if (st == SJ_ERR_IO) return 3;
    if (st == SJ_ERR_PARSE || st == SJ_ERR_VALIDATION) return 1;
    return 2;
  }

  int code = sj_report_exit_code(rep);
  size_t nf = sj_report_file_count(rep);
  for (size_t i = 0; i < nf; ++i) std::printf("wrote %s\n", sj_report_file(rep, i));
  size_t nm = sj_report_metric_count(rep);
  for (size_t i = 0; i < nm; ++i)
    std::printf("metric %s = %.6e\n", sj_report_metric_name(rep, i),
                sj_report_metric_value(rep, i));
  std::printf("%s\n", sj_report_pass(rep) ? "PASS" : "FAIL");
  sj_report_free(rep);
  return code;
}
