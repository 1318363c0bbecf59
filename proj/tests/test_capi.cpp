// C API surface tests: opaque handles, status codes, caller buffers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "sojourn/sojourn_c.h"

namespace {

std::string fresh_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("sojourn_capi_" + tag);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d.string();
}

}  // namespace

TEST_CASE("version and error text are always available") {
  CHECK(sj_version() != nullptr);
  CHECK(sj_last_error() != nullptr);
}

TEST_CASE("model lifecycle and validation") {
  sj_model* m = nullptr;
  CHECK(sj_model_create("FlatEuclidean", 3, nullptr, nullptr, 0, 0.0, &m) == SJ_OK);
  REQUIRE(m != nullptr);
  CHECK(sj_model_dim(m) == 3);
  sj_model_free(m);

  sj_model* bad = nullptr;
  CHECK(sj_model_create("NoSuchModel", 3, nullptr, nullptr, 0, 0.0, &bad) ==
        SJ_ERR_VALIDATION);
  CHECK(std::strlen(sj_last_error()) > 0);

  const char* names[] = {"a"};
  double vals[] = {0.9};
  CHECK(sj_model_create("PerturbedScattering", 3, names, vals, 1, 0.0, &bad) ==
        SJ_ERR_VALIDATION);
}

TEST_CASE("sojourn query matches the flat closed form") {
  sj_model* m = nullptr;
  REQUIRE(sj_model_create("FlatEuclidean", 3, nullptr, nullptr, 0, 0.0, &m) == SJ_OK);
  double z[3] = {1.0, 0.5, -0.2};
  double dir[3] = {0.0, 0.6, 0.8};
  double s, sigma, y[2], eta[2], err;
  CHECK(sj_sojourn(m, z, dir, &s, &sigma, y, eta, &err) == SJ_OK);
  CHECK(std::abs(s - (-(z[1] * 0.6 + z[2] * 0.8))) < 1e-8);
  CHECK(sigma == doctest::Approx(1.0).epsilon(1e-9));
  sj_model_free(m);
}

TEST_CASE("trapped launches surface as a status code") {
  sj_model* m = nullptr;
  REQUIRE(sj_model_create("HyperbolicHn", 3, nullptr, nullptr, 0, 0.0, &m) == SJ_OK);
  double z[3] = {1.0, 0.0, 0.0};
  double up[3] = {1.0, 0.0, 0.0};  // escapes through the chart's missing point
  double s;
  CHECK(sj_sojourn(m, z, up, &s, nullptr, nullptr, nullptr, nullptr) == SJ_ERR_TRAPPED);
  sj_model_free(m);
}

TEST_CASE("branch handle exposes the branch table") {
  sj_model* m = nullptr;
  REQUIRE(sj_model_create("HyperbolicHn", 3, nullptr, nullptr, 0, 0.0, &m) == SJ_OK);
  double z[3] = {1.0, -1.0, 0.0};
  double yt[2] = {0.0, 0.0};
  sj_branches* b = nullptr;
  REQUIRE(sj_branches_find(m, z, yt, 64, &b) == SJ_OK);
  REQUIRE(sj_branches_count(b) == 1);

  double dir[3], s, sigma, eta[2], jac, resid;
  int k, nd;
  CHECK(sj_branches_get(b, 0, dir, &s, &sigma, eta, &jac, &k, &nd, &resid) == SJ_OK);
  CHECK(std::abs(s - std::log(2.0)) < 1e-6);  // the worked half-space example
  CHECK(k == 0);
  CHECK(nd == 1);
  CHECK(resid <= 1e-9);
  CHECK(sj_branches_get(b, 5, dir, &s, &sigma, eta, &jac, &k, &nd, &resid) ==
        SJ_ERR_INVALID_ARGUMENT);
  sj_branches_free(b);
  sj_model_free(m);
}

TEST_CASE("oracle evaluators") {
  double z[3] = {0.0, 0.0, 1.0};
  double th[3] = {0.0, 0.0, 1.0};
  double re, im;
  // n = 3, lam = 2 pi, theta.z = 1 -> i
  CHECK(sj_euclidean_oracle(z, th, 3, 2.0 * 3.14159265358979323846, &re, &im) == SJ_OK);
  CHECK(std::abs(re) < 1e-12);
  CHECK(im == doctest::Approx(1.0).epsilon(1e-12));

  double y[2] = {-1.0, 0.0}, yr[2] = {0.0, 0.0}, s;
  CHECK(sj_h3_oracle_phase(1.0, y, yr, 2, &s) == SJ_OK);
  CHECK(s == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(sj_h3_oracle_phase(-1.0, y, yr, 2, &s) == SJ_ERR_INVALID_ARGUMENT);
}

TEST_CASE("scenario round trip through the C surface") {
  const char* text = R"(
[model]
id = FlatEuclidean
dim = 3
[task]
kind = SojournTable
[points]
z = 1 0 0
dir = 0 1 0
[output]
prefix = capi
)";
  sj_scenario* sc = nullptr;
  REQUIRE(sj_scenario_parse_text(text, &sc) == SJ_OK);

  std::string dir = fresh_dir("run");
  sj_report* rep = nullptr;
  REQUIRE(sj_scenario_run(sc, dir.c_str(), 1, 0, &rep) == SJ_OK);
  CHECK(sj_report_pass(rep) == 1);
  CHECK(sj_report_exit_code(rep) == 0);
  CHECK(sj_report_file_count(rep) >= 2);
  bool saw_csv = false;
  for (size_t i = 0; i < sj_report_file_count(rep); ++i)
    if (std::string(sj_report_file(rep, i)).find("capi_sojourn.csv") != std::string::npos)
      saw_csv = true;
  CHECK(saw_csv);
  sj_report_free(rep);
  sj_scenario_free(sc);

  // parse failures surface as SJ_ERR_PARSE with a named key
  sj_scenario* bad = nullptr;
  CHECK(sj_scenario_parse_text("[model]\nwhat = 1\n", &bad) == SJ_ERR_PARSE);
  CHECK(std::string(sj_last_error()).find("what") != std::string::npos);

  CHECK(sj_scenario_parse_file("/nonexistent/path.scn", &bad) == SJ_ERR_IO);
}

TEST_CASE("null arguments are rejected") {
  CHECK(sj_model_create(nullptr, 3, nullptr, nullptr, 0, 0.0, nullptr) ==
        SJ_ERR_INVALID_ARGUMENT);
  CHECK(sj_sojourn(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr) ==
        SJ_ERR_INVALID_ARGUMENT);
  CHECK(sj_branches_count(nullptr) == 0);
  CHECK(sj_report_file(nullptr, 0) == nullptr);
}
