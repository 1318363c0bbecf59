#include "sojourn/sojourn_c.h"

#include <cstring>
#include <string>

#include "sojourn/branches.hpp"
#include "sojourn/scenario.hpp"
#include "sojourn/synthesis.hpp"

using namespace sojourn;

struct sj_model {
  Model model;
};
struct sj_branches {
  BranchSet set;
  int n = 0;
};
struct sj_scenario {
  Scenario sc;
};
struct sj_report {
  RunReport rep;
  std::vector<std::string> metric_names;
};

namespace {

thread_local std::string g_last_error;

sj_status status_of(const Error& e) {
  switch (e.code()) {
    case Err::ParseError: return SJ_ERR_PARSE;
    case Err::ValidationError:
    case Err::UnknownModel:
    case Err::ParamOutOfRange: return SJ_ERR_VALIDATION;
    case Err::Trapped: return SJ_ERR_TRAPPED;
    case Err::IoError: return SJ_ERR_IO;
    default: return SJ_ERR_NUMERIC;
  }
}

template <class F>
sj_status guarded(F&& f) {
  try {
    f();
    return SJ_OK;
  } catch (const Error& e) {
    g_last_error = std::string(err_name(e.code())) + ": " + e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SJ_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SJ_ERR_INTERNAL;
  }
}

Vecd to_vec(const double* p, int n) {
  Vecd v(n);
  for (int i = 0; i < n; ++i) v[i] = p[i];
  return v;
}

}  // namespace

extern "C" {

const char* sj_version(void) { return "0.1.0"; }

const char* sj_last_error(void) { return g_last_error.c_str(); }

sj_status sj_model_create(const char* id, int dim, const char* const* param_names,
                          const double* param_values, size_t nparams, double collar_x0,
                          sj_model** out) {
  if (!id || !out) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    ModelSpec spec;
    std::string sid(id);
    if (sid == "FlatEuclidean") spec.id = ModelId::FlatEuclidean;
    else if (sid == "HyperbolicHn") spec.id = ModelId::HyperbolicHn;
    else if (sid == "PerturbedScattering") spec.id = ModelId::PerturbedScattering;
    else if (sid == "PerturbedAH") spec.id = ModelId::PerturbedAH;
    else throw Error(Err::UnknownModel, "unknown model id '" + sid + "'");
    spec.dim = dim;
    for (size_t i = 0; i < nparams; ++i) spec.params[param_names[i]] = param_values[i];
    if (collar_x0 > 0.0) spec.collar_x0 = collar_x0;
    *out = new sj_model{Model::make(spec)};
  });
}

void sj_model_free(sj_model* m) { delete m; }

int sj_model_dim(const sj_model* m) { return m ? m->model.dim() : 0; }

sj_status sj_sojourn(const sj_model* m, const double* z, const double* dir, double* s,
                     double* sigma, double* y, double* eta, double* err) {
  if (!m || !z || !dir) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    int n = m->model.dim();
    Vecd zv = to_vec(z, n), dv = to_vec(dir, n);
    double nd = m->model.covector_norm(zv, dv);
    if (!(nd > 0.0)) throw Error(Err::ValidationError, "zero direction");
    for (int i = 0; i < n; ++i) dv[i] /= nd;
    GeodesicPath p = integrate_geodesic(m->model, zv, dv);
    if (p.status != PathStatus::ReachedBoundary)
      throw Error(Err::Trapped, "geodesic did not reach the boundary chart");
    BoundaryLimit lim = boundary_limits(m->model, p);
    if (s) *s = lim.s;
    if (sigma) *sigma = lim.sigma;
    for (int i = 0; i < n - 1; ++i) {
      if (y) y[i] = lim.y[i];
      if (eta) eta[i] = lim.eta[i];
    }
    if (err) *err = lim.err;
  });
}

sj_status sj_branches_find(const sj_model* m, const double* z, const double* y_target,
                           int multistart, sj_branches** out) {
  if (!m || !z || !y_target || !out) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    int n = m->model.dim();
    BranchOptions opts;
    opts.multistart = multistart;
    auto* b = new sj_branches;
    b->n = n;
    try {
      b->set = find_branches(m->model, to_vec(z, n), to_vec(y_target, n - 1), opts);
    } catch (...) {
      delete b;
      throw;
    }
    *out = b;
  });
}

void sj_branches_free(sj_branches* b) { delete b; }

int sj_branches_count(const sj_branches* b) { return b ? int(b->set.branches.size()) : 0; }

sj_status sj_branches_get(const sj_branches* b, int index, double* dir, double* s, double* sigma,
                          double* eta, double* jacobian, int* conj_count, int* nondegenerate,
                          double* residual) {
  if (!b || index < 0 || index >= int(b->set.branches.size())) return SJ_ERR_INVALID_ARGUMENT;
  const Branch& br = b->set.branches[index];
  if (dir)
    for (int i = 0; i < b->n; ++i) dir[i] = br.dir[i];
  if (s) *s = br.limit.s;
  if (sigma) *sigma = br.limit.sigma;
  if (eta)
    for (int i = 0; i < b->n - 1; ++i) eta[i] = br.limit.eta[i];
  if (jacobian) *jacobian = br.jacobian;
  if (conj_count) *conj_count = br.conj_count;
  if (nondegenerate) *nondegenerate = br.nondegenerate ? 1 : 0;
  if (residual) *residual = br.newton_residual;
  return SJ_OK;
}

sj_status sj_euclidean_oracle(const double* z, const double* theta, int n, double lam, double* re,
                              double* im) {
  if (!z || !theta || n < 2 || n > 3) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    Cplx v = euclidean_oracle(to_vec(z, n), to_vec(theta, n), lam, n);
    if (re) *re = v.real();
    if (im) *im = v.imag();
  });
}

sj_status sj_h3_oracle_phase(double x, const double* y, const double* y_ref, int bdim,
                             double* s_out) {
  if (!y || !y_ref || bdim < 1 || bdim > 2 || !(x > 0.0)) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    double s = h3_oracle_phase(x, to_vec(y, bdim), to_vec(y_ref, bdim));
    if (s_out) *s_out = s;
  });
}

sj_status sj_scenario_parse_file(const char* path, sj_scenario** out) {
  if (!path || !out) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] { *out = new sj_scenario{parse_scenario_file(path)}; });
}

sj_status sj_scenario_parse_text(const char* text, sj_scenario** out) {
  if (!text || !out) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] { *out = new sj_scenario{parse_scenario(text)}; });
}

void sj_scenario_free(sj_scenario* s) { delete s; }

sj_status sj_scenario_run(const sj_scenario* s, const char* out_dir, int threads, int verbose,
                          sj_report** out) {
  if (!s || !out_dir || !out) return SJ_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    auto* r = new sj_report;
    try {
      r->rep = run_scenario(s->sc, out_dir, threads, verbose != 0);
    } catch (...) {
      delete r;
      throw;
    }
    for (const auto& kv : r->rep.metrics) r->metric_names.push_back(kv.first);
    *out = r;
  });
}

void sj_report_free(sj_report* r) { delete r; }

int sj_report_exit_code(const sj_report* r) { return r ? r->rep.exit_code : 3; }

int sj_report_pass(const sj_report* r) { return r && r->rep.pass ? 1 : 0; }

size_t sj_report_file_count(const sj_report* r) { return r ? r->rep.files_written.size() : 0; }

const char* sj_report_file(const sj_report* r, size_t i) {
  if (!r || i >= r->rep.files_written.size()) return nullptr;
  return r->rep.files_written[i].c_str();
}

size_t sj_report_metric_count(const sj_report* r) { return r ? r->metric_names.size() : 0; }

const char* sj_report_metric_name(const sj_report* r, size_t i) {
  if (!r || i >= r->metric_names.size()) return nullptr;
  return r->metric_names[i].c_str();
}

double sj_report_metric_value(const sj_report* r, size_t i) {
  if (!r || i >= r->metric_names.size()) return 0.0;
  return r->rep.metrics.at(r->metric_names[i]);
}

}  // extern "C"
