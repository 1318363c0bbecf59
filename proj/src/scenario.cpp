#include "sojourn/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sojourn/csv.hpp"

namespace sojourn {

using nlohmann::json;

const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::SojournTable: return "SojournTable";
    case TaskKind::BranchSearch: return "BranchSearch";
    case TaskKind::KernelSynthesis: return "KernelSynthesis";
    case TaskKind::OracleCompare: return "OracleCompare";
    case TaskKind::PdeCrossCheck: return "PdeCrossCheck";
    case TaskKind::CatalogValidate: return "CatalogValidate";
  }
  return "?";
}

const char* model_name(ModelId m) {
  switch (m) {
    case ModelId::FlatEuclidean: return "FlatEuclidean";
    case ModelId::HyperbolicHn: return "HyperbolicHn";
    case ModelId::PerturbedScattering: return "PerturbedScattering";
    case ModelId::PerturbedAH: return "PerturbedAH";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void parse_fail(int line, int col, const std::string& msg) {
  std::ostringstream os;
  os << "parse error at line " << line << ", column " << col << ": " << msg;
  throw Error(Err::ParseError, os.str());
}

double to_double(const std::string& v, int line) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) parse_fail(line, 1, "trailing characters in number '" + v + "'");
    return d;
  } catch (const std::invalid_argument&) {
    parse_fail(line, 1, "expected a number, got '" + v + "'");
  } catch (const std::out_of_range&) {
    parse_fail(line, 1, "number out of range: '" + v + "'");
  }
}

std::vector<Vecd> parse_vectors(const std::string& v, int line) {
  std::vector<Vecd> out;
  std::stringstream groups(v);
  std::string grp;
  while (std::getline(groups, grp, ';')) {
    grp = trim(grp);
    if (grp.empty()) continue;
    std::stringstream ss(grp);
    std::vector<double> xs;
    std::string tok;
    while (ss >> tok) xs.push_back(to_double(tok, line));
    if (xs.empty() || xs.size() > 3) parse_fail(line, 1, "vector needs 1..3 components");
    Vecd w(int(xs.size()));
    for (size_t i = 0; i < xs.size(); ++i) w[int(i)] = xs[i];
    out.push_back(w);
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  Scenario sc;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::string section;
  bool lambda_seen = false;

  while (std::getline(in, raw)) {
    ++line;
    std::string l = raw;
    size_t hash = l.find('#');
    if (hash != std::string::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;

    if (l.front() == '[') {
      if (l.back() != ']') parse_fail(line, 1, "unterminated section header");
      section = trim(l.substr(1, l.size() - 2));
      static const char* known[] = {"model", "task", "points", "lambda", "mollifier", "pde",
                                    "output"};
      if (std::find_if(std::begin(known), std::end(known),
                       [&](const char* k) { return section == k; }) == std::end(known))
        parse_fail(line, 2, "unknown section '" + section + "'");
      continue;
    }

    size_t eq = l.find('=');
    if (eq == std::string::npos) parse_fail(line, 1, "expected key = value");
    std::string key = trim(l.substr(0, eq));
    std::string val = trim(l.substr(eq + 1));
    int col = int(raw.find(key)) + 1;
    if (section.empty()) parse_fail(line, col, "key outside any [section]");

    auto unknown_key = [&]() { parse_fail(line, col, "unknown key '" + key + "' in [" + section + "]"); };

    if (section == "model") {
      if (key == "id") {
        if (val == "FlatEuclidean") sc.model.id = ModelId::FlatEuclidean;
        else if (val == "HyperbolicHn") sc.model.id = ModelId::HyperbolicHn;
        else if (val == "PerturbedScattering") sc.model.id = ModelId::PerturbedScattering;
        else if (val == "PerturbedAH") sc.model.id = ModelId::PerturbedAH;
        else parse_fail(line, col, "unknown model id '" + val + "'");
      } else if (key == "dim") {
        sc.model.dim = int(to_double(val, line));
      } else if (key == "a" || key == "w" || key == "shell_lo" || key == "shell_hi") {
        sc.model.params[key] = to_double(val, line);
      } else if (key == "collar_x0") {
        sc.model.collar_x0 = to_double(val, line);
      } else {
        unknown_key();
      }
    } else if (section == "task") {
      if (key == "kind") {
        if (val == "SojournTable") sc.task = TaskKind::SojournTable;
        else if (val == "BranchSearch") sc.task = TaskKind::BranchSearch;
        else if (val == "KernelSynthesis") sc.task = TaskKind::KernelSynthesis;
        else if (val == "OracleCompare") sc.task = TaskKind::OracleCompare;
        else if (val == "PdeCrossCheck") sc.task = TaskKind::PdeCrossCheck;
        else if (val == "CatalogValidate") sc.task = TaskKind::CatalogValidate;
        else parse_fail(line, col, "unknown task kind '" + val + "'");
      } else if (key == "seed") {
        sc.seed = std::uint64_t(to_double(val, line));
      } else if (key == "multistart") {
        sc.multistart = int(to_double(val, line));
      } else {
        unknown_key();
      }
    } else if (section == "points") {
      std::vector<Vecd> vs = parse_vectors(val, line);
      if (key == "z") sc.zs.insert(sc.zs.end(), vs.begin(), vs.end());
      else if (key == "dir") sc.dirs.insert(sc.dirs.end(), vs.begin(), vs.end());
      else if (key == "y") sc.ys.insert(sc.ys.end(), vs.begin(), vs.end());
      else unknown_key();
    } else if (section == "lambda") {
      lambda_seen = true;
      if (key == "lo") sc.lambda.lo = to_double(val, line);
      else if (key == "hi") sc.lambda.hi = to_double(val, line);
      else if (key == "count") sc.lambda.count = int(to_double(val, line));
      else unknown_key();
    } else if (section == "mollifier") {
      if (key == "w") sc.mollifier.w = to_double(val, line);
      else unknown_key();
    } else if (section == "pde") {
      if (key == "r0") sc.pulse.r0 = to_double(val, line);
      else if (key == "width") sc.pulse.width = to_double(val, line);
      else if (key == "amplitude") sc.pulse.amplitude = to_double(val, line);
      else if (key == "in_center") sc.pulse.in_center = to_double(val, line);
      else if (key == "in_width") sc.pulse.in_width = to_double(val, line);
      else if (key == "s_lo") sc.pde_grid.s_lo = to_double(val, line);
      else if (key == "s_hi") sc.pde_grid.s_hi = to_double(val, line);
      else if (key == "ds") sc.pde_grid.ds = to_double(val, line);
      else if (key == "x_max") sc.pde_grid.x_max = to_double(val, line);
      else if (key == "nx") sc.pde_grid.nx = int(to_double(val, line));
      else if (key == "ell") sc.pde_grid.mode_ell = int(to_double(val, line));
      else unknown_key();
    } else if (section == "output") {
      if (key == "prefix") sc.out_prefix = val;
      else if (key == "paths") sc.export_paths = to_double(val, line) != 0.0;
      else if (key == "snapshots") sc.snapshot_stride = int(to_double(val, line));
      else unknown_key();
    }
  }
  (void)lambda_seen;

  // task requirements
  std::vector<std::string> missing;
  auto need = [&](bool ok, const char* what) {
    if (!ok) missing.push_back(what);
  };
  switch (sc.task) {
    case TaskKind::SojournTable:
      need(!sc.zs.empty(), "points.z");
      need(!sc.dirs.empty(), "points.dir");
      break;
    case TaskKind::BranchSearch:
    case TaskKind::KernelSynthesis:
      need(!sc.zs.empty(), "points.z");
      need(!sc.ys.empty(), "points.y");
      break;
    case TaskKind::OracleCompare:
      if (sc.model.id == ModelId::FlatEuclidean) {
        need(!sc.zs.empty(), "points.z");
        need(!sc.dirs.empty(), "points.dir");
      } else if (sc.model.id == ModelId::HyperbolicHn) {
        need(!sc.zs.empty(), "points.z");
        need(!sc.ys.empty(), "points.y");
      } else {
        throw Error(Err::ValidationError,
                    "OracleCompare supports FlatEuclidean and HyperbolicHn only");
      }
      break;
    case TaskKind::PdeCrossCheck:
    case TaskKind::CatalogValidate:
      break;
  }
  if (!missing.empty()) {
    std::string m = "missing required fields:";
    for (const std::string& s : missing) m += " " + s;
    throw Error(Err::ValidationError, m);
  }

  // canonical echo for the metadata sidecars
  json echo;
  echo["model"] = {{"id", model_name(sc.model.id)},
                   {"dim", sc.model.dim},
                   {"collar_x0", sc.model.collar_x0},
                   {"params", sc.model.params}};
  echo["task"] = {{"kind", task_name(sc.task)}, {"seed", sc.seed}, {"multistart", sc.multistart}};
  auto vecs = [](const std::vector<Vecd>& vs) {
    json a = json::array();
    for (const Vecd& v : vs) {
      json e = json::array();
      for (int i = 0; i < v.size(); ++i) e.push_back(v[i]);
      a.push_back(e);
    }
    return a;
  };
  echo["points"] = {{"z", vecs(sc.zs)}, {"dir", vecs(sc.dirs)}, {"y", vecs(sc.ys)}};
  echo["lambda"] = {{"lo", sc.lambda.lo}, {"hi", sc.lambda.hi}, {"count", sc.lambda.count}};
  echo["mollifier"] = {{"w", sc.mollifier.w}};
  echo["pde"] = {{"r0", sc.pulse.r0},     {"width", sc.pulse.width},
                 {"amplitude", sc.pulse.amplitude}, {"in_center", sc.pulse.in_center},
                 {"in_width", sc.pulse.in_width},   {"s_lo", sc.pde_grid.s_lo},
                 {"s_hi", sc.pde_grid.s_hi},        {"ds", sc.pde_grid.ds},
                 {"x_max", sc.pde_grid.x_max},      {"nx", sc.pde_grid.nx},
                 {"ell", sc.pde_grid.mode_ell}};
  echo["output"] = {{"prefix", sc.out_prefix},
                    {"paths", sc.export_paths},
                    {"snapshots", sc.snapshot_stride}};
  sc.resolved_text = echo.dump(2);
  return sc;
}

Scenario parse_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::IoError, "cannot read scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

// bounded worker pool mapping indices [0, count) deterministically
void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&]() {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct Outputs {
  std::filesystem::path dir;
  std::string prefix;
  RunReport* report;

  std::string path(const std::string& suffix) const {
    return (dir / (prefix + suffix)).string();
  }
  void wrote(const std::string& p) { report->files_written.push_back(p); }
};

void write_meta(const Outputs& out, const Scenario& sc, const json& extra) {
  json meta = json::parse(sc.resolved_text);
  for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  std::string p = out.path("_meta.json");
  std::ofstream f(p);
  f << meta.dump(2) << "\n";
  const_cast<Outputs&>(out).wrote(p);
}

Vecd normalize_dir(const Model& model, const Vecd& z, const Vecd& dir) {
  Vecd d = dir;
  double n = model.covector_norm(z, d);
  if (!(n > 0.0)) throw Error(Err::ValidationError, "zero direction");
  for (int i = 0; i < d.size(); ++i) d[i] /= n;
  return d;
}

std::string trace_csv(const Outputs& out, const KernelTrace& t, const std::string& suffix) {
  std::string p = out.path(suffix);
  CsvWriter csv(p, {"lambda", "re", "im", "abs", "unwrapped_phase"});
  double prev = 0.0, offset = 0.0;
  for (size_t i = 0; i < t.values.size(); ++i) {
    double a = std::arg(t.values[i]);
    if (i > 0) {
      double d = a - prev;
      while (d > 3.14159265358979323846) {
        d -= 2 * 3.14159265358979323846;
        offset -= 2 * 3.14159265358979323846;
      }
      while (d < -3.14159265358979323846) {
        d += 2 * 3.14159265358979323846;
        offset += 2 * 3.14159265358979323846;
      }
    }
    prev = a;
    csv.field(t.grid.at(int(i)));
    csv.field(t.values[i].real());
    csv.field(t.values[i].imag());
    csv.field(std::abs(t.values[i]));
    csv.field(a + offset);
    csv.end_row();
  }
  return p;
}

std::string branch_table_string(const Model& model, const BranchSet& set) {
  std::ostringstream os;
  for (const Branch& b : set.branches) {
    for (int i = 0; i < b.dir.size(); ++i) os << format_g17(b.dir[i]) << ",";
    os << format_g17(b.limit.s) << "," << format_g17(b.jacobian) << "," << b.conj_count << ";";
  }
  (void)model;
  return os.str();
}

}  // namespace

RunReport run_scenario(const Scenario& sc, const std::string& out_dir, int threads,
                       bool verbose) {
  RunReport report;
  Outputs out;
  out.dir = out_dir;
  out.prefix = sc.out_prefix;
  out.report = &report;

  std::error_code ec;
  std::filesystem::create_directories(out.dir, ec);
  {
    std::ofstream probe(out.dir / (sc.out_prefix + "_probe.tmp"));
    if (!probe) {
      report.pass = false;
      report.exit_code = 3;
      return report;
    }
  }
  std::filesystem::remove(out.dir / (sc.out_prefix + "_probe.tmp"), ec);

  Model model = Model::make(sc.model);
  int n = model.dim();

  std::ofstream log(out.path("_log.jsonl"));
  out.wrote(out.path("_log.jsonl"));
  auto log_record = [&](const json& j) { log << j.dump() << "\n"; };

  auto fail_metric = [&](const std::string& name, double value, double bound) {
    report.metrics[name] = value;
    bool ok = value <= bound;
    if (!ok) {
      report.pass = false;
      report.exit_code = 2;
    }
    if (verbose)
      std::fprintf(stderr, "%s: %.3e (bound %.3e) %s\n", name.c_str(), value, bound,
                   ok ? "ok" : "FAIL");
    return ok;
  };

  switch (sc.task) {
    case TaskKind::SojournTable: {
      struct Row {
        Vecd z, dir;
        BoundaryLimit lim;
        std::string status;
        GeodesicPath path;
      };
      int nz = int(sc.zs.size()), nd = int(sc.dirs.size());
      std::vector<Row> rows(size_t(nz) * nd);
      parallel_for(nz * nd, threads, [&](int idx) {
        Row& r = rows[idx];
        r.z = sc.zs[idx / nd];
        r.dir = normalize_dir(model, r.z, sc.dirs[idx % nd]);
        try {
          GeodesicPath p = integrate_geodesic(model, r.z, r.dir);
          if (p.status == PathStatus::ReachedBoundary) {
            r.lim = boundary_limits(model, p);
            r.status = "ReachedBoundary";
          } else {
            r.status = p.status == PathStatus::Trapped ? "Trapped" : "MaxTime";
          }
          if (sc.export_paths) r.path = std::move(p);
        } catch (const Error& e) {
          r.status = std::string("error:") + err_name(e.code());
        }
      });

      if (sc.export_paths) {
        for (int idx = 0; idx < nz * nd; ++idx) {
          if (rows[idx].path.samples.empty()) continue;
          std::vector<std::string> pc{"param", "chart"};
          for (int i = 0; i < n; ++i) pc.push_back("q" + std::to_string(i));
          for (int i = 0; i < n; ++i) pc.push_back("p" + std::to_string(i));
          pc.push_back("s");
          pc.push_back("sigma");
          std::string pp = out.path("_path_" + std::to_string(idx) + ".csv");
          CsvWriter pcsv(pp, pc);
          for (const PhaseState& ps : rows[idx].path.samples) {
            pcsv.field(ps.param);
            pcsv.field(ps.chart == ChartId::Interior ? std::string("interior")
                                                     : std::string("collar"));
            for (int i = 0; i < n; ++i) pcsv.field(ps.base[i]);
            for (int i = 0; i < n; ++i) pcsv.field(ps.momentum[i]);
            pcsv.field(ps.s);
            pcsv.field(ps.sigma);
            pcsv.end_row();
          }
          out.wrote(pp);
        }
      }

      std::vector<std::string> cols;
      for (int i = 0; i < n; ++i) cols.push_back("z" + std::to_string(i));
      for (int i = 0; i < n; ++i) cols.push_back("dir" + std::to_string(i));
      cols.push_back("s");
      cols.push_back("sigma");
      for (int i = 0; i < n - 1; ++i) cols.push_back("y" + std::to_string(i));
      for (int i = 0; i < n - 1; ++i) cols.push_back("eta" + std::to_string(i));
      cols.push_back("err");
      cols.push_back("status");
      std::string p = out.path("_sojourn.csv");
      CsvWriter csv(p, cols);
      for (const Row& r : rows) {
        for (int i = 0; i < n; ++i) csv.field(r.z[i]);
        for (int i = 0; i < n; ++i) csv.field(r.dir[i]);
        csv.field(r.lim.s);
        csv.field(r.lim.sigma);
        for (int i = 0; i < n - 1; ++i) csv.field(r.lim.y.size() ? r.lim.y[i] : 0.0);
        for (int i = 0; i < n - 1; ++i) csv.field(r.lim.eta.size() ? r.lim.eta[i] : 0.0);
        csv.field(r.lim.err);
        csv.field(r.status);
        csv.end_row();
        log_record(json{{"record", "sojourn"},
                        {"s", r.lim.s},
                        {"sigma", r.lim.sigma},
                        {"status", r.status}});
      }
      out.wrote(p);
      write_meta(out, sc, json{{"columns", cols}});
      break;
    }

    case TaskKind::BranchSearch: {
      BranchOptions bopts;
      bopts.multistart = sc.multistart;
      int nz = int(sc.zs.size()), ny = int(sc.ys.size());
      std::vector<BranchSet> sets(size_t(nz) * ny);
      std::vector<std::string> errs(size_t(nz) * ny);
      parallel_for(nz * ny, threads, [&](int idx) {
        try {
          sets[idx] = find_branches(model, sc.zs[idx / ny], sc.ys[idx % ny], bopts);
        } catch (const Error& e) {
          errs[idx] = err_name(e.code());
        }
      });

      std::vector<std::string> cols;
      for (int i = 0; i < n; ++i) cols.push_back("z" + std::to_string(i));
      for (int i = 0; i < n - 1; ++i) cols.push_back("ytarget" + std::to_string(i));
      for (int i = 0; i < n; ++i) cols.push_back("dir" + std::to_string(i));
      cols.push_back("s");
      cols.push_back("sigma");
      for (int i = 0; i < n - 1; ++i) cols.push_back("eta" + std::to_string(i));
      cols.push_back("jacobian");
      cols.push_back("conj_count");
      cols.push_back("nondegenerate");
      cols.push_back("residual");
      std::string p = out.path("_branches.csv");
      CsvWriter csv(p, cols);
      for (int idx = 0; idx < nz * ny; ++idx) {
        if (!errs[idx].empty()) {
          log_record(json{{"record", "branch_error"}, {"error", errs[idx]}});
          report.pass = false;
          report.exit_code = 2;
          continue;
        }
        const BranchSet& st = sets[idx];
        for (const Branch& b : st.branches) {
          for (int i = 0; i < n; ++i) csv.field(b.z[i]);
          for (int i = 0; i < n - 1; ++i) csv.field(st.y_target[i]);
          for (int i = 0; i < n; ++i) csv.field(b.dir[i]);
          csv.field(b.limit.s);
          csv.field(b.limit.sigma);
          for (int i = 0; i < n - 1; ++i) csv.field(b.limit.eta[i]);
          csv.field(b.jacobian);
          csv.field(b.conj_count);
          csv.field(b.nondegenerate ? 1 : 0);
          csv.field(b.newton_residual);
          csv.end_row();
          log_record(json{{"record", "branch"},
                          {"s", b.limit.s},
                          {"jacobian", b.jacobian},
                          {"conj_count", b.conj_count},
                          {"nondegenerate", b.nondegenerate},
                          {"residual", b.newton_residual},
                          {"starts", st.meta.starts},
                          {"converged", st.meta.converged},
                          {"deduped", st.meta.deduped}});
        }
      }
      out.wrote(p);
      write_meta(out, sc, json{{"columns", cols}});
      break;
    }

    case TaskKind::KernelSynthesis: {
      BranchOptions bopts;
      bopts.multistart = sc.multistart;
      BranchSet set = find_branches(model, sc.zs[0], sc.ys[0], bopts);
      KernelTrace t = synthesize_trace(model, set, sc.lambda);
      KernelTrace tm = mollify(t, sc.mollifier);
      out.wrote(trace_csv(out, t, "_trace.csv"));
      out.wrote(trace_csv(out, tm, "_trace_moll.csv"));
      std::string hash = fnv1a_hex(branch_table_string(model, set));
      for (const Branch& b : set.branches)
        log_record(json{{"record", "branch"}, {"s", b.limit.s}, {"jacobian", b.jacobian}});
      write_meta(out, sc,
                 json{{"convention",
                       {{"kind", model.kind() == GeometryKind::Scattering ? "scattering" : "ah"},
                        {"n", n},
                        {"prefactor", model.kind() == GeometryKind::Scattering
                                          ? "(lam/2pi i)^((n-1)/2)"
                                          : "(i/2lam)(lam/2pi i)^((n-1)/2)"}}},
                      {"mollifier",
                       {{"w", sc.mollifier.w},
                        {"profile", "c*exp(-1/(1-(s/w)^2)) on |s|<w, integral 1"}}},
                      {"branch_table_hash", hash},
                      {"branch_count", set.branches.size()}});
      break;
    }

    case TaskKind::OracleCompare: {
      if (model.id() == ModelId::FlatEuclidean) {
        double worst = 0.0, worst_m = 0.0;
        for (const Vecd& z : sc.zs)
          for (const Vecd& d0 : sc.dirs) {
            Vecd dir = normalize_dir(model, z, d0);
            GeodesicPath path = integrate_geodesic(model, z, dir);
            BoundaryLimit lim = boundary_limits(model, path);
            BranchOptions bopts;
            bopts.multistart = sc.multistart;
            BranchSet set = find_branches(model, z, lim.y, bopts);
            KernelTrace synth = synthesize_trace(model, set, sc.lambda);
            KernelTrace oracle = synth;
            for (int i = 0; i < sc.lambda.count; ++i)
              oracle.values[i] = std::conj(euclidean_oracle(z, dir, sc.lambda.at(i), n));
            TraceMetrics mm = compare_traces(synth, oracle);
            worst = std::max(worst, mm.rel_l2);
            KernelTrace ms = mollify(synth, sc.mollifier), mo = mollify(oracle, sc.mollifier);
            worst_m = std::max(worst_m, compare_traces(ms, mo).rel_l2);
            log_record(json{{"record", "oracle_compare"},
                            {"rel_l2", mm.rel_l2},
                            {"s", set.branches[0].limit.s}});
          }
        fail_metric("flat_kernel_rel_l2", worst, 1e-9);
        fail_metric("flat_kernel_rel_l2_mollified", worst_m, 1e-9);
      } else {
        double worst_phase = 0.0, worst_exp = 0.0;
        for (const Vecd& z : sc.zs)
          for (const Vecd& y : sc.ys) {
            BranchOptions bopts;
            bopts.multistart = sc.multistart;
            BranchSet set = find_branches(model, z, y, bopts);
            KernelTrace synth = synthesize_trace(model, set, sc.lambda);
            Vecd yz(n - 1);
            for (int i = 0; i < n - 1; ++i) yz[i] = z[1 + i];
            double s_oracle = h3_oracle_phase(z[0], yz, y);
            worst_phase = std::max(worst_phase, std::abs(phase_slope(synth) - s_oracle));
            double expo = 0.5 * (n - 1) - 1.0;
            worst_exp = std::max(worst_exp, std::abs(amplitude_exponent(synth) - expo));
            log_record(json{{"record", "oracle_compare"},
                            {"phase_slope", phase_slope(synth)},
                            {"oracle", s_oracle}});
          }
        fail_metric("ah_phase_slope_err", worst_phase, 1e-5);
        fail_metric("ah_amp_exponent_err", worst_exp, 1e-3);
      }
      write_meta(out, sc, json{{"metrics", report.metrics}});
      break;
    }

    case TaskKind::PdeCrossCheck: {
      ReducedField field = solve_rescaled_wave(model, sc.pde_grid, sc.pulse);
      RadiationTrace tr = extract_radiation_field(field);
      std::string p = out.path("_radiation.csv");
      {
        CsvWriter csv(p, {"s", "value"});
        for (size_t i = 0; i < tr.s_grid.size(); ++i) {
          csv.field(tr.s_grid[i]);
          csv.field(tr.values[i]);
          csv.end_row();
        }
      }
      out.wrote(p);

      if (sc.snapshot_stride > 0) {
        std::string fp = out.path("_field.csv");
        CsvWriter csv(fp, {"s", "x", "v"});
        for (size_t m = 0; m < field.v.size(); m += size_t(sc.snapshot_stride))
          for (int j = 0; j <= sc.pde_grid.nx; ++j) {
            csv.field(field.s_of_step[m]);
            csv.field(j * sc.pde_grid.dx());
            csv.field(field.v[m][j]);
            csv.end_row();
          }
        out.wrote(fp);
      }

      FrontInfo front = front_location(tr);
      // radial sojourns from the flow module: outermost source sphere r = r0
      // (first arrival) and the pulse-center sphere (dominant phase)
      auto radial_sojourn = [&](double r) {
        Vecd z0(n), dir0(n);
        z0[0] = r;
        dir0[0] = 1.0;
        GeodesicPath rp = integrate_geodesic(model, z0, normalize_dir(model, z0, dir0));
        return boundary_limits(model, rp).s;
      };
      double s_radial = radial_sojourn(sc.pulse.r0);
      double s_center = radial_sojourn(sc.pulse.r0 - 0.5 * sc.pulse.width);

      fail_metric("front_vs_minus_r0", std::abs(front.s_front + sc.pulse.r0),
                  2.0 * sc.pde_grid.ds);
      fail_metric("front_vs_flow_sojourn", std::abs(front.s_front - s_radial),
                  2.0 * sc.pde_grid.ds);

      if (model.id() == ModelId::FlatEuclidean) {
        double linf = 0.0, scale = 0.0;
        for (size_t i = 0; i < tr.s_grid.size(); ++i) {
          double o = flat_oracle_trace(sc.pulse, sc.pde_grid.mode_ell, tr.s_grid[i]);
          linf = std::max(linf, std::abs(tr.values[i] - o));
          scale = std::max(scale, std::abs(o));
        }
        fail_metric("trace_vs_oracle_linf_rel", linf / std::max(scale, 1e-300), 1e-3);
      }

      double slope = trace_fourier_phase_slope(tr, front.s_peak - 2.0 * sc.pulse.width,
                                               front.s_peak + 2.0 * sc.pulse.width, 8.0, 40.0, 65);
      fail_metric("fourier_slope_vs_sojourn_rel", std::abs(slope - s_center) / std::abs(s_center),
                  0.05);
      report.metrics["front"] = front.s_front;
      report.metrics["s_radial"] = s_radial;
      report.metrics["fourier_slope"] = slope;
      write_meta(out, sc, json{{"metrics", report.metrics}});
      log_record(json{{"record", "pde"},
                      {"front", front.s_front},
                      {"peak", front.s_peak},
                      {"s_radial", s_radial},
                      {"fourier_slope", slope}});
      break;
    }

    case TaskKind::CatalogValidate: {
      std::mt19937_64 rng(sc.seed);
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      auto rand_collar_y = [&]() {
        Vecd y(n - 1);
        for (int i = 0; i < n - 1; ++i)
          y[i] = (model.kind() == GeometryKind::Scattering && n == 2)
                     ? (2.0 * u01(rng) - 1.0) * 3.0
                     : (2.0 * u01(rng) - 1.0) * 2.0;
        return y;
      };

      // positive definiteness of h and g
      int bad_pd = 0;
      for (int k = 0; k < 10000; ++k) {
        double x = u01(rng) * std::min(model.collar_limit(), 0.6);
        Vecd y = rand_collar_y();
        MetricData h = model.collar_metric(x, y);
        if (!positive_definite(h.components)) ++bad_pd;
      }
      fail_metric("posdef_violations", double(bad_pd), 0.0);

      // chart round trips
      double worst_rt = 0.0;
      for (int k = 0; k < 100; ++k) {
        double x = 0.05 + u01(rng) * (0.9 * model.collar_x0());
        Vecd y = rand_collar_y();
        Vecd xy(n);
        xy[0] = x;
        for (int i = 0; i < n - 1; ++i) xy[1 + i] = y[i];
        Vecd cov(n);
        for (int i = 0; i < n; ++i) cov[i] = 2.0 * u01(rng) - 1.0;
        try {
          ChartPointd pc{ChartId::Collar, xy}, pi, pc2;
          Vecd cov_i, cov_2;
          model.transition(pc, cov, pi, cov_i);
          model.transition(pi, cov_i, pc2, cov_2);
          for (int i = 0; i < n; ++i) {
            worst_rt = std::max(worst_rt, std::abs(pc2.coords[i] - xy[i]));
            worst_rt = std::max(worst_rt, std::abs(cov_2[i] - cov[i]));
          }
        } catch (const Error&) {
          // outside overlap; skip
        }
      }
      fail_metric("chart_roundtrip", worst_rt, 1e-10);

      // nontrapping sample over the unit ball (scattering) / band (AH)
      int trapped = 0, total = 0;
      for (int k = 0; k < 256; ++k) {
        Vecd z(n);
        if (model.kind() == GeometryKind::Scattering) {
          for (int i = 0; i < n; ++i) z[i] = 2.0 * u01(rng) - 1.0;
          if (norm2(z) < 0.05) z[0] += 0.2;
        } else {
          z[0] = 0.3 + 2.0 * u01(rng);
          for (int i = 1; i < n; ++i) z[i] = 2.0 * u01(rng) - 1.0;
        }
        Vecd v(n);
        double nv = 0.0;
        for (int i = 0; i < n; ++i) {
          v[i] = 2.0 * u01(rng) - 1.0;
          nv += v[i] * v[i];
        }
        if (nv < 1e-3) v[0] = 1.0;
        // keep clear of the stereographic chart cap (coverage, not trapping)
        if (model.kind() == GeometryKind::Scattering && n == 3 && v[2] < -0.5 * std::sqrt(nv))
          v[2] = -v[2];
        Matd g = model.interior_metric_components(Vec<double>(z));
        Vecd zeta = mul(g, v);
        zeta = normalize_dir(model, z, zeta);
        ++total;
        try {
          GeodesicPath path = integrate_geodesic(model, z, zeta);
          if (path.status == PathStatus::Trapped) ++trapped;
        } catch (const Error&) {
          ++trapped;
        }
      }
      fail_metric("trapped_fraction", double(trapped) / double(total), 0.0);
      write_meta(out, sc, json{{"metrics", report.metrics}});
      break;
    }
  }

  // summary file
  {
    json sum;
    sum["task"] = task_name(sc.task);
    sum["pass"] = report.pass;
    sum["exit_code"] = report.exit_code;
    sum["metrics"] = report.metrics;
    std::string p = out.path("_summary.json");
    std::ofstream f(p);
    f << sum.dump(2) << "\n";
    out.wrote(p);
  }
  return report;
}

}  // namespace sojourn
