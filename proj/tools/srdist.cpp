// Command-line front end: every subcommand resolves its parameters as
// defaults < config file < flags, seeds all randomness explicitly, embeds
// {version, model hash, seed, grid} in each report, and exits with
// 0 = pass, 1 = violation/witness, 2 = usage or config error,
// 3 = numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "srdist/distortion.hpp"
#include "srdist/io.hpp"

namespace {

using namespace srdist;

constexpr double kPi = 3.14159265358979323846;

// One subcommand's option set: string-typed flags overlaid on the config
// file named by --config.  Structured config keys (a.box, bound.x_range)
// are marked used as they are consumed; leftovers are rejected.
struct Cmd {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> vals;
  Config cfg;
  std::set<std::string> used;

  void opt(const std::string& name, const std::string& help) {
    app->add_option("--" + name, vals[name], help);
  }

  void load_config() {
    if (app->count("--config")) {
      cfg = Config::load(vals.at("config"));
      if (cfg.has("config"))
        throw InputError("config: files cannot nest another config");
    }
  }

  std::optional<std::string> raw(const std::string& name) {
    if (app->count("--" + name)) return vals.at(name);
    if (cfg.has(name)) {
      used.insert(name);
      const ConfigNode& n = cfg.at(name);
      if (n.kind() == ConfigNode::Kind::String) return n.text();
      if (n.kind() == ConfigNode::Kind::Number)
        return format_double(n.number());
      throw InputError("config: key " + name + " must be a scalar");
    }
    return std::nullopt;
  }

  std::string str(const std::string& name, const std::string& def) {
    return raw(name).value_or(def);
  }

  std::string str_req(const std::string& name) {
    auto v = raw(name);
    if (!v) throw InputError("missing required option --" + name);
    return *v;
  }

  static double parse_num(const std::string& name, const std::string& s) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (!end || *end != '\0' || s.empty())
      throw InputError("option --" + name + ": bad number '" + s + "'");
    return v;
  }

  double num(const std::string& name, double def) {
    auto v = raw(name);
    return v ? parse_num(name, *v) : def;
  }

  double num_req(const std::string& name) {
    return parse_num(name, str_req(name));
  }

  long long integer(const std::string& name, long long def) {
    double v = num(name, static_cast<double>(def));
    long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
      throw InputError("option --" + name + " must be an integer");
    return n;
  }

  std::uint64_t seed() {
    auto v = raw("seed");
    if (!v) return 0;
    char* end = nullptr;
    std::uint64_t s = std::strtoull(v->c_str(), &end, 10);
    if (!end || *end != '\0')
      throw InputError("option --seed: bad unsigned integer '" + *v + "'");
    return s;
  }

  std::vector<double> nums(const std::string& name,
                           std::vector<double> def = {}) {
    if (app->count("--" + name)) {
      std::vector<double> out;
      std::stringstream ss(vals.at(name));
      std::string item;
      while (std::getline(ss, item, ','))
        out.push_back(parse_num(name, item));
      if (out.empty())
        throw InputError("option --" + name + ": empty list");
      return out;
    }
    if (cfg.has(name)) {
      used.insert(name);
      const ConfigNode& n = cfg.at(name);
      if (n.kind() == ConfigNode::Kind::Number) return {n.number()};
      return n.numbers();
    }
    return def;
  }

  std::vector<double> nums_req(const std::string& name) {
    std::vector<double> v = nums(name);
    if (v.empty()) throw InputError("missing required option --" + name);
    return v;
  }

  VectorXd point(const std::string& name) {
    std::vector<double> v = nums_req(name);
    return Eigen::Map<VectorXd>(v.data(), v.size());
  }

  Model model() { return model_from_text(str_req("model")); }

  SetSpec set_spec(const std::string& prefix) {
    for (const char* leaf : {".box", ".ball", ".points"})
      if (cfg.has(prefix + leaf)) used.insert(prefix + leaf);
    return set_spec_from_config(cfg, prefix);
  }

  GriddedFunction gridded(const std::string& prefix) {
    for (const char* leaf : {".box", ".shape", ".values"})
      if (cfg.has(prefix + leaf)) used.insert(prefix + leaf);
    return gridded_from_config(cfg, prefix);
  }

  void check_unused() {
    for (const auto& e : cfg.entries())
      if (!vals.count(e.first) && !used.count(e.first))
        throw InputError("config: unknown key " + e.first);
  }

  void emit(const std::string& content) {
    std::string path = str("out", "-");
    if (path == "-") {
      std::cout << content;
      return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot open output file " + path);
    out << content;
  }
};

void add_common(Cmd& c, bool with_model = true) {
  c.opt("config", "configuration file (defaults < file < flags)");
  c.opt("seed", "64-bit seed recorded in the output");
  c.opt("out", "output path, '-' for stdout");
  if (with_model)
    c.opt("model", "heisenberg | grushin | path to a model file");
}

std::string format_output(Cmd& c, const std::string& def_fmt,
                          bool csv_available) {
  std::string fmt = c.str("format", def_fmt);
  if (fmt != "csv" && fmt != "json")
    throw InputError("option --format must be csv or json");
  if (fmt == "csv" && !csv_available)
    throw InputError("this subcommand emits json only");
  return fmt;
}

JsonValue vector_json(const VectorXd& v) {
  JsonValue arr = JsonValue::array();
  for (int i = 0; i < v.size(); ++i) arr.push(JsonValue::number(v[i]));
  return arr;
}

std::string describe_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------

int run_geodesic(Cmd& c) {
  Model model = c.model();
  VectorXd x = c.point("from"), y = c.point("to");
  InverseExpOptions opt;
  opt.starts = static_cast<int>(c.integer("starts", opt.starts));
  opt.tol = c.num("tol", opt.tol);
  opt.max_iter = static_cast<int>(c.integer("max-iter", opt.max_iter));
  opt.seed = c.seed();
  c.check_unused();

  InverseExpResult res = inverse_exp(model, x, y, opt);
  const GeodesicSolution* best = &res.solutions.front();
  for (const GeodesicSolution& s : res.solutions)
    if (s.minimizing) {
      best = &s;
      break;
    }

  std::ostringstream grid;
  grid << "starts=" << opt.starts << ";tol=" << format_double(opt.tol);
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, opt.seed, grid.str()));
  out.set("lambda", vector_json(best->lambda));
  out.set("length", JsonValue::number(best->length));
  out.set("residual", JsonValue::number(best->residual));
  out.set("t_cut", JsonValue::number(best->t_cut));
  out.set("multiple_minimizers", JsonValue::boolean(res.multiple_minimizers));
  c.emit(out.dump());
  return 0;
}

int run_distortion(Cmd& c) {
  Model model = c.model();
  VectorXd x = c.point("x"), lam = c.point("lambda");
  std::string method = c.str("method", "closed");
  double t_min = c.num("t-min", 0.0), t_max = c.num("t-max", 1.0);
  int count = static_cast<int>(c.integer("t-count", 101));
  if (count < 1 || t_max < t_min)
    throw InputError("distortion: need t-min <= t-max and t-count >= 1");
  std::string fmt = format_output(c, "csv", true);
  c.check_unused();

  std::vector<double> ts;
  for (int i = 0; i < count; ++i)
    ts.push_back(count == 1
                     ? t_min
                     : t_min + (t_max - t_min) * i / (count - 1));
  DistortionCurve curve = distortion_curve(model, x, lam, ts, method);

  std::ostringstream grid;
  grid << "t=[" << format_double(t_min) << "," << format_double(t_max)
       << "]x" << count;
  if (fmt == "csv") {
    std::ostringstream os;
    os << csv_meta_line(model, c.seed(), grid.str()) << "\n";
    os << "t,beta,method\n";
    for (std::size_t i = 0; i < curve.t.size(); ++i)
      os << format_double(curve.t[i]) << ',' << format_double(curve.beta[i])
         << ',' << curve.method << '\n';
    c.emit(os.str());
  } else {
    JsonValue rows = JsonValue::array();
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
      JsonValue row = JsonValue::object();
      row.set("t", JsonValue::number(curve.t[i]));
      row.set("beta", JsonValue::number(curve.beta[i]));
      rows.push(std::move(row));
    }
    JsonValue out = JsonValue::object();
    out.set("meta", report_meta(model, c.seed(), grid.str()));
    out.set("method", JsonValue::string(curve.method));
    out.set("rows", std::move(rows));
    c.emit(out.dump());
  }
  return 0;
}

int run_conjugate(Cmd& c) {
  Model model = c.model();
  VectorXd lam = c.point("lambda");
  VectorXd x = VectorXd::Zero(model.dim());
  if (c.raw("x")) x = c.point("x");
  double horizon = c.num("horizon", 10.0);
  c.check_unused();

  std::optional<double> t_conj = conjugate_time(model, x, lam, horizon);
  std::optional<double> t_cut;
  try {
    double tc = cut_time(model, lam);
    if (std::isfinite(tc)) t_cut = tc;
  } catch (const CapabilityError&) {
  }

  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, c.seed(),
                              "horizon=" + format_double(horizon)));
  out.set("t_conjugate",
          t_conj ? JsonValue::number(*t_conj) : JsonValue());
  out.set("t_cut", t_cut ? JsonValue::number(*t_cut) : JsonValue());
  c.emit(out.dump());
  return 0;
}

BoundGrid bound_grid_from(Cmd& c, const Model& model) {
  if (auto g = c.raw("grid")) {
    std::vector<int> dims;
    std::stringstream ss(*g);
    std::string item;
    while (std::getline(ss, item, 'x'))
      dims.push_back(static_cast<int>(Cmd::parse_num("grid", item)));
    double delta = c.num("delta", 1e-3);
    if (model.kind() == ModelKind::Heisenberg3 && dims.size() == 2)
      return heisenberg_bound_grid(dims[0], dims[1], delta);
    if (model.kind() == ModelKind::Grushin2 && dims.size() == 4)
      return grushin_bound_grid(dims[0], dims[1], dims[2], dims[3], delta);
    throw InputError(
        "grid shorthand is WxT for heisenberg and XxUxVxT for grushin; "
        "other models take bound.* config tables");
  }
  BoundGrid grid;
  for (const char* key : {"bound.x_range", "bound.x_count", "bound.lam_range",
                          "bound.lam_count", "bound.t_count"})
    if (c.cfg.has(key)) c.used.insert(key);
  for (const ConfigNode& row : c.cfg.at("bound.x_range").items()) {
    VectorXd pair = row.vector();
    if (pair.size() != 2)
      throw InputError("bound.x_range rows must be [lo, hi]");
    grid.x_ranges.emplace_back(pair[0], pair[1]);
  }
  for (double v : c.cfg.at("bound.x_count").numbers())
    grid.x_counts.push_back(static_cast<int>(v));
  for (const ConfigNode& row : c.cfg.at("bound.lam_range").items()) {
    VectorXd pair = row.vector();
    if (pair.size() != 2)
      throw InputError("bound.lam_range rows must be [lo, hi]");
    grid.lam_ranges.emplace_back(pair[0], pair[1]);
  }
  for (double v : c.cfg.at("bound.lam_count").numbers())
    grid.lam_counts.push_back(static_cast<int>(v));
  grid.t_count = static_cast<int>(c.cfg.at("bound.t_count").integer());
  return grid;
}

JsonValue violation_json(const BoundViolation& v) {
  JsonValue row = JsonValue::object();
  row.set("x", vector_json(v.x));
  row.set("lambda", vector_json(v.lambda));
  row.set("t", JsonValue::number(v.t));
  row.set("beta", JsonValue::number(v.beta));
  row.set("tn", JsonValue::number(v.tn));
  return row;
}

int run_verify_bound(Cmd& c) {
  Model model = c.model();
  double exponent = c.num_req("exponent");
  std::uint64_t seed = c.seed();
  BoundGrid grid = bound_grid_from(c, model);
  c.check_unused();

  BoundReport report = verify_power_bound(model, exponent, grid, seed);

  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, seed, report.grid));
  out.set("exponent", JsonValue::number(report.exponent));
  out.set("min_ratio", JsonValue::number(report.min_ratio));
  out.set("min_diff", JsonValue::number(report.min_diff));
  out.set("violations_total",
          JsonValue::integer(static_cast<long long>(report.violations.size())));
  JsonValue shown = JsonValue::array();
  for (std::size_t i = 0; i < report.violations.size() && i < 32; ++i)
    shown.push(violation_json(report.violations[i]));
  out.set("violations", std::move(shown));
  out.set("pass", JsonValue::boolean(report.pass));
  c.emit(out.dump());
  return report.pass ? 0 : 1;
}

int run_sharpness(Cmd& c) {
  Model model = c.model();
  double exponent = c.num_req("exponent");
  c.check_unused();

  std::optional<BoundViolation> witness = sharpness_search(model, exponent);
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, c.seed(), "builtin-sweep"));
  out.set("exponent", JsonValue::number(exponent));
  if (witness) {
    JsonValue w = violation_json(*witness);
    w.set("gap", JsonValue::number(witness->beta - witness->tn));
    out.set("witness", std::move(w));
  } else {
    out.set("witness", JsonValue());
  }
  c.emit(out.dump());
  return witness ? 1 : 0;
}

int run_wbar(Cmd& c) {
  double z_min = c.num("z-min", 0.0), z_max = c.num("z-max", kPi);
  int count = static_cast<int>(c.integer("count", 1000));
  if (count < 2 || z_max <= z_min)
    throw InputError("wbar: need z-min < z-max and count >= 2");
  std::string fmt = format_output(c, "csv", true);
  c.check_unused();

  std::ostringstream grid;
  grid << "z=[" << format_double(z_min) << "," << format_double(z_max)
       << "]x" << count;
  Model heis = Model::heisenberg3();  // hash anchor; the scan is model-free
  if (fmt == "csv") {
    std::ostringstream os;
    os << csv_meta_line(heis, c.seed(), grid.str()) << "\n";
    os << "z,wbar,taylor_bound\n";
    for (int i = 0; i < count; ++i) {
      double z = z_min + (z_max - z_min) * i / (count - 1);
      os << format_double(z) << ',' << format_double(wbar(z)) << ','
         << format_double(wbar_taylor_bound(z)) << '\n';
    }
    c.emit(os.str());
  } else {
    JsonValue rows = JsonValue::array();
    for (int i = 0; i < count; ++i) {
      double z = z_min + (z_max - z_min) * i / (count - 1);
      JsonValue row = JsonValue::object();
      row.set("z", JsonValue::number(z));
      row.set("wbar", JsonValue::number(wbar(z)));
      row.set("taylor_bound", JsonValue::number(wbar_taylor_bound(z)));
      rows.push(std::move(row));
    }
    JsonValue out = JsonValue::object();
    out.set("meta", report_meta(heis, c.seed(), grid.str()));
    out.set("rows", std::move(rows));
    c.emit(out.dump());
  }
  return 0;
}

int run_exponent_fit(Cmd& c) {
  Model model = c.model();
  VectorXd x = c.point("x"), lam = c.point("lambda");
  double t_min = c.num("t-min", 1e-3), t_max = c.num("t-max", 1e-1);
  c.check_unused();

  ExponentFit fit = fit_geodesic_exponent(model, x, lam, t_min, t_max);
  std::ostringstream grid;
  grid << "t=[" << format_double(t_min) << "," << format_double(t_max)
       << "]x50-log";
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, c.seed(), grid.str()));
  out.set("exponent", JsonValue::number(fit.exponent));
  out.set("constant", JsonValue::number(fit.constant));
  c.emit(out.dump());
  return 0;
}

JsonValue inequality_json(const Model& model, const InequalityReport& report,
                          const std::string& grid) {
  JsonValue rows = JsonValue::array();
  for (const InequalityRow& r : report.rows) {
    JsonValue row = JsonValue::object();
    row.set("t", JsonValue::number(r.t));
    row.set("lhs", JsonValue::number(r.lhs));
    row.set("rhs", JsonValue::number(r.rhs));
    row.set("failure_fraction", JsonValue::number(r.failure_fraction));
    row.set("verdict",
            JsonValue::string(r.pass ? "consistent" : "violated"));
    rows.push(std::move(row));
  }
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, report.seed, grid));
  out.set("name", JsonValue::string(report.name));
  out.set("exponent", JsonValue::number(report.exponent));
  out.set("h", JsonValue::number(report.h));
  out.set("slack", JsonValue::number(report.slack));
  out.set("samples", JsonValue::integer(report.samples));
  out.set("rows", std::move(rows));
  out.set("verdict",
          JsonValue::string(report.pass ? "consistent" : "violated"));
  return out;
}

int run_bm(Cmd& c) {
  Model model = c.model();
  SetSpec a = c.set_spec("a"), b = c.set_spec("b");
  double exponent = c.num("exponent", 5.0);
  std::vector<double> ts = c.nums("ts", {0.5});
  double h = c.num("pitch", 0.0);
  int samples = static_cast<int>(c.integer("samples", 10000));
  std::uint64_t seed = c.seed();
  c.check_unused();

  InequalityReport report =
      bm_check(model, a, b, exponent, ts, h, samples, seed);
  std::string grid = "A=" + a.describe() + ";B=" + b.describe() +
                     ";h=" + format_double(h) + ";ts=" + describe_list(ts);
  c.emit(inequality_json(model, report, grid).dump());
  return report.pass ? 0 : 1;
}

int run_mcp(Cmd& c) {
  Model model = c.model();
  VectorXd x = c.point("x");
  SetSpec b = c.set_spec("b");
  double exponent = c.num("exponent", 5.0);
  std::vector<double> ts = c.nums("ts", {0.5});
  double h = c.num("pitch", 0.0);
  int samples = static_cast<int>(c.integer("samples", 10000));
  std::uint64_t seed = c.seed();
  c.check_unused();

  InequalityReport report =
      mcp_check(model, x, b, exponent, ts, h, samples, seed);
  std::string grid = "B=" + b.describe() + ";h=" + format_double(h) +
                     ";ts=" + describe_list(ts);
  c.emit(inequality_json(model, report, grid).dump());
  return report.pass ? 0 : 1;
}

int run_bbl(Cmd& c) {
  Model model = c.model();
  GriddedFunction f = c.gridded("f"), g = c.gridded("g");
  double t = c.num("t", 0.5);
  std::string p_text = c.str("p", "inf");
  double p;
  if (p_text == "inf" || p_text == "+inf")
    p = std::numeric_limits<double>::infinity();
  else if (p_text == "-inf")
    p = -std::numeric_limits<double>::infinity();
  else
    p = Cmd::parse_num("p", p_text);
  double n_bound = c.num("n-bound", 5.0);
  int samples = static_cast<int>(c.integer("samples", 20000));
  std::uint64_t seed = c.seed();
  c.check_unused();

  InequalityReport report = bbl_check(model, f, g, t, p, n_bound, samples,
                                      seed);
  std::ostringstream grid;
  grid << "f=" << f.values.size() << "cells;g=" << g.values.size()
       << "cells;p=" << p_text << ";samples=" << samples;
  c.emit(inequality_json(model, report, grid.str()).dump());
  return report.pass ? 0 : 1;
}

int run_ot(Cmd& c) {
  Model model = c.model();
  DiscreteMeasure m0 = read_measure_csv(c.str_req("mu0"));
  DiscreteMeasure m1 = read_measure_csv(c.str_req("mu1"));
  InverseExpOptions opt;
  opt.starts = has_closed_exp(model) ? 0 : opt.starts;
  opt.starts = static_cast<int>(c.integer("starts", opt.starts));
  opt.seed = c.seed();
  c.check_unused();

  MatrixXd cost = cost_matrix(model, m0, m1, opt);
  TransportPlan plan = solve_ot(cost, m0, m1);

  if (auto path = c.raw("plan-out")) {
    std::ofstream out(*path);
    if (!out) throw InputError("cannot open output file " + *path);
    out << "i,j,mass\n";
    for (Eigen::Index i = 0; i < plan.coupling.rows(); ++i)
      for (Eigen::Index j = 0; j < plan.coupling.cols(); ++j)
        if (plan.coupling(i, j) > 0)
          out << i << ',' << j << ','
              << format_double(plan.coupling(i, j)) << '\n';
  }

  std::ostringstream grid;
  grid << "atoms=" << m0.support.size() << "x" << m1.support.size();
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, opt.seed, grid.str()));
  out.set("cost", JsonValue::number(plan.cost));
  out.set("w2", JsonValue::number(std::sqrt(2.0 * plan.cost)));
  c.emit(out.dump());
  return 0;
}

int run_interp_check(Cmd& c) {
  Model model = c.model();
  GriddedFunction rho0 = c.gridded("rho0"), rho1 = c.gridded("rho1");
  double t = c.num_req("t");
  double bandwidth = c.num_req("bandwidth");
  double n_bound = c.num("n-bound", 5.0);
  c.check_unused();

  InterpolationCheckReport rep =
      interpolation_density_check(model, rho0, rho1, t, bandwidth, n_bound);

  std::ostringstream grid;
  grid << "rho0=" << rho0.values.size() << "cells;rho1="
       << rho1.values.size() << "cells;bandwidth="
       << format_double(bandwidth);
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, c.seed(), grid.str()));
  out.set("t", JsonValue::number(rep.t));
  out.set("exponent", JsonValue::number(rep.exponent));
  out.set("checked_points", JsonValue::integer(rep.checked_points));
  out.set("excluded", JsonValue::integer(rep.excluded));
  out.set("min_slack", JsonValue::number(rep.min_slack));
  out.set("verdict", JsonValue::string(rep.verdict()));
  c.emit(out.dump());
  return rep.consistent ? 0 : 1;
}

int run_ball_exponent(Cmd& c) {
  Model model = c.model();
  VectorXd x = c.point("x");
  std::vector<double> ts = c.nums("ts", {0.25, 0.5, 0.75});
  std::vector<double> rs = c.nums("radii", {0.4, 0.2, 0.1});
  std::uint64_t seed = c.seed();
  c.check_unused();

  DiagonalReport report = diagonal_bound_check(model, x, ts, rs, seed);
  JsonValue rows = JsonValue::array();
  for (const DiagonalRow& r : report.rows) {
    JsonValue row = JsonValue::object();
    row.set("t", JsonValue::number(r.t));
    row.set("r", JsonValue::number(r.r));
    row.set("ratio", JsonValue::number(r.ratio));
    rows.push(std::move(row));
  }
  JsonValue out = JsonValue::object();
  out.set("meta", report_meta(model, seed,
                              "ts=" + describe_list(ts) +
                                  ";radii=" + describe_list(rs)));
  out.set("q", JsonValue::number(report.q));
  out.set("rows", std::move(rows));
  out.set("pass", JsonValue::boolean(report.pass));
  c.emit(out.dump());
  return report.pass ? 0 : 1;
}

int run_probe_cut(Cmd& c) {
  Model model = c.model();
  VectorXd y = c.point("from"), x = c.point("at");
  double r_min = c.num("r-min", 1e-4), r_max = c.num("r-max", 1e-2);
  int count = static_cast<int>(c.integer("count", 9));
  if (count < 2 || r_min <= 0 || r_max <= r_min)
    throw InputError("probe-cut: need 0 < r-min < r-max and count >= 2");
  std::string fmt = format_output(c, "csv", true);
  c.check_unused();

  std::vector<double> radii;
  for (int i = 0; i < count; ++i)
    radii.push_back(r_min * std::pow(r_max / r_min,
                                     static_cast<double>(i) / (count - 1)));
  std::vector<ProbePoint> pts = semiconvexity_probe(model, y, x, radii);

  std::ostringstream grid;
  grid << "r=[" << format_double(r_min) << "," << format_double(r_max)
       << "]x" << count << ";directions=64";
  if (fmt == "csv") {
    std::ostringstream os;
    os << csv_meta_line(model, c.seed(), grid.str()) << "\n";
    os << "r,q\n";
    for (const ProbePoint& p : pts)
      os << format_double(p.r) << ',' << format_double(p.q) << '\n';
    c.emit(os.str());
  } else {
    JsonValue rows = JsonValue::array();
    for (const ProbePoint& p : pts) {
      JsonValue row = JsonValue::object();
      row.set("r", JsonValue::number(p.r));
      row.set("q", JsonValue::number(p.q));
      rows.push(std::move(row));
    }
    JsonValue out = JsonValue::object();
    out.set("meta", report_meta(model, c.seed(), grid.str()));
    out.set("rows", std::move(rows));
    c.emit(out.dump());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// selftest: the fast fixed-seed subset; any failing check exits 3.

struct SelfCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;
  std::string detail;
};

SelfCheck check_closed_numeric(double tol) {
  SelfCheck c{"closed_numeric_exp", false, 0.0, ""};
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_real_distribution<double> ut(0.1, 1.0);
  for (const Model& model : {Model::heisenberg3(), Model::grushin2()}) {
    const int n = model.dim();
    for (int i = 0; i < 100; ++i) {
      VectorXd x(n), lam(n);
      for (int k = 0; k < n; ++k) {
        x[k] = 0.5 * u(rng);
        lam[k] = u(rng);
      }
      double t = ut(rng);
      double err = (exp_closed(model, x, lam, t) -
                    exp_numeric(model, x, lam, t))
                       .cwiseAbs()
                       .maxCoeff();
      c.worst = std::max(c.worst, err);
    }
  }
  c.pass = c.worst <= tol;
  c.detail = "max coordinate error " + format_double(c.worst);
  return c;
}

SelfCheck check_conjugate_match(double tol) {
  SelfCheck c{"conjugate_time_match", false, 0.0, ""};
  Model heis = Model::heisenberg3();
  VectorXd x = VectorXd::Zero(3);
  std::mt19937_64 rng(2222);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    VectorXd lam(3);
    lam << u(rng), u(rng), (i % 2 ? 1 : -1) * (0.5 + 0.2 * i);
    double expected = 2 * kPi / std::abs(lam[2]);
    std::optional<double> got =
        conjugate_time(heis, x, lam, 1.5 * expected);
    if (!got) {
      c.detail = "no conjugate time found";
      return c;
    }
    c.worst = std::max(c.worst, std::abs(*got - expected) / expected);
  }
  c.pass = c.worst <= tol;
  c.detail = "max relative error " + format_double(c.worst);
  return c;
}

SelfCheck check_wbar(double floor) {
  SelfCheck c{"wbar_nonnegative", false, 0.0, ""};
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> u(0.0, kPi);
  double min_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) min_v = std::min(min_v, wbar(u(rng)));
  c.worst = min_v;
  c.pass = min_v >= floor;
  c.detail = "min value " + format_double(min_v);
  return c;
}

int run_selftest(Cmd& c, bool json, bool inject_fault) {
  c.check_unused();
  const double exp_tol = inject_fault ? 1e-22 : 1e-8;
  std::vector<SelfCheck> checks{
      check_closed_numeric(exp_tol),
      check_conjugate_match(1e-6),
      check_wbar(-1e-12),
  };
  bool all = true;
  for (const SelfCheck& ck : checks) all = all && ck.pass;

  if (json) {
    JsonValue meta = JsonValue::object();
    meta.set("version", JsonValue::string(kToolVersion));
    meta.set("model",
             JsonValue::string("heisenberg3+grushin2"));
    meta.set("model_hash",
             JsonValue::string(model_hash(Model::heisenberg3()) + "+" +
                               model_hash(Model::grushin2())));
    meta.set("seed", JsonValue::integer(12345));
    meta.set("grid", JsonValue::string("selftest-fixed"));
    JsonValue rows = JsonValue::array();
    for (const SelfCheck& ck : checks) {
      JsonValue row = JsonValue::object();
      row.set("name", JsonValue::string(ck.name));
      row.set("pass", JsonValue::boolean(ck.pass));
      row.set("detail", JsonValue::string(ck.detail));
      rows.push(std::move(row));
    }
    JsonValue out = JsonValue::object();
    out.set("meta", std::move(meta));
    out.set("checks", std::move(rows));
    out.set("pass", JsonValue::boolean(all));
    c.emit(out.dump());
  } else {
    std::ostringstream os;
    for (const SelfCheck& ck : checks)
      os << (ck.pass ? "[PASS] " : "[FAIL] ") << ck.name << ": " << ck.detail
         << "\n";
    os << (all ? "selftest: all checks passed\n"
               : "selftest: checks failed\n");
    c.emit(os.str());
  }
  if (!all) throw NumericalError("selftest: checks failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sub-Riemannian distortion toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads,
                 "worker parallelism cap (also SRDIST_THREADS)")
      ->envname("SRDIST_THREADS");

  std::map<std::string, Cmd> cmds;
  auto sub = [&](const std::string& name, const std::string& desc,
                 bool with_model = true) -> Cmd& {
    Cmd& c = cmds[name];
    c.app = app.add_subcommand(name, desc);
    add_common(c, with_model);
    return c;
  };

  Cmd& geodesic = sub("geodesic", "solve the two-point boundary problem");
  geodesic.opt("from", "start point, comma-separated");
  geodesic.opt("to", "end point, comma-separated");
  geodesic.opt("starts", "Newton multi-start count");
  geodesic.opt("tol", "endpoint residual tolerance");
  geodesic.opt("max-iter", "Newton iteration cap");

  Cmd& distortion = sub("distortion", "distortion coefficient along t");
  distortion.opt("x", "base point");
  distortion.opt("lambda", "initial covector");
  distortion.opt("method", "closed | numeric");
  distortion.opt("t-min", "first t");
  distortion.opt("t-max", "last t");
  distortion.opt("t-count", "grid size");
  distortion.opt("format", "csv | json");

  Cmd& conjugate = sub("conjugate", "first conjugate time and cut time");
  conjugate.opt("x", "base point (origin by default)");
  conjugate.opt("lambda", "initial covector");
  conjugate.opt("horizon", "scan horizon");

  Cmd& verify = sub("verify-bound", "check beta_t >= t^N on a grid");
  verify.opt("exponent", "power N");
  verify.opt("grid", "WxT (heisenberg) or XxUxVxT (grushin)");
  verify.opt("delta", "band shrink for the grid edges");

  Cmd& sharp = sub("sharpness", "search for beta_t < t^N witnesses");
  sharp.opt("exponent", "power N to attack");

  Cmd& wbar_cmd = sub("wbar", "scan the bound's trigonometric minorant",
                      false);
  wbar_cmd.opt("z-min", "left end");
  wbar_cmd.opt("z-max", "right end");
  wbar_cmd.opt("count", "points");
  wbar_cmd.opt("format", "csv | json");

  Cmd& fit = sub("exponent-fit", "fit beta_t ~ C t^N on a log grid");
  fit.opt("x", "base point");
  fit.opt("lambda", "initial covector");
  fit.opt("t-min", "fit window start");
  fit.opt("t-max", "fit window end");

  Cmd& bm = sub("bm", "interpolation inequality between two sets");
  bm.opt("exponent", "power N");
  bm.opt("ts", "comma-separated t grid");
  bm.opt("pitch", "occupancy pitch (0 = extent/40)");
  bm.opt("samples", "samples per set");

  Cmd& mcp = sub("mcp", "contraction of a set towards a point");
  mcp.opt("x", "contraction center");
  mcp.opt("exponent", "power N");
  mcp.opt("ts", "comma-separated t grid");
  mcp.opt("pitch", "occupancy pitch (0 = extent/40)");
  mcp.opt("samples", "samples for the set");

  Cmd& bbl = sub("bbl", "p-mean inequality for gridded densities");
  bbl.opt("t", "interpolation parameter");
  bbl.opt("p", "power mean parameter (inf, -inf, or a number)");
  bbl.opt("n-bound", "distortion exponent in the hypothesis");
  bbl.opt("samples", "midpoint samples");

  Cmd& ot = sub("ot", "exact optimal transport between csv measures");
  ot.opt("mu0", "source measure csv");
  ot.opt("mu1", "target measure csv");
  ot.opt("starts", "BVP multi-start count for the cost matrix");
  ot.opt("plan-out", "write the coupling as i,j,mass csv");

  Cmd& interp = sub("interp-check",
                    "density inequality along displacement interpolation");
  interp.opt("t", "interpolation parameter");
  interp.opt("bandwidth", "kernel bandwidth (must exceed grid pitch)");
  interp.opt("n-bound", "distortion exponent in the hypothesis");

  Cmd& ball = sub("ball-exponent", "on-diagonal ball contraction scaling");
  ball.opt("x", "center point");
  ball.opt("ts", "comma-separated t grid");
  ball.opt("radii", "comma-separated ball radii");

  Cmd& probe = sub("probe-cut", "semiconvexity quotient of d^2 near a point");
  probe.opt("from", "distance base point y");
  probe.opt("at", "probe point x");
  probe.opt("r-min", "smallest radius (>= 1e-4)");
  probe.opt("r-max", "largest radius");
  probe.opt("count", "log-spaced radius count");
  probe.opt("format", "csv | json");

  Cmd& selftest = sub("selftest", "fast fixed-seed acceptance subset",
                      false);
  bool json_flag = false, fault_flag = false;
  selftest.app->add_flag("--json", json_flag, "machine-readable summary");
  selftest.app->add_flag("--inject-fault", fault_flag, "")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (threads < 1) throw InputError("--threads must be >= 1");
    for (auto& [name, c] : cmds) {
      if (!c.app->parsed()) continue;
      c.load_config();
      if (name == "geodesic") return run_geodesic(c);
      if (name == "distortion") return run_distortion(c);
      if (name == "conjugate") return run_conjugate(c);
      if (name == "verify-bound") return run_verify_bound(c);
      if (name == "sharpness") return run_sharpness(c);
      if (name == "wbar") return run_wbar(c);
      if (name == "exponent-fit") return run_exponent_fit(c);
      if (name == "bm") return run_bm(c);
      if (name == "mcp") return run_mcp(c);
      if (name == "bbl") return run_bbl(c);
      if (name == "ot") return run_ot(c);
      if (name == "interp-check") return run_interp_check(c);
      if (name == "ball-exponent") return run_ball_exponent(c);
      if (name == "probe-cut") return run_probe_cut(c);
      if (name == "selftest") return run_selftest(c, json_flag, fault_flag);
    }
    throw InputError("no subcommand given");
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
