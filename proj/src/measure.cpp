#include "srdist/measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "srdist/distortion.hpp"
#include "srdist/flow.hpp"

namespace srdist {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr long long kPairCap = 1000000;      // Cartesian product limit
constexpr double kFailureBudget = 0.05;      // tolerated BVP failure fraction
constexpr double kStatSlack = 0.05;          // Monte-Carlo allowance

std::string vec_text(const VectorXd& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i)
    os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

InverseExpOptions bulk_options(const Model& model) {
  InverseExpOptions opt;
  opt.starts = has_closed_exp(model) ? 0 : 16;
  return opt;
}

// Axis-aligned box certain to contain the metric ball, used as the
// rejection-sampling envelope.
void ball_envelope(const Model& model, const VectorXd& c, double r,
                   VectorXd& lo, VectorXd& hi) {
  switch (model.kind()) {
    case ModelKind::Heisenberg3: {
      // From the origin: |x|, |y| <= r and |z| <= r^2/(4*pi); translate
      // afterwards, left translation preserves Lebesgue measure.
      lo = VectorXd::Zero(3);
      hi = VectorXd::Zero(3);
      lo << -r, -r, -r * r / (4 * kPi);
      hi = -lo;
      return;
    }
    case ModelKind::Grushin2: {
      // |x(s) - x0| <= s along unit-speed curves, so
      // |y - y0| <= int_0^r (|x0| + s) ds.
      const double dy = r * std::abs(c[0]) + 0.5 * r * r;
      lo = VectorXd::Zero(2);
      hi = VectorXd::Zero(2);
      lo << c[0] - r, c[1] - dy;
      hi << c[0] + r, c[1] + dy;
      return;
    }
    default:
      throw CapabilityError(
          "sample_set: metric-ball envelopes are available for the "
          "heisenberg and grushin models only");
  }
}

struct PairSolve {
  VectorXd base;
  VectorXd lambda;
  bool ok = false;
};

// Solves the boundary-value problem for each selected pair once; callers
// evaluate gamma(t) = exp(base, t*lambda-flow) for as many t as they need.
std::vector<PairSolve> solve_pairs(const Model& model,
                                   const std::vector<VectorXd>& a,
                                   const std::vector<VectorXd>& b,
                                   std::uint64_t seed, long long& failures) {
  if (a.empty() || b.empty())
    throw InputError("midpoint_set: empty sample cloud");
  const long long total =
      static_cast<long long>(a.size()) * static_cast<long long>(b.size());
  const long long n_pairs = std::min(total, kPairCap);

  std::mt19937_64 rng(seed ^ 0x7062756c6b736574ULL);
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);

  const InverseExpOptions opt = bulk_options(model);
  std::vector<PairSolve> out;
  out.reserve(static_cast<std::size_t>(n_pairs));
  failures = 0;
  for (long long k = 0; k < n_pairs; ++k) {
    std::size_t i, j;
    if (total <= kPairCap) {
      i = static_cast<std::size_t>(k / static_cast<long long>(b.size()));
      j = static_cast<std::size_t>(k % static_cast<long long>(b.size()));
    } else {
      i = pick_a(rng);
      j = pick_b(rng);
    }
    PairSolve ps;
    ps.base = a[i];
    try {
      InverseExpResult res = inverse_exp(model, a[i], b[j], opt);
      for (const GeodesicSolution& sol : res.solutions)
        if (sol.minimizing) {
          ps.lambda = sol.lambda;
          ps.ok = true;
          break;
        }
    } catch (const std::runtime_error&) {
      ps.ok = false;
    }
    if (!ps.ok) ++failures;
    out.push_back(std::move(ps));
  }
  return out;
}

std::vector<VectorXd> evaluate_pairs(const Model& model,
                                     const std::vector<PairSolve>& pairs,
                                     double t) {
  std::vector<VectorXd> pts;
  pts.reserve(pairs.size());
  for (const PairSolve& ps : pairs) {
    if (!ps.ok) continue;
    if (t == 0.0) {
      pts.push_back(ps.base);
      continue;
    }
    pts.push_back(exp_point(model, ps.base, ps.lambda, t));
  }
  return pts;
}

double cloud_volume(const std::vector<VectorXd>& cloud, double h) {
  if (h > 0.0) return volume_estimate(cloud, h).value;
  return volume_estimate(cloud, cloud_pitch(cloud, 40)).value;
}

void check_unit_interval(double t, const char* who) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InputError(std::string(who) + ": t must lie in [0, 1]");
}

}  // namespace

SetSpec SetSpec::box(VectorXd lo, VectorXd hi) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InputError("SetSpec::box: bound dimensions disagree");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i]))
      throw InputError("SetSpec::box: empty or inverted box");
  SetSpec s;
  s.kind = Kind::Box;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

SetSpec SetSpec::ball(VectorXd center, double radius) {
  if (!(radius > 0.0)) throw InputError("SetSpec::ball: radius must be > 0");
  SetSpec s;
  s.kind = Kind::Ball;
  s.center = std::move(center);
  s.radius = radius;
  return s;
}

SetSpec SetSpec::point_list(std::vector<VectorXd> pts) {
  if (pts.empty()) throw InputError("SetSpec::point_list: empty list");
  SetSpec s;
  s.kind = Kind::Points;
  s.points = std::move(pts);
  return s;
}

std::string SetSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Box:
      os << "box " << vec_text(lo) << " .. " << vec_text(hi);
      break;
    case Kind::Ball:
      os << "ball center " << vec_text(center) << " radius " << radius;
      break;
    case Kind::Points:
      os << "point list (" << points.size() << " atoms)";
      break;
  }
  return os.str();
}

SampledSet sample_set(const Model& model, const SetSpec& spec, int count,
                      std::uint64_t seed) {
  SampledSet out;
  out.description = spec.describe();
  out.seed = seed;
  const int n = model.dim();

  if (spec.kind == SetSpec::Kind::Points) {
    for (const VectorXd& p : spec.points) model.check_point(p);
    out.points = spec.points;
    return out;
  }
  if (count <= 0) throw InputError("sample_set: count must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (spec.kind == SetSpec::Kind::Box) {
    if (spec.lo.size() != n)
      throw InputError("sample_set: box dimension does not match the model");
    model.check_point(spec.lo);
    double vol = 1.0;
    for (int i = 0; i < n; ++i) vol *= spec.hi[i] - spec.lo[i];
    out.exact_volume = vol;
    out.points.reserve(static_cast<std::size_t>(count));
    VectorXd p(n);
    for (int k = 0; k < count; ++k) {
      for (int i = 0; i < n; ++i)
        p[i] = spec.lo[i] + (spec.hi[i] - spec.lo[i]) * unit(rng);
      out.points.push_back(p);
    }
    return out;
  }

  // Metric ball: uniform draws from the envelope box, kept when the
  // sub-Riemannian distance to the center is within the radius.
  if (spec.center.size() != n)
    throw InputError("sample_set: ball center does not match the model");
  model.check_point(spec.center);
  VectorXd lo, hi;
  ball_envelope(model, spec.center, spec.radius, lo, hi);
  const bool translate = model.kind() == ModelKind::Heisenberg3;
  const InverseExpOptions opt = bulk_options(model);

  out.points.reserve(static_cast<std::size_t>(count));
  VectorXd p(n);
  long long attempts = 0;
  const long long attempt_cap = 10000LL * count;
  while (static_cast<int>(out.points.size()) < count) {
    if (++attempts > attempt_cap)
      throw NumericalError("sample_set: ball rejection sampling stalled");
    for (int i = 0; i < n; ++i) p[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    VectorXd q = translate ? heisenberg_mul(spec.center, p) : p;
    try {
      if (distance(model, spec.center, q, opt) <= spec.radius)
        out.points.push_back(q);
    } catch (const std::runtime_error&) {
      // unresolved boundary-value problem: treat the draw as rejected
    }
  }
  return out;
}

MidpointSet midpoint_set(const Model& model, const SampledSet& a,
                         const SampledSet& b, double t, std::uint64_t seed) {
  check_unit_interval(t, "midpoint_set");
  long long failures = 0;
  std::vector<PairSolve> pairs = solve_pairs(model, a.points, b.points, seed,
                                             failures);
  MidpointSet out;
  out.pairs = static_cast<long long>(pairs.size());
  out.failure_fraction =
      static_cast<double>(failures) / static_cast<double>(pairs.size());
  if (out.failure_fraction > kFailureBudget)
    throw NumericalError("midpoint_set: more than 5% of the geodesic solves "
                         "failed");
  out.points = evaluate_pairs(model, pairs, t);
  return out;
}

VectorXd cloud_pitch(const std::vector<VectorXd>& cloud, int cells_per_dim) {
  if (cloud.empty()) throw InputError("cloud_pitch: empty cloud");
  if (cells_per_dim < 1) throw InputError("cloud_pitch: need >= 1 cell");
  VectorXd lo = cloud.front(), hi = cloud.front();
  for (const VectorXd& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  VectorXd pitch = (hi - lo) / static_cast<double>(cells_per_dim);
  for (Eigen::Index i = 0; i < pitch.size(); ++i)
    pitch[i] = std::max(pitch[i], 1e-12);
  return pitch;
}

VolumeEstimate volume_estimate(const std::vector<VectorXd>& cloud, double h) {
  if (!(h > 0.0)) throw InputError("volume_estimate: pitch must be > 0");
  if (cloud.empty()) {
    VolumeEstimate e;
    e.pitch = VectorXd::Constant(1, h);
    return e;
  }
  return volume_estimate(cloud,
                         VectorXd::Constant(cloud.front().size(), h));
}

VolumeEstimate volume_estimate(const std::vector<VectorXd>& cloud,
                               const VectorXd& pitch) {
  VolumeEstimate e;
  e.pitch = pitch;
  for (Eigen::Index i = 0; i < pitch.size(); ++i)
    if (!(pitch[i] > 0.0))
      throw InputError("volume_estimate: pitch must be > 0");
  if (cloud.empty()) return e;

  const Eigen::Index n = cloud.front().size();
  if (pitch.size() != n)
    throw InputError("volume_estimate: pitch dimension mismatch");
  VectorXd lo = cloud.front(), hi = cloud.front();
  for (const VectorXd& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  // Mixed-radix flat index over the covering grid; the cell-count guard
  // keeps it exact in 64 bits.
  std::vector<long long> cells(static_cast<std::size_t>(n));
  double total = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cells[static_cast<std::size_t>(i)] =
        static_cast<long long>(std::floor((hi[i] - lo[i]) / pitch[i])) + 1;
    total *= static_cast<double>(cells[static_cast<std::size_t>(i)]);
  }
  if (total > 1e8)
    throw ResourceError("volume_estimate: pitch implies more than 1e8 cells");

  std::unordered_set<long long> occupied;
  occupied.reserve(cloud.size());
  for (const VectorXd& p : cloud) {
    long long flat = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      long long idx = static_cast<long long>(
          std::floor((p[i] - lo[i]) / pitch[i]));
      idx = std::clamp(idx, 0LL, cells[static_cast<std::size_t>(i)] - 1);
      flat = flat * cells[static_cast<std::size_t>(i)] + idx;
    }
    occupied.insert(flat);
  }
  e.occupied = static_cast<long long>(occupied.size());
  e.value = static_cast<double>(e.occupied) * pitch.prod();
  return e;
}

namespace {

double set_volume(const SampledSet& s, double h) {
  if (s.exact_volume) return *s.exact_volume;
  return cloud_volume(s.points, h);
}

}  // namespace

InequalityReport bm_check(const Model& model, const SetSpec& a,
                          const SetSpec& b, double exponent,
                          const std::vector<double>& ts, double h, int samples,
                          std::uint64_t seed) {
  if (ts.empty()) throw InputError("bm_check: empty t grid");
  for (double t : ts) check_unit_interval(t, "bm_check");
  if (!(exponent > 0)) throw InputError("bm_check: exponent must be > 0");

  const double n = static_cast<double>(model.dim());
  SampledSet sa = sample_set(model, a, samples, seed);
  SampledSet sb = sample_set(model, b, samples, seed + 1);
  const double vol_a = set_volume(sa, h);
  const double vol_b = set_volume(sb, h);

  long long failures = 0;
  std::vector<PairSolve> pairs =
      solve_pairs(model, sa.points, sb.points, seed, failures);
  const double fail_frac =
      static_cast<double>(failures) / static_cast<double>(pairs.size());
  if (fail_frac > kFailureBudget)
    throw NumericalError("bm_check: more than 5% of the geodesic solves "
                         "failed");

  InequalityReport rep;
  rep.name = "brunn-minkowski";
  rep.exponent = exponent;
  rep.h = h;
  rep.slack = kStatSlack;
  rep.seed = seed;
  rep.samples = samples;
  rep.pass = true;
  for (double t : ts) {
    std::vector<VectorXd> mids = evaluate_pairs(model, pairs, t);
    InequalityRow row;
    row.t = t;
    row.failure_fraction = fail_frac;
    row.lhs = std::pow(cloud_volume(mids, h), 1.0 / n);
    row.rhs = (std::pow(1.0 - t, exponent / n) * std::pow(vol_a, 1.0 / n) +
               std::pow(t, exponent / n) * std::pow(vol_b, 1.0 / n)) *
              (1.0 - rep.slack);
    row.pass = row.lhs >= row.rhs;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

InequalityReport mcp_check(const Model& model, const VectorXd& x,
                           const SetSpec& b, double exponent,
                           const std::vector<double>& ts, double h,
                           int samples, std::uint64_t seed) {
  if (ts.empty()) throw InputError("mcp_check: empty t grid");
  for (double t : ts) check_unit_interval(t, "mcp_check");
  if (!(exponent > 0)) throw InputError("mcp_check: exponent must be > 0");
  model.check_point(x);

  SampledSet sb = sample_set(model, b, samples, seed + 1);
  const double vol_b = set_volume(sb, h);

  long long failures = 0;
  std::vector<PairSolve> pairs =
      solve_pairs(model, {x}, sb.points, seed, failures);
  const double fail_frac =
      static_cast<double>(failures) / static_cast<double>(pairs.size());
  if (fail_frac > kFailureBudget)
    throw NumericalError("mcp_check: more than 5% of the geodesic solves "
                         "failed");

  InequalityReport rep;
  rep.name = "measure-contraction";
  rep.exponent = exponent;
  rep.h = h;
  rep.slack = kStatSlack;
  rep.seed = seed;
  rep.samples = samples;
  rep.pass = true;
  for (double t : ts) {
    std::vector<VectorXd> mids = evaluate_pairs(model, pairs, t);
    InequalityRow row;
    row.t = t;
    row.failure_fraction = fail_frac;
    row.lhs = t == 0.0 ? 0.0 : cloud_volume(mids, h);
    row.rhs = std::pow(t, exponent) * vol_b * (1.0 - rep.slack);
    row.pass = row.lhs >= row.rhs;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

double GriddedFunction::cell_volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < shape.size(); ++i)
    v *= (hi[static_cast<Eigen::Index>(i)] -
          lo[static_cast<Eigen::Index>(i)]) /
         static_cast<double>(shape[i]);
  return v;
}

double GriddedFunction::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell_volume();
}

VectorXd GriddedFunction::cell_center(long long flat) const {
  VectorXd c(static_cast<Eigen::Index>(shape.size()));
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    const long long idx = flat % shape[static_cast<std::size_t>(i)];
    flat /= shape[static_cast<std::size_t>(i)];
    const double step =
        (hi[i] - lo[i]) / static_cast<double>(shape[static_cast<std::size_t>(i)]);
    c[i] = lo[i] + (static_cast<double>(idx) + 0.5) * step;
  }
  return c;
}

GriddedFunction GriddedFunction::indicator_box(const VectorXd& lo,
                                               const VectorXd& hi,
                                               const std::vector<int>& shape) {
  if (lo.size() != hi.size() ||
      static_cast<std::size_t>(lo.size()) != shape.size())
    throw InputError("indicator_box: dimension mismatch");
  long long total = 1;
  for (int s : shape) {
    if (s < 1) throw InputError("indicator_box: shape entries must be >= 1");
    total *= s;
  }
  GriddedFunction f;
  f.lo = lo;
  f.hi = hi;
  f.shape = shape;
  f.values.assign(static_cast<std::size_t>(total), 1.0);
  return f;
}

InequalityReport bbl_check(const Model& model, const GriddedFunction& f,
                           const GriddedFunction& g, double t, double p,
                           double n_bound, int samples, std::uint64_t seed) {
  check_unit_interval(t, "bbl_check");
  const int n = model.dim();
  if (f.lo.size() != n || g.lo.size() != n)
    throw InputError("bbl_check: density dimension does not match the model");
  if (!(p == std::numeric_limits<double>::infinity()) &&
      p < -1.0 / n - 1e-12)
    throw InputError("bbl_check: p must be >= -1/n");
  for (double v : f.values)
    if (!(v >= 0.0)) throw InputError("bbl_check: negative density value");
  for (double v : g.values)
    if (!(v >= 0.0)) throw InputError("bbl_check: negative density value");
  const double int_f = f.integral();
  const double int_g = g.integral();
  if (!(int_f > 0.0) || !(int_g > 0.0))
    throw InputError("bbl_check: densities must have positive mass");
  if (samples <= 0) throw InputError("bbl_check: samples must be positive");

  // Mass-weighted draws: pick a cell by its mass, then a uniform point
  // inside it; the density value is the cell value.
  struct Atom {
    long long flat;
    double value;
  };
  auto atoms_of = [](const GriddedFunction& fn, std::vector<Atom>& atoms,
                     std::vector<double>& cdf) {
    double acc = 0.0;
    for (std::size_t i = 0; i < fn.values.size(); ++i)
      if (fn.values[i] > 0.0) {
        atoms.push_back({static_cast<long long>(i), fn.values[i]});
        acc += fn.values[i];
        cdf.push_back(acc);
      }
    for (double& c : cdf) c /= acc;
  };
  std::vector<Atom> fa, ga;
  std::vector<double> fcdf, gcdf;
  atoms_of(f, fa, fcdf);
  atoms_of(g, ga, gcdf);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const GriddedFunction& fn, const std::vector<Atom>& atoms,
                  const std::vector<double>& cdf, double& value) {
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), unit(rng)) - cdf.begin());
    const Atom& a = atoms[std::min(k, atoms.size() - 1)];
    VectorXd c = fn.cell_center(a.flat);
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double step = (fn.hi[i] - fn.lo[i]) /
                          static_cast<double>(fn.shape[static_cast<std::size_t>(i)]);
      c[i] += (unit(rng) - 0.5) * step;
    }
    value = a.value;
    return c;
  };

  const InverseExpOptions opt = bulk_options(model);
  const double wf = std::pow(1.0 - t, n - n_bound);
  const double wg = std::pow(t, n - n_bound);
  std::vector<VectorXd> mids;
  std::vector<double> vals;
  mids.reserve(static_cast<std::size_t>(samples));
  long long failures = 0;
  for (int k = 0; k < samples; ++k) {
    double fx, gy;
    VectorXd x = draw(f, fa, fcdf, fx);
    VectorXd y = draw(g, ga, gcdf, gy);
    bool ok = false;
    try {
      InverseExpResult res = inverse_exp(model, x, y, opt);
      for (const GeodesicSolution& sol : res.solutions)
        if (sol.minimizing) {
          mids.push_back(t == 0.0 ? x : exp_point(model, x, sol.lambda, t));
          vals.push_back(pmean(p, t, wf * fx, wg * gy));
          ok = true;
          break;
        }
    } catch (const std::runtime_error&) {
    }
    if (!ok) ++failures;
  }
  const double fail_frac =
      static_cast<double>(failures) / static_cast<double>(samples);
  if (fail_frac > kFailureBudget)
    throw NumericalError("bbl_check: more than 5% of the geodesic solves "
                         "failed");

  // h is the smallest grid function admissible for the sampled pairs:
  // the per-cell running max of the required p-mean values.
  VectorXd pitch = cloud_pitch(mids, 40);
  VectorXd lo = mids.front(), hi = mids.front();
  for (const VectorXd& z : mids) {
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
  }
  std::vector<long long> cells(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    cells[static_cast<std::size_t>(i)] =
        static_cast<long long>(std::floor((hi[i] - lo[i]) / pitch[i])) + 1;
  std::unordered_map<long long, double> hmax;
  for (std::size_t k = 0; k < mids.size(); ++k) {
    long long flat = 0;
    for (int i = 0; i < n; ++i) {
      long long idx = static_cast<long long>(
          std::floor((mids[k][i] - lo[i]) / pitch[i]));
      idx = std::clamp(idx, 0LL, cells[static_cast<std::size_t>(i)] - 1);
      flat = flat * cells[static_cast<std::size_t>(i)] + idx;
    }
    auto [it, fresh] = hmax.try_emplace(flat, vals[k]);
    if (!fresh) it->second = std::max(it->second, vals[k]);
  }
  double int_h = 0.0;
  for (const auto& [flat, v] : hmax) int_h += v;
  int_h *= pitch.prod();

  double q;
  if (p == std::numeric_limits<double>::infinity())
    q = 1.0 / n;
  else if (std::abs(p + 1.0 / n) <= 1e-12)
    q = -std::numeric_limits<double>::infinity();
  else
    q = p / (1.0 + n * p);

  InequalityReport rep;
  rep.name = "borell-brascamp-lieb";
  rep.exponent = n_bound;
  rep.h = 0.0;
  rep.slack = kStatSlack;
  rep.seed = seed;
  rep.samples = samples;
  InequalityRow row;
  row.t = t;
  row.failure_fraction = fail_frac;
  row.lhs = int_h;
  row.rhs = pmean(q, t, int_f, int_g) * (1.0 - rep.slack);
  row.pass = row.lhs >= row.rhs;
  rep.rows.push_back(row);
  rep.pass = row.pass;
  return rep;
}

}  // namespace srdist
