#include "srdist/flow.hpp"

namespace srdist {

namespace {

// State layout: [q(n), p(n), then per family M(n*n), N(n*n)], matrices
// column-major.
struct JointRhs {
  const Model* model;
  int n, nf;

  void operator()(double, const VectorXd& y, VectorXd& dy) const {
    dy.resize(y.size());
    VectorXd q = y.segment(0, n);
    VectorXd p = y.segment(n, n);
    VectorXd dq, dp;
    if (nf == 0) {
      model->hamiltonian_rhs(q, p, dq, dp);
      dy.segment(0, n) = dq;
      dy.segment(n, n) = dp;
      return;
    }
    VariationalCoefficients co;
    model->variational_rhs(q, p, dq, dp, co);
    dy.segment(0, n) = dq;
    dy.segment(n, n) = dp;
    MatrixXd At = co.A.transpose();
    for (int k = 0; k < nf; ++k) {
      const double* base = y.data() + 2 * n + k * 2 * n * n;
      double* dbase = dy.data() + 2 * n + k * 2 * n * n;
      Eigen::Map<const MatrixXd> M(base, n, n);
      Eigen::Map<const MatrixXd> N(base + n * n, n, n);
      Eigen::Map<MatrixXd> dM(dbase, n, n);
      Eigen::Map<MatrixXd> dN(dbase + n * n, n, n);
      dM.noalias() = -(At * M);
      dM.noalias() -= co.R * N;
      dN.noalias() = co.B * M;
      dN.noalias() += co.A * N;
    }
  }
};

VectorXd pack_state(const Model& model, const VectorXd& x, const VectorXd& lam,
                    const std::vector<JacobiInit>& families) {
  model.check_point(x);
  model.check_point(lam);
  const int n = model.dim();
  const int nf = static_cast<int>(families.size());
  VectorXd y(2 * n + nf * 2 * n * n);
  y.segment(0, n) = x;
  y.segment(n, n) = lam;
  for (int k = 0; k < nf; ++k) {
    if (families[k].M.rows() != n || families[k].M.cols() != n ||
        families[k].N.rows() != n || families[k].N.cols() != n)
      throw InputError("jacobi init blocks must be n x n");
    double* base = y.data() + 2 * n + k * 2 * n * n;
    Eigen::Map<MatrixXd>(base, n, n) = families[k].M;
    Eigen::Map<MatrixXd>(base + n * n, n, n) = families[k].N;
  }
  return y;
}

ExtremalState heis_exp_origin(const VectorXd& lam0, double t) {
  const double u0 = lam0[0], v0 = lam0[1], w = lam0[2];
  const double th = w * t;
  const double g1 = sinc(th), g2 = versinc(th), g3 = sin_defect(th);
  VectorXd q(3), p(3);
  q[0] = t * (u0 * g1 - v0 * th * g2);
  q[1] = t * (u0 * th * g2 + v0 * g1);
  q[2] = (u0 * u0 + v0 * v0) * t * t * th * g3 / 2;
  const double c = std::cos(th), s = std::sin(th);
  p[0] = u0 * c - v0 * s + w * q[1] / 2;
  p[1] = u0 * s + v0 * c - w * q[0] / 2;
  p[2] = w;
  return {std::move(q), std::move(p)};
}

ExtremalState heis_exp(const VectorXd& x, const VectorXd& lam, double t) {
  const double a = x[0], b = x[1], w = lam[2];
  VectorXd lam0(3);
  lam0 << lam[0] - b * w / 2, lam[1] + a * w / 2, w;
  ExtremalState st = heis_exp_origin(lam0, t);
  VectorXd p(3);
  p << st.p[0] + b * w / 2, st.p[1] - a * w / 2, w;
  return {heisenberg_mul(x, st.q), std::move(p)};
}

ExtremalState grushin_exp(const VectorXd& x, const VectorXd& lam, double t) {
  const double x0 = x[0], y0 = x[1], u0 = lam[0], v0 = lam[1];
  const double s = v0 * t;
  VectorXd q(2), p(2);
  q[0] = x0 * std::cos(s) + u0 * t * sinc(s);
  q[1] = y0 +
         v0 * (t / 2 * x0 * x0 * (1 + sinc(2 * s)) +
               2 * u0 * x0 * t * t * versinc(2 * s) +
               2 * u0 * u0 * t * t * t * sin_defect(2 * s));
  p[0] = u0 * std::cos(s) - x0 * v0 * std::sin(s);
  p[1] = v0;
  return {std::move(q), std::move(p)};
}

}  // namespace

VectorXd heisenberg_mul(const VectorXd& g, const VectorXd& h) {
  VectorXd r(3);
  r[0] = g[0] + h[0];
  r[1] = g[1] + h[1];
  r[2] = g[2] + h[2] + (g[0] * h[1] - g[1] * h[0]) / 2;
  return r;
}

VectorXd heisenberg_inverse(const VectorXd& g) { return -g; }

bool has_closed_exp(const Model& model) {
  return model.kind() == ModelKind::Heisenberg3 ||
         model.kind() == ModelKind::Grushin2;
}

ExtremalState exp_closed_state(const Model& model, const VectorXd& x,
                               const VectorXd& lam, double t) {
  model.check_point(x);
  model.check_point(lam);
  switch (model.kind()) {
    case ModelKind::Heisenberg3:
      return heis_exp(x, lam, t);
    case ModelKind::Grushin2:
      return grushin_exp(x, lam, t);
    default:
      throw CapabilityError("no closed-form exponential for " + model.name());
  }
}

VectorXd exp_closed(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t) {
  return exp_closed_state(model, x, lam, t).q;
}

OdeSolution extremal_flow(const Model& model, const VectorXd& x,
                          const VectorXd& lam, double t1,
                          const OdeOptions& opt) {
  VectorXd y0 = pack_state(model, x, lam, {});
  return integrate_ode(JointRhs{&model, model.dim(), 0}, y0, 0.0, t1, opt);
}

ExtremalState exp_numeric_state(const Model& model, const VectorXd& x,
                                const VectorXd& lam, double t,
                                const OdeOptions& opt) {
  OdeSolution sol = extremal_flow(model, x, lam, t, opt);
  const VectorXd& y = sol.final_state();
  const int n = model.dim();
  return {y.segment(0, n), y.segment(n, n)};
}

VectorXd exp_numeric(const Model& model, const VectorXd& x, const VectorXd& lam,
                     double t, const OdeOptions& opt) {
  return exp_numeric_state(model, x, lam, t, opt).q;
}

ExtremalState exp_state(const Model& model, const VectorXd& x,
                        const VectorXd& lam, double t) {
  if (has_closed_exp(model)) return exp_closed_state(model, x, lam, t);
  return exp_numeric_state(model, x, lam, t);
}

VectorXd exp_point(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t) {
  return exp_state(model, x, lam, t).q;
}

JacobiInit vertical_init(int n) {
  return {MatrixXd::Identity(n, n), MatrixXd::Zero(n, n)};
}

JacobiInit horizontal_init(int n) {
  return {MatrixXd::Zero(n, n), MatrixXd::Identity(n, n)};
}

FlowPath::FlowPath(const Model& model, VectorXd x, VectorXd lam,
                   std::vector<JacobiInit> families, OdeOptions opt)
    : model_(&model),
      n_(model.dim()),
      nf_(static_cast<int>(families.size())),
      opt_(opt) {
  y_ = pack_state(model, x, lam, families);
}

void FlowPath::advance(double t) {
  if (t < t_) throw InputError("FlowPath::advance: times must not decrease");
  if (t == t_) return;
  OdeSolution sol =
      integrate_ode(JointRhs{model_, n_, nf_}, y_, t_, t, opt_);
  y_ = sol.final_state();
  t_ = t;
}

MatrixXd FlowPath::M(int family) const {
  return Eigen::Map<const MatrixXd>(y_.data() + 2 * n_ + family * 2 * n_ * n_,
                                    n_, n_);
}

MatrixXd FlowPath::N(int family) const {
  return Eigen::Map<const MatrixXd>(
      y_.data() + 2 * n_ + family * 2 * n_ * n_ + n_ * n_, n_, n_);
}

std::pair<double, int> FlowPath::log_abs_det_N(int family) const {
  return log_abs_det(N(family));
}

JacobiFlow::JacobiFlow(const Model& model, const VectorXd& x,
                       const VectorXd& lam, double T,
                       std::vector<JacobiInit> families, const OdeOptions& opt)
    : model_(&model), n_(model.dim()), nf_(static_cast<int>(families.size())) {
  VectorXd y0 = pack_state(model, x, lam, families);
  sol_ = integrate_ode(JointRhs{&model, n_, nf_}, y0, 0.0, T, opt);
}

VectorXd JacobiFlow::raw(double t) const { return sol_.at(t); }

ExtremalState JacobiFlow::state(double t) const {
  VectorXd y = raw(t);
  return {y.segment(0, n_), y.segment(n_, n_)};
}

MatrixXd JacobiFlow::M(int family, double t) const {
  VectorXd y = raw(t);
  return Eigen::Map<const MatrixXd>(y.data() + 2 * n_ + family * 2 * n_ * n_,
                                    n_, n_);
}

MatrixXd JacobiFlow::N(int family, double t) const {
  VectorXd y = raw(t);
  return Eigen::Map<const MatrixXd>(
      y.data() + 2 * n_ + family * 2 * n_ * n_ + n_ * n_, n_, n_);
}

std::pair<double, int> JacobiFlow::log_abs_det_N(int family, double t) const {
  return log_abs_det(N(family, t));
}

double JacobiFlow::hamiltonian(double t) const {
  ExtremalState st = state(t);
  return model_->hamiltonian(st.q, st.p);
}

JacobiMatrices jacobi_propagate(const Model& model, const VectorXd& x,
                                const VectorXd& lam, double s, double t,
                                const JacobiInit& init, const OdeOptions& opt) {
  VectorXd qs = x, ps = lam;
  if (s != 0.0) {
    ExtremalState st = exp_numeric_state(model, x, lam, s, opt);
    qs = st.q;
    ps = st.p;
  }
  JacobiFlow flow(model, qs, ps, t - s, {init}, opt);
  return {flow.M(0, t - s), flow.N(0, t - s), flow.state(t - s)};
}

MatrixXd exp_jacobian(const Model& model, const VectorXd& x, const VectorXd& lam,
                      double t, const OdeOptions& opt) {
  if (t == 0.0) return MatrixXd::Zero(model.dim(), model.dim());
  return jacobi_propagate(model, x, lam, 0.0, t, vertical_init(model.dim()), opt)
      .N;
}

MatrixXd exp_jacobian_fd(const Model& model, const VectorXd& x,
                         const VectorXd& lam, double t) {
  const int n = model.dim();
  const double h = 1e-6 * std::max(1.0, lam.norm());
  MatrixXd J(n, n);
  for (int j = 0; j < n; ++j) {
    VectorXd lp = lam, lm = lam;
    lp[j] += h;
    lm[j] -= h;
    J.col(j) = (exp_point(model, x, lp, t) - exp_point(model, x, lm, t)) /
               (2 * h);
  }
  return J;
}

namespace {

// Inverts A after an SVD rank test; at a conjugate point the integrated
// Jacobi block keeps O(1)-conditioned pivots in most directions while one
// singular value collapses to integration-error level, which pivot- or
// determinant-magnitude tests miss.
MatrixXd guarded_inverse(const MatrixXd& A, const char* what) {
  Eigen::JacobiSVD<MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  if (sv(0) == 0.0 || sv(sv.size() - 1) <= 1e-10 * sv(0))
    throw DomainError(std::string(what) + " is numerically singular");
  return A.partialPivLu().inverse();
}

}  // namespace

MatrixXd s_matrix(const Model& model, const VectorXd& x, const VectorXd& lam,
                  double t, const OdeOptions& opt) {
  if (t == 0.0) throw DomainError("S(t) is undefined at t = 0");
  const int n = model.dim();
  JacobiFlow flow(model, x, lam, t, {vertical_init(n), horizontal_init(n)},
                  opt);
  MatrixXd Nv = flow.N(0, t);
  MatrixXd Nh = flow.N(1, t);
  return guarded_inverse(Nv, "N^V_0(t)") * Nh;
}

MatrixXd riccati_w(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t, const OdeOptions& opt) {
  const int n = model.dim();
  if (t == 0.0) return MatrixXd::Zero(n, n);
  JacobiMatrices jm =
      jacobi_propagate(model, x, lam, 0.0, t, vertical_init(n), opt);
  return jm.N * guarded_inverse(jm.M, "M^V_0(t)");
}

double change_of_basis_check(const Model& model, const VectorXd& x,
                             const VectorXd& lam, double s, double t,
                             const OdeOptions& opt) {
  const int n = model.dim();
  JacobiFlow base(model, x, lam, std::max(s, t),
                  {vertical_init(n), horizontal_init(n)}, opt);
  MatrixXd Nv0_s = base.N(0, s);
  MatrixXd Nh0_s = base.N(1, s);
  MatrixXd Mv0_t = base.M(0, t), Nv0_t = base.N(0, t);
  MatrixXd Mh0_t = base.M(1, t), Nh0_t = base.N(1, t);

  ExtremalState at_s = base.state(s);
  // Family vertical at s, looked at backwards to 0 and forwards to t.
  JacobiFlow back(model, at_s.q, at_s.p, -s, {vertical_init(n)}, opt);
  MatrixXd Nvs_0 = back.N(0, -s);
  MatrixXd Mvs_t, Nvs_t;
  if (t >= s) {
    JacobiFlow fwd(model, at_s.q, at_s.p, t - s, {vertical_init(n)}, opt);
    Mvs_t = fwd.M(0, t - s);
    Nvs_t = fwd.N(0, t - s);
  } else {
    Mvs_t = back.M(0, t - s);
    Nvs_t = back.N(0, t - s);
  }

  MatrixXd K = guarded_inverse(Nv0_s, "N^V_0(s)") * Nh0_s * Nvs_0;
  MatrixXd rM = Mvs_t + Mv0_t * K - Mh0_t * Nvs_0;
  MatrixXd rN = Nvs_t + Nv0_t * K - Nh0_t * Nvs_0;
  return std::max(rM.cwiseAbs().maxCoeff(), rN.cwiseAbs().maxCoeff());
}

}  // namespace srdist
