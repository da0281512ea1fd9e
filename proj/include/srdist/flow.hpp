#pragma once

#include <utility>
#include <vector>

#include "srdist/models.hpp"
#include "srdist/ode.hpp"

namespace srdist {

struct ExtremalState {
  VectorXd q, p;
};

// Heisenberg group operations in exponential coordinates; the generating
// frame is left-invariant for this product.
VectorXd heisenberg_mul(const VectorXd& g, const VectorXd& h);
VectorXd heisenberg_inverse(const VectorXd& g);

bool has_closed_exp(const Model& model);

// exp_x(t lam) with the transported covector, via the integrated closed
// formulas (Heisenberg from any base through left translation, Grushin
// directly); trig ratios go through the series-stabilized forms.
ExtremalState exp_closed_state(const Model& model, const VectorXd& x,
                               const VectorXd& lam, double t);
VectorXd exp_closed(const Model& model, const VectorXd& x, const VectorXd& lam,
                    double t);

// Hamilton's equations integrated adaptively; dense in [0, t1].
OdeSolution extremal_flow(const Model& model, const VectorXd& x,
                          const VectorXd& lam, double t1,
                          const OdeOptions& opt = {});
ExtremalState exp_numeric_state(const Model& model, const VectorXd& x,
                                const VectorXd& lam, double t,
                                const OdeOptions& opt = {});
VectorXd exp_numeric(const Model& model, const VectorXd& x, const VectorXd& lam,
                     double t, const OdeOptions& opt = {});

// Closed form when the model has one, numeric otherwise.
ExtremalState exp_state(const Model& model, const VectorXd& x,
                        const VectorXd& lam, double t);
VectorXd exp_point(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t);

// A Jacobi matrix pair; M is the covector block, N the base block, so for
// the family vertical at 0, N(t) is the Jacobian of lam -> exp_x(t lam).
struct JacobiInit {
  MatrixXd M, N;
};
JacobiInit vertical_init(int n);
JacobiInit horizontal_init(int n);

// Extremal plus any number of Jacobi families advanced through an
// increasing sequence of times; every queried time is an exact integration
// endpoint.  This is the workhorse for distortion grids.
class FlowPath {
 public:
  FlowPath(const Model& model, VectorXd x, VectorXd lam,
           std::vector<JacobiInit> families = {}, OdeOptions opt = {});

  void advance(double t);
  double time() const { return t_; }
  VectorXd q() const { return y_.segment(0, n_); }
  VectorXd p() const { return y_.segment(n_, n_); }
  ExtremalState state() const { return {q(), p()}; }
  MatrixXd M(int family) const;
  MatrixXd N(int family) const;
  std::pair<double, int> log_abs_det_N(int family) const;

 private:
  const Model* model_;
  int n_, nf_;
  OdeOptions opt_;
  double t_ = 0.0;
  VectorXd y_;
};

// Same joint system kept as a dense solution over [0, T] (T may be
// negative); interpolated queries serve determinant scans and grid checks.
class JacobiFlow {
 public:
  JacobiFlow(const Model& model, const VectorXd& x, const VectorXd& lam,
             double T, std::vector<JacobiInit> families,
             const OdeOptions& opt = {});

  int dim() const { return n_; }
  ExtremalState state(double t) const;
  MatrixXd M(int family, double t) const;
  MatrixXd N(int family, double t) const;
  std::pair<double, int> log_abs_det_N(int family, double t) const;
  double hamiltonian(double t) const;

 private:
  VectorXd raw(double t) const;
  const Model* model_;
  int n_, nf_;
  OdeSolution sol_;
};

struct JacobiMatrices {
  MatrixXd M, N;
  ExtremalState state;
};

// Propagates init (given at time s along the extremal of (x, lam)) to time
// t; s = 0, init = vertical_init recovers the exponential-map Jacobian.
JacobiMatrices jacobi_propagate(const Model& model, const VectorXd& x,
                                const VectorXd& lam, double s, double t,
                                const JacobiInit& init,
                                const OdeOptions& opt = {});

// N^V_0(t), the coordinate Jacobian of lam -> exp_x(t lam).
MatrixXd exp_jacobian(const Model& model, const VectorXd& x, const VectorXd& lam,
                      double t, const OdeOptions& opt = {});
// Central-difference cross-check oracle, step 1e-6 * max(1, |lam|).
MatrixXd exp_jacobian_fd(const Model& model, const VectorXd& x,
                         const VectorXd& lam, double t);

// S-matrix work inverts N^V_0(t), which amplifies integration error by
// ~|S(t)| (and |S| grows like 1/t^3 towards t=0), so it runs tighter than
// the generic flow defaults.
inline OdeOptions s_matrix_ode_options() {
  OdeOptions opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-13;
  return opt;
}

// S(t) = N^V_0(t)^{-1} N^H_0(t); symmetric, decreasing in t between 0 and
// the first conjugate time.
MatrixXd s_matrix(const Model& model, const VectorXd& x, const VectorXd& lam,
                  double t, const OdeOptions& opt = s_matrix_ode_options());

// W(t) = N^V_0(t) M^V_0(t)^{-1}, the Riccati matrix of the vertical family.
MatrixXd riccati_w(const Model& model, const VectorXd& x, const VectorXd& lam,
                   double t, const OdeOptions& opt = {});

// Max-norm residual of
//   J^V_s(t) = -J^V_0(t) N^V_0(s)^{-1} N^H_0(s) N^V_s(0) + J^H_0(t) N^V_s(0)
// with every factor propagated independently.
double change_of_basis_check(const Model& model, const VectorXd& x,
                             const VectorXd& lam, double s, double t,
                             const OdeOptions& opt = {});

}  // namespace srdist
