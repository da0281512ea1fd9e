#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srdist/numeric.hpp"

namespace srdist {

enum class ModelKind { Heisenberg3, Grushin2, HType, GenericFrame };

// Sparse polynomial in n variables; generic frames carry these so the
// variational flow can differentiate the fields exactly.
struct Monomial {
  double coeff;
  VectorXi exps;
};

struct Polynomial {
  int vars = 0;
  std::vector<Monomial> terms;

  static Polynomial constant(int vars, double c);
  double value(const VectorXd& x) const;
  Polynomial derivative(int var) const;
  int degree() const;
};

struct HTypeParams {
  int k = 0;                  // first-layer dimension; second layer has n-k
  std::vector<MatrixXd> J;    // n-k skew-symmetric k x k operators
  MatrixXd S;                 // symmetric nonnegative k x k operator
};

struct HTypeCheckReport {
  bool pass = false;
  double max_residual = 0.0;
  std::vector<std::pair<int, int>> violating_pairs;
};

// Blocks of the linearized Hamiltonian flow in canonical coordinates.
// Layout: A(i,j) = d^2 H / dp_i dq_j, B = d^2 H / dp^2, R = d^2 H / dq^2,
// so the Jacobi system reads Mdot = -A^T M - R N, Ndot = B M + A N and the
// vertical Riccati matrix W = N M^{-1} satisfies
// Wdot = B + A W + W A^T + W R W.
struct VariationalCoefficients {
  MatrixXd A, B, R;
};

class Model {
 public:
  static Model heisenberg3();
  static Model grushin2();
  static Model htype(int n, int k, std::vector<MatrixXd> J, MatrixXd S);
  static Model generic_frame(int dim, std::vector<std::vector<Polynomial>> fields,
                             std::optional<Polynomial> density = std::nullopt);

  ModelKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int rank() const { return rank_; }
  const HTypeParams& htype_params() const;
  const std::string& name() const { return name_; }

  // Frame columns X_1(x) .. X_m(x), n x m.
  MatrixXd frame(const VectorXd& x) const;
  // dF[i](a,b) = d(X_i)_a / dx_b.
  std::vector<MatrixXd> frame_jacobians(const VectorXd& x) const;

  double hamiltonian(const VectorXd& x, const VectorXd& p) const;
  // q-dot and p-dot of Hamilton's equations.
  void hamiltonian_rhs(const VectorXd& x, const VectorXd& p, VectorXd& dq,
                       VectorXd& dp) const;
  VariationalCoefficients variational_coefficients(const VectorXd& x,
                                                   const VectorXd& p) const;
  // RHS and coefficients in one pass (the Jacobi propagation hot path).
  void variational_rhs(const VectorXd& x, const VectorXd& p, VectorXd& dq,
                       VectorXd& dp, VariationalCoefficients& co) const;

  double measure_density(const VectorXd& x) const;

  // Canonical text form, hashed into every report.
  std::string canonical_text() const;

  void check_point(const VectorXd& x) const;

 private:
  Model() = default;

  ModelKind kind_ = ModelKind::Heisenberg3;
  int dim_ = 0;
  int rank_ = 0;
  std::string name_;
  std::optional<HTypeParams> htype_;
  // GenericFrame: fields_[i][a] is the polynomial for coordinate a of X_i;
  // first/second derivatives are precomputed at construction.
  std::vector<std::vector<Polynomial>> fields_;
  std::vector<std::vector<std::vector<Polynomial>>> fields_d1_;
  std::vector<std::vector<std::vector<std::vector<Polynomial>>>> fields_d2_;
  std::optional<Polynomial> density_;

  bool frame_is_affine() const;
  void frame_hessians(const VectorXd& x, const VectorXd& p,
                      std::vector<MatrixXd>& T) const;
};

// Frame vectors at x, per the model's coordinate chart.
MatrixXd generating_frame(const Model& model, const VectorXd& x);

double hamiltonian(const Model& model, const VectorXd& x, const VectorXd& p);

double measure_density(const Model& model, const VectorXd& x);

// Verifies skewness of each J_a and the structure identity
// J_V J_W + J_W J_V = -2 <V,W> S^2 on basis pairs of the second layer.
HTypeCheckReport htype_structure_check(const HTypeParams& params,
                                       double tol = 1e-12);

}  // namespace srdist
