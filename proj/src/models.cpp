#include "srdist/models.hpp"

#include <sstream>

namespace srdist {

Polynomial Polynomial::constant(int vars, double c) {
  Polynomial p;
  p.vars = vars;
  if (c != 0.0) p.terms.push_back({c, VectorXi::Zero(vars)});
  return p;
}

double Polynomial::value(const VectorXd& x) const {
  double acc = 0.0;
  for (const Monomial& m : terms) {
    double v = m.coeff;
    for (int i = 0; i < vars; ++i)
      for (int e = 0; e < m.exps[i]; ++e) v *= x[i];
    acc += v;
  }
  return acc;
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial out;
  out.vars = vars;
  for (const Monomial& m : terms) {
    if (m.exps[var] == 0) continue;
    Monomial d = m;
    d.coeff *= m.exps[var];
    d.exps[var] -= 1;
    out.terms.push_back(std::move(d));
  }
  return out;
}

int Polynomial::degree() const {
  int d = 0;
  for (const Monomial& m : terms) d = std::max(d, m.exps.sum());
  return d;
}

Model Model::heisenberg3() {
  Model m;
  m.kind_ = ModelKind::Heisenberg3;
  m.dim_ = 3;
  m.rank_ = 2;
  m.name_ = "heisenberg3";
  return m;
}

Model Model::grushin2() {
  Model m;
  m.kind_ = ModelKind::Grushin2;
  m.dim_ = 2;
  m.rank_ = 2;
  m.name_ = "grushin2";
  return m;
}

Model Model::htype(int n, int k, std::vector<MatrixXd> J, MatrixXd S) {
  if (k < 1 || n - k < 1) throw InputError("htype: need 1 <= k < n");
  if (static_cast<int>(J.size()) != n - k)
    throw InputError("htype: expected n-k operators J");
  HTypeParams params{k, std::move(J), std::move(S)};
  for (const MatrixXd& Ja : params.J)
    if (Ja.rows() != k || Ja.cols() != k)
      throw InputError("htype: J operator dimension mismatch");
  if (params.S.rows() != k || params.S.cols() != k)
    throw InputError("htype: S dimension mismatch");
  if ((params.S - params.S.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw InputError("htype: S must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(params.S);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw InputError("htype: S must be nonnegative");
  if (params.S.cwiseAbs().maxCoeff() == 0.0)
    throw InputError("htype: S must be non-zero");
  HTypeCheckReport rep = htype_structure_check(params);
  if (!rep.pass)
    throw InputError("htype: structure identity J_V J_W + J_W J_V = -2<V,W>S^2 "
                     "violated, max residual " +
                     std::to_string(rep.max_residual));
  Model m;
  m.kind_ = ModelKind::HType;
  m.dim_ = n;
  m.rank_ = k;
  m.name_ = "htype(" + std::to_string(k) + "," + std::to_string(n) + ")";
  m.htype_ = std::move(params);
  return m;
}

Model Model::generic_frame(int dim, std::vector<std::vector<Polynomial>> fields,
                           std::optional<Polynomial> density) {
  if (dim < 1 || fields.empty()) throw InputError("generic_frame: empty spec");
  Model m;
  m.kind_ = ModelKind::GenericFrame;
  m.dim_ = dim;
  m.rank_ = static_cast<int>(fields.size());
  m.name_ = "generic_frame";
  for (auto& field : fields) {
    if (static_cast<int>(field.size()) != dim)
      throw InputError("generic_frame: field component count != dim");
    for (auto& comp : field) {
      if (comp.vars != dim)
        throw InputError("generic_frame: polynomial variable count != dim");
      if (comp.degree() > 3)
        throw InputError("generic_frame: polynomial degree > 3");
    }
  }
  m.fields_ = std::move(fields);
  m.fields_d1_.resize(m.rank_);
  m.fields_d2_.resize(m.rank_);
  for (int i = 0; i < m.rank_; ++i) {
    m.fields_d1_[i].resize(dim);
    m.fields_d2_[i].resize(dim);
    for (int a = 0; a < dim; ++a) {
      m.fields_d1_[i][a].resize(dim);
      m.fields_d2_[i][a].resize(dim);
      for (int b = 0; b < dim; ++b) {
        m.fields_d1_[i][a][b] = m.fields_[i][a].derivative(b);
        m.fields_d2_[i][a][b].resize(dim);
        for (int c = 0; c < dim; ++c)
          m.fields_d2_[i][a][b][c] = m.fields_d1_[i][a][b].derivative(c);
      }
    }
  }
  if (density) {
    if (density->vars != dim)
      throw InputError("generic_frame: density variable count != dim");
    m.density_ = std::move(density);
  }
  return m;
}

const HTypeParams& Model::htype_params() const {
  if (!htype_) throw CapabilityError("model has no H-type parameters");
  return *htype_;
}

void Model::check_point(const VectorXd& x) const {
  if (x.size() != dim_)
    throw InputError("dimension mismatch: expected " + std::to_string(dim_) +
                     " coordinates, got " + std::to_string(x.size()));
}

bool Model::frame_is_affine() const { return kind_ != ModelKind::GenericFrame; }

MatrixXd Model::frame(const VectorXd& x) const {
  check_point(x);
  MatrixXd F = MatrixXd::Zero(dim_, rank_);
  switch (kind_) {
    case ModelKind::Heisenberg3:
      F(0, 0) = 1.0;
      F(2, 0) = -x[1] / 2;
      F(1, 1) = 1.0;
      F(2, 1) = x[0] / 2;
      break;
    case ModelKind::Grushin2:
      F(0, 0) = 1.0;
      F(1, 1) = x[0];
      break;
    case ModelKind::HType: {
      const HTypeParams& ht = *htype_;
      const int k = ht.k;
      for (int i = 0; i < k; ++i) F(i, i) = 1.0;
      for (int a = 0; a < dim_ - k; ++a) {
        VectorXd Jx = ht.J[a] * x.head(k);
        for (int i = 0; i < k; ++i) F(k + a, i) = 0.5 * Jx[i];
      }
      break;
    }
    case ModelKind::GenericFrame:
      for (int i = 0; i < rank_; ++i)
        for (int a = 0; a < dim_; ++a) F(a, i) = fields_[i][a].value(x);
      break;
  }
  return F;
}

std::vector<MatrixXd> Model::frame_jacobians(const VectorXd& x) const {
  check_point(x);
  std::vector<MatrixXd> dF(rank_, MatrixXd::Zero(dim_, dim_));
  switch (kind_) {
    case ModelKind::Heisenberg3:
      dF[0](2, 1) = -0.5;
      dF[1](2, 0) = 0.5;
      break;
    case ModelKind::Grushin2:
      dF[1](1, 0) = 1.0;
      break;
    case ModelKind::HType: {
      const HTypeParams& ht = *htype_;
      const int k = ht.k;
      for (int a = 0; a < dim_ - k; ++a)
        for (int i = 0; i < k; ++i)
          for (int b = 0; b < k; ++b) dF[i](k + a, b) = 0.5 * ht.J[a](i, b);
      break;
    }
    case ModelKind::GenericFrame:
      for (int i = 0; i < rank_; ++i)
        for (int a = 0; a < dim_; ++a)
          for (int b = 0; b < dim_; ++b)
            dF[i](a, b) = fields_d1_[i][a][b].value(x);
      break;
  }
  return dF;
}

void Model::frame_hessians(const VectorXd& x, const VectorXd& p,
                           std::vector<MatrixXd>& T) const {
  // T[i](b,c) = sum_a p_a d2(X_i)_a / dx_b dx_c; zero unless the frame is
  // a genuinely nonlinear polynomial one.
  T.assign(rank_, MatrixXd::Zero(dim_, dim_));
  if (frame_is_affine()) return;
  for (int i = 0; i < rank_; ++i)
    for (int a = 0; a < dim_; ++a) {
      if (p[a] == 0.0) continue;
      for (int b = 0; b < dim_; ++b)
        for (int c = 0; c < dim_; ++c)
          T[i](b, c) += p[a] * fields_d2_[i][a][b][c].value(x);
    }
}

double Model::hamiltonian(const VectorXd& x, const VectorXd& p) const {
  check_point(x);
  check_point(p);
  switch (kind_) {
    case ModelKind::Heisenberg3: {
      double h1 = p[0] - x[1] * p[2] / 2;
      double h2 = p[1] + x[0] * p[2] / 2;
      return 0.5 * (h1 * h1 + h2 * h2);
    }
    case ModelKind::Grushin2: {
      double h2 = x[0] * p[1];
      return 0.5 * (p[0] * p[0] + h2 * h2);
    }
    default: {
      VectorXd h = frame(x).transpose() * p;
      return 0.5 * h.squaredNorm();
    }
  }
}

void Model::hamiltonian_rhs(const VectorXd& x, const VectorXd& p, VectorXd& dq,
                            VectorXd& dp) const {
  MatrixXd F = frame(x);
  std::vector<MatrixXd> dF = frame_jacobians(x);
  VectorXd h = F.transpose() * p;
  dq = F * h;
  dp = VectorXd::Zero(dim_);
  for (int i = 0; i < rank_; ++i) dp.noalias() -= h[i] * (dF[i].transpose() * p);
}

VariationalCoefficients Model::variational_coefficients(const VectorXd& x,
                                                        const VectorXd& p) const {
  VectorXd dq, dp;
  VariationalCoefficients co;
  variational_rhs(x, p, dq, dp, co);
  return co;
}

void Model::variational_rhs(const VectorXd& x, const VectorXd& p, VectorXd& dq,
                            VectorXd& dp, VariationalCoefficients& co) const {
  MatrixXd F = frame(x);
  std::vector<MatrixXd> dF = frame_jacobians(x);
  VectorXd h = F.transpose() * p;

  // G(i,b) = d h_i / dq_b
  MatrixXd G(rank_, dim_);
  for (int i = 0; i < rank_; ++i) G.row(i) = (dF[i].transpose() * p).transpose();

  dq = F * h;
  dp = -(G.transpose() * h);

  co.B = F * F.transpose();
  co.A = F * G;
  for (int i = 0; i < rank_; ++i) co.A.noalias() += h[i] * dF[i];
  co.R = G.transpose() * G;
  if (!frame_is_affine()) {
    std::vector<MatrixXd> T;
    frame_hessians(x, p, T);
    for (int i = 0; i < rank_; ++i) co.R.noalias() += h[i] * T[i];
  }
}

double Model::measure_density(const VectorXd& x) const {
  check_point(x);
  if (density_) return density_->value(x);
  return 1.0;
}

std::string Model::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "kind=" << name_ << ";dim=" << dim_ << ";rank=" << rank_;
  if (htype_) {
    os << ";k=" << htype_->k << ";S=" << htype_->S.reshaped().transpose();
    for (std::size_t a = 0; a < htype_->J.size(); ++a)
      os << ";J" << a + 1 << "=" << htype_->J[a].reshaped().transpose();
  }
  for (std::size_t i = 0; i < fields_.size(); ++i)
    for (std::size_t a = 0; a < fields_[i].size(); ++a)
      for (const Monomial& mn : fields_[i][a].terms)
        os << ";f" << i << "." << a << ":" << mn.coeff << "@"
           << mn.exps.transpose();
  return os.str();
}

MatrixXd generating_frame(const Model& model, const VectorXd& x) {
  return model.frame(x);
}

double hamiltonian(const Model& model, const VectorXd& x, const VectorXd& p) {
  return model.hamiltonian(x, p);
}

double measure_density(const Model& model, const VectorXd& x) {
  return model.measure_density(x);
}

HTypeCheckReport htype_structure_check(const HTypeParams& params, double tol) {
  const int k = params.k;
  const int corank = static_cast<int>(params.J.size());
  for (int a = 0; a < corank; ++a)
    if ((params.J[a] + params.J[a].transpose()).cwiseAbs().maxCoeff() > tol)
      throw InputError("htype_structure_check: J_" + std::to_string(a + 1) +
                       " is not skew-symmetric");
  HTypeCheckReport rep;
  rep.pass = true;
  MatrixXd S2 = params.S * params.S;
  for (int a = 0; a < corank; ++a)
    for (int b = a; b < corank; ++b) {
      MatrixXd lhs = params.J[a] * params.J[b] + params.J[b] * params.J[a];
      MatrixXd rhs = -2.0 * (a == b ? 1.0 : 0.0) * S2;
      double resid = (lhs - rhs).cwiseAbs().maxCoeff();
      rep.max_residual = std::max(rep.max_residual, resid);
      if (resid > tol) {
        rep.pass = false;
        rep.violating_pairs.emplace_back(a, b);
      }
    }
  (void)k;
  return rep;
}

}  // namespace srdist
