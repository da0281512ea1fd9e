#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace srdist {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Exit-code contract: InputError -> 2, NumericalError/ResourceError -> 3,
// a found violation/witness is data (exit 1), never an exception.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct CapabilityError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotFoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Stable evaluation of the trig ratios appearing in the closed-form
// exponential maps and distortion coefficients.  Direct evaluation of
// e.g. (sin s - s cos s)/s^3 loses ~2 log10(1/s) digits near s = 0; below
// |s| = 0.2 a degree-10 truncated series (truncation < 1e-18 relative
// there) keeps both branches within ~2e-14 of the true value.
inline constexpr double kSeriesSwitch = 0.2;

// sin(s)/s
template <class T>
T sinc(T s) {
  if (std::abs(s) < T(kSeriesSwitch)) {
    T s2 = s * s;
    return T(1) +
           s2 * (T(-1) / 6 +
                 s2 * (T(1) / 120 +
                       s2 * (T(-1) / 5040 +
                             s2 * (T(1) / 362880 + s2 * (T(-1) / 39916800)))));
  }
  return std::sin(s) / s;
}

// (1 - cos s)/s^2
template <class T>
T versinc(T s) {
  if (std::abs(s) < T(kSeriesSwitch)) {
    T s2 = s * s;
    return T(1) / 2 +
           s2 * (T(-1) / 24 +
                 s2 * (T(1) / 720 +
                       s2 * (T(-1) / 40320 +
                             s2 * (T(1) / 3628800 + s2 * (T(-1) / 479001600)))));
  }
  return (T(1) - std::cos(s)) / (s * s);
}

// (s - sin s)/s^3
template <class T>
T sin_defect(T s) {
  if (std::abs(s) < T(kSeriesSwitch)) {
    T s2 = s * s;
    return T(1) / 6 +
           s2 * (T(-1) / 120 +
                 s2 * (T(1) / 5040 +
                       s2 * (T(-1) / 362880 +
                             s2 * (T(1) / 39916800 + s2 * (T(-1) / 6227020800)))));
  }
  return (s - std::sin(s)) / (s * s * s);
}

// (sin s - s cos s)/s^3, the normalized form of the paper-facing
// denominator sin s - s cos s; positive on (-pi, pi), value 1/3 at 0.
template <class T>
T sincos_defect(T s) {
  if (std::abs(s) < T(kSeriesSwitch)) {
    T s2 = s * s;
    return T(1) / 3 +
           s2 * (T(-1) / 30 +
                 s2 * (T(1) / 840 +
                       s2 * (T(-1) / 45360 +
                             s2 * (T(1) / 3991680 + s2 * (T(-1) / 518918400)))));
  }
  return (std::sin(s) - s * std::cos(s)) / (s * s * s);
}

// log|det A| with sign, via partially pivoted LU.  Indispensable when the
// determinant underflows (vertical Jacobi blocks behave like t^{k+3(n-k)}).
inline std::pair<double, int> log_abs_det(const MatrixXd& A) {
  Eigen::PartialPivLU<MatrixXd> lu(A);
  const auto& m = lu.matrixLU();
  double log_abs = 0.0;
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double d = m(i, i);
    if (d == 0.0) return {-std::numeric_limits<double>::infinity(), 0};
    if (d < 0) sign = -sign;
    log_abs += std::log(std::abs(d));
  }
  return {log_abs, sign};
}

// Deterministic low-discrepancy sequence used for Newton multi-starts.
inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  for (std::uint64_t i = index + 1; i > 0; i /= base) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(i % base);
  }
  return r;
}

// 64-bit FNV-1a, used to fingerprint model/config text in reports.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace srdist
