#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "rot/error.hpp"
#include "rot/types.hpp"

namespace rot {

enum class RegKind { entropy, burg, fermi_dirac, beta_potential, lp_quasi };

/// Separable proper regularizer f(x) = sum_k f(x_k). Every member of the
/// family has a diagonal Hessian; callers rely on that.
struct Regularizer {
  RegKind kind = RegKind::entropy;
  /// beta for beta_potential, exponent for lp_quasi, unused otherwise.
  double param = 0.0;

  static Regularizer entropy() { return {RegKind::entropy, 0.0}; }
  static Regularizer burg() { return {RegKind::burg, 0.0}; }
  static Regularizer fermi_dirac() { return {RegKind::fermi_dirac, 0.0}; }
  static Regularizer beta_potential(double beta);
  static Regularizer lp_quasi(double exponent);

  /// Parses `entropy`, `burg`, `fermi`, `beta:<b>` and `lpq:<p>`.
  static Regularizer parse(std::string_view text);
  std::string name() const;

  bool operator==(const Regularizer&) const = default;
};

namespace detail {

[[noreturn]] inline void domain_failure(const char* what, double x) {
  throw DomainError(std::string(what) + " at " + std::to_string(x));
}

template <typename S>
S entry_value(const Regularizer& reg, S x) {
  using std::log;
  using std::pow;
  switch (reg.kind) {
    case RegKind::entropy:
      if (!(x >= S(0))) domain_failure("entropy undefined", double(x));
      return (x > S(0) ? x * log(x) : S(0)) - x + S(1);
    case RegKind::burg:
      if (!(x > S(0))) domain_failure("Burg entropy undefined", double(x));
      return x - log(x) - S(1);
    case RegKind::fermi_dirac:
      if (!(x >= S(0) && x < S(1))) domain_failure("Fermi-Dirac entropy undefined", double(x));
      return (x > S(0) ? x * log(x) : S(0)) + (S(1) - x) * log(S(1) - x);
    case RegKind::beta_potential: {
      if (!(x >= S(0))) domain_failure("beta-potential undefined", double(x));
      const S b(reg.param);
      return (pow(x, b) - b * x + b - S(1)) / (b * (b - S(1)));
    }
    case RegKind::lp_quasi:
      if (!(x >= S(0))) domain_failure("quasi-norm undefined", double(x));
      return -pow(x, S(reg.param));
  }
  return S(0);
}

template <typename S>
S entry_grad(const Regularizer& reg, S x) {
  using std::log;
  using std::pow;
  switch (reg.kind) {
    case RegKind::entropy:
      if (!(x > S(0))) domain_failure("entropy gradient undefined", double(x));
      return log(x);
    case RegKind::burg:
      if (!(x > S(0))) domain_failure("Burg gradient undefined", double(x));
      return S(1) - S(1) / x;
    case RegKind::fermi_dirac:
      if (!(x > S(0) && x < S(1))) domain_failure("Fermi-Dirac gradient undefined", double(x));
      return log(x) - log(S(1) - x);
    case RegKind::beta_potential: {
      if (!(x > S(0))) domain_failure("beta-potential gradient undefined", double(x));
      const S b(reg.param);
      return (pow(x, b - S(1)) - S(1)) / (b - S(1));
    }
    case RegKind::lp_quasi: {
      if (!(x > S(0))) domain_failure("quasi-norm gradient undefined", double(x));
      const S p(reg.param);
      return -p * pow(x, p - S(1));
    }
  }
  return S(0);
}

template <typename S>
S entry_hess(const Regularizer& reg, S x) {
  using std::pow;
  switch (reg.kind) {
    case RegKind::entropy:
      if (!(x > S(0))) domain_failure("entropy Hessian undefined", double(x));
      return S(1) / x;
    case RegKind::burg:
      if (!(x > S(0))) domain_failure("Burg Hessian undefined", double(x));
      return S(1) / (x * x);
    case RegKind::fermi_dirac:
      if (!(x > S(0) && x < S(1))) domain_failure("Fermi-Dirac Hessian undefined", double(x));
      return S(1) / (x * (S(1) - x));
    case RegKind::beta_potential:
      if (!(x > S(0))) domain_failure("beta-potential Hessian undefined", double(x));
      return pow(x, S(reg.param) - S(2));
    case RegKind::lp_quasi: {
      if (!(x > S(0))) domain_failure("quasi-norm Hessian undefined", double(x));
      const S p(reg.param);
      return p * (S(1) - p) * pow(x, p - S(2));
    }
  }
  return S(0);
}

/// 1 / hess, written out to stay accurate where the Hessian overflows.
template <typename S>
S entry_inverse_hess(const Regularizer& reg, S x) {
  using std::pow;
  if (!(x > S(0))) domain_failure("inverse Hessian undefined", double(x));
  switch (reg.kind) {
    case RegKind::entropy:
      return x;
    case RegKind::burg:
      return x * x;
    case RegKind::fermi_dirac:
      if (!(x < S(1))) domain_failure("inverse Hessian undefined", double(x));
      return x * (S(1) - x);
    case RegKind::beta_potential:
      return pow(x, S(2) - S(reg.param));
    case RegKind::lp_quasi: {
      const S p(reg.param);
      return pow(x, S(2) - p) / (p * (S(1) - p));
    }
  }
  return S(0);
}

template <typename S>
bool entry_in_conjugate_domain(const Regularizer& reg, S y) {
  if (!std::isfinite(double(y))) return false;
  switch (reg.kind) {
    case RegKind::entropy:
    case RegKind::fermi_dirac:
      return true;
    case RegKind::burg:
      return y < S(1);
    case RegKind::beta_potential:
      return y < S(1) / (S(1) - S(reg.param));
    case RegKind::lp_quasi:
      return y < S(0);
  }
  return false;
}

template <typename S>
S entry_conjugate_grad(const Regularizer& reg, S y) {
  using std::exp;
  using std::pow;
  if (!entry_in_conjugate_domain(reg, y)) domain_failure("outside conjugate domain", double(y));
  switch (reg.kind) {
    case RegKind::entropy:
      return exp(y);
    case RegKind::burg:
      return S(1) / (S(1) - y);
    case RegKind::fermi_dirac:
      return y >= S(0) ? S(1) / (S(1) + exp(-y)) : exp(y) / (S(1) + exp(y));
    case RegKind::beta_potential: {
      const S b(reg.param);
      return pow(S(1) + (b - S(1)) * y, S(1) / (b - S(1)));
    }
    case RegKind::lp_quasi: {
      const S p(reg.param);
      return pow(-y / p, S(1) / (p - S(1)));
    }
  }
  return S(0);
}

template <typename S>
S entry_conjugate_value(const Regularizer& reg, S y) {
  using std::exp;
  using std::log;
  using std::log1p;
  if (!entry_in_conjugate_domain(reg, y)) domain_failure("outside conjugate domain", double(y));
  switch (reg.kind) {
    case RegKind::entropy:
      return exp(y) - S(1);
    case RegKind::burg:
      return -log(S(1) - y);
    case RegKind::fermi_dirac:
      return y > S(0) ? y + log1p(exp(-y)) : log1p(exp(y));
    case RegKind::beta_potential:
    case RegKind::lp_quasi: {
      const S x = entry_conjugate_grad(reg, y);
      return y * x - entry_value(reg, x);
    }
  }
  return S(0);
}

}  // namespace detail

template <typename Derived>
typename Derived::Scalar value(const Regularizer& reg, const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  S total(0);
  for (Index k = 0; k < x.size(); ++k) total += detail::entry_value(reg, S(x(k)));
  return total;
}

template <typename Derived>
VectorX<typename Derived::Scalar> grad(const Regularizer& reg,
                                       const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([&reg](S v) { return detail::entry_grad(reg, v); });
}

template <typename Derived>
VectorX<typename Derived::Scalar> hess_diag(const Regularizer& reg,
                                            const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([&reg](S v) { return detail::entry_hess(reg, v); });
}

/// Diagonal of the inverse Hessian, the weight matrix of the sensitivity system.
template <typename Derived>
VectorX<typename Derived::Scalar> inverse_hess_diag(const Regularizer& reg,
                                                    const Eigen::MatrixBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return x.unaryExpr([&reg](S v) { return detail::entry_inverse_hess(reg, v); });
}

template <typename Derived>
bool in_conjugate_domain(const Regularizer& reg, const Eigen::MatrixBase<Derived>& y) {
  for (Index k = 0; k < y.size(); ++k)
    if (!detail::entry_in_conjugate_domain(reg, y(k))) return false;
  return true;
}

/// Gradient of the convex conjugate, the entrywise inverse of `grad`.
template <typename Derived>
VectorX<typename Derived::Scalar> conjugate_grad(const Regularizer& reg,
                                                 const Eigen::MatrixBase<Derived>& y) {
  using S = typename Derived::Scalar;
  return y.unaryExpr([&reg](S v) { return detail::entry_conjugate_grad(reg, v); });
}

template <typename Derived>
typename Derived::Scalar conjugate_value(const Regularizer& reg,
                                         const Eigen::MatrixBase<Derived>& y) {
  using S = typename Derived::Scalar;
  S total(0);
  for (Index k = 0; k < y.size(); ++k) total += detail::entry_conjugate_value(reg, S(y(k)));
  return total;
}

}  // namespace rot
