#pragma once

#include <functional>
#include <vector>

namespace rsstitch {

// Univariate real polynomial over an interval [lo, hi], stored in the mapped
// variable t = (k - center) / half_width so that coefficients stay well
// scaled on wide k ranges.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::vector<double> coeffs_t, double center, double half_width);

  // Interpolates f at degree + 1 Chebyshev nodes of [lo, hi]. Exact (up to
  // roundoff) when f is a polynomial of at most that degree.
  static Polynomial Interpolate(const std::function<double(double)>& f,
                                int degree, double lo, double hi);

  double Evaluate(double k) const;
  double Derivative(double k) const;

  // Degree after trimming leading coefficients below rel_tol * max |c|.
  int Degree(double rel_tol = 1e-12) const;
  bool IsZero() const;

  // Ascending coefficients in t.
  const std::vector<double>& coeffs_t() const { return coeffs_t_; }
  // Ascending coefficients in k (monomial basis of the original variable).
  std::vector<double> CoefficientsInK() const;

  double center() const { return center_; }
  double half_width() const { return half_width_; }

  // Real roots from the companion-matrix eigenvalues, polished by Newton
  // steps. A root is real when |Im k| <= imag_tol * (1 + |k|).
  std::vector<double> RealRoots(double imag_tol = 1e-8) const;

 private:
  std::vector<double> coeffs_t_;
  double center_ = 0.0;
  double half_width_ = 1.0;
};

}  // namespace rsstitch
