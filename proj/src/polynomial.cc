#include "rsstitch/polynomial.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rsstitch/error.h"

namespace rsstitch {

Polynomial::Polynomial(std::vector<double> coeffs_t, double center,
                       double half_width)
    : coeffs_t_(std::move(coeffs_t)),
      center_(center),
      half_width_(half_width) {
  if (!(half_width_ > 0.0)) {
    throw Error(ErrorCode::kParameterDomain, "polynomial interval is empty");
  }
}

Polynomial Polynomial::Interpolate(const std::function<double(double)>& f,
                                   int degree, double lo, double hi) {
  if (!(hi > lo) || degree < 0) {
    throw Error(ErrorCode::kParameterDomain, "invalid interpolation interval");
  }
  const int n = degree + 1;
  const double center = 0.5 * (lo + hi);
  const double half_width = 0.5 * (hi - lo);
  Eigen::MatrixXd V(n, n);
  Eigen::VectorXd values(n);
  for (int i = 0; i < n; ++i) {
    const double t = std::cos(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * n));
    double power = 1.0;
    for (int j = 0; j < n; ++j) {
      V(i, j) = power;
      power *= t;
    }
    values(i) = f(center + half_width * t);
  }
  const Eigen::VectorXd c = V.partialPivLu().solve(values);
  return Polynomial(std::vector<double>(c.data(), c.data() + n), center,
                    half_width);
}

double Polynomial::Evaluate(double k) const {
  const double t = (k - center_) / half_width_;
  double acc = 0.0;
  for (auto it = coeffs_t_.rbegin(); it != coeffs_t_.rend(); ++it) {
    acc = acc * t + *it;
  }
  return acc;
}

double Polynomial::Derivative(double k) const {
  const double t = (k - center_) / half_width_;
  double acc = 0.0;
  for (size_t i = coeffs_t_.size(); i-- > 1;) {
    acc = acc * t + static_cast<double>(i) * coeffs_t_[i];
  }
  return acc / half_width_;
}

int Polynomial::Degree(double rel_tol) const {
  double max_abs = 0.0;
  for (double c : coeffs_t_) max_abs = std::max(max_abs, std::abs(c));
  if (max_abs == 0.0) return -1;
  for (int i = static_cast<int>(coeffs_t_.size()) - 1; i >= 0; --i) {
    if (std::abs(coeffs_t_[i]) > rel_tol * max_abs) return i;
  }
  return -1;
}

bool Polynomial::IsZero() const { return Degree() < 0; }

std::vector<double> Polynomial::CoefficientsInK() const {
  // p(k) = sum_i c_i ((k - center) / w)^i, expanded binomially.
  const size_t n = coeffs_t_.size();
  std::vector<double> out(n, 0.0);
  // basis holds the ascending coefficients of ((k - center) / w)^i.
  std::vector<double> basis(n, 0.0);
  basis[0] = 1.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) out[j] += coeffs_t_[i] * basis[j];
    std::vector<double> next(n, 0.0);
    for (size_t j = 0; j <= i && j + 1 < n; ++j) {
      next[j + 1] += basis[j] / half_width_;
      next[j] -= basis[j] * center_ / half_width_;
    }
    basis.swap(next);
  }
  return out;
}

std::vector<double> Polynomial::RealRoots(double imag_tol) const {
  const int degree = Degree();
  std::vector<double> roots;
  if (degree < 1) return roots;
  const double lead = coeffs_t_[degree];
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) {
    companion(i, degree - 1) = -coeffs_t_[i] / lead;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return roots;
  const Eigen::VectorXcd eig = solver.eigenvalues();
  for (int i = 0; i < degree; ++i) {
    double k = center_ + half_width_ * eig(i).real();
    const double imag_k = half_width_ * eig(i).imag();
    if (std::abs(imag_k) > imag_tol * (1.0 + std::abs(k))) continue;
    for (int iter = 0; iter < 3; ++iter) {
      const double d = Derivative(k);
      if (d == 0.0) break;
      const double step = Evaluate(k) / d;
      if (!std::isfinite(step) || std::abs(step) > 1e-3 * (1.0 + std::abs(k))) {
        break;
      }
      k -= step;
    }
    roots.push_back(k);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace rsstitch
