#include "den/fdist_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace den::fdist {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

// Continued fraction for I_x(a, b) (modified Lentz), valid for
// x < (a + 1) / (a + b + 2).
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

double check_x(double d2, int n) {
  if (!(d2 >= 0.0)) throw std::domain_error("squared distance must be nonnegative");
  if (n < 1) throw std::domain_error("embedding dimension must be positive");
  if (std::isinf(d2)) return 1.0;
  return d2 / (d2 + n);
}

}  // namespace

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double hyp2f1_laplace(double a, double b, double c, double x) {
  if (!(c > b && b > 0.0)) throw std::domain_error("hyp2f1_laplace needs c > b > 0");
  if (!(x >= 0.0 && x < 1.0)) throw std::domain_error("hyp2f1_laplace needs 0 <= x < 1");
  // Mode of y^b (1-y)^(c-b) (1-xy)^(-a) in logistic coordinates: the root in
  // (0, 1) of x(c-a) y^2 + tau y + b = 0.
  const double tau = x * (a - b) - c;
  const double y = 2.0 * b / (std::sqrt(tau * tau - 4.0 * b * x * (c - a)) - tau);
  const double one_xy = 1.0 - x * y;
  // Negative second derivative of the log integrand at the mode, scaled.
  const double curvature =
      y * (1.0 - y) * (c - a * x * (1.0 - 2.0 * y + x * y * y) / (one_xy * one_xy));
  const double r = curvature / (b * (c - b));
  const double log_val = (c - 0.5) * std::log(c) - 0.5 * std::log(r) + b * std::log(y / b) +
                         (c - b) * std::log((1.0 - y) / (c - b)) - a * std::log(one_xy);
  return std::exp(log_val);
}

double f_cdf_exact(double d2, int n) {
  const double x = check_x(d2, n);
  return regularized_incomplete_beta(x, 0.5, 0.5 * n);
}

double f_cdf_laplace(double d2, int n) {
  const double x = check_x(d2, n);
  if (x == 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (n == 1 && x >= kLaplaceSwitchN1) return f_cdf_exact(d2, n);
  const double a = 0.5;
  const double b = 0.5 * n;
  // 2F1 is symmetric in its first two parameters; the Euler integral needs
  // the positive one (1/2) in the b slot.
  const double hyp = hyp2f1_laplace(1.0 - b, a, a + 1.0, x);
  const double p = hyp * std::exp(a * std::log(x) - std::log(a) - log_beta(a, b));
  return std::clamp(p, 0.0, 1.0);
}

double f_cdf_grad(double d2, int n) {
  if (!(d2 >= 0.0)) throw std::domain_error("squared distance must be nonnegative");
  if (n < 1) throw std::domain_error("embedding dimension must be positive");
  if (std::isinf(d2)) return 0.0;
  const double dd = std::max(d2, kMinSquaredDistance);
  const double a = 0.5;
  const double b = 0.5 * n;
  const double denom = dd + n;
  const double x = dd / denom;
  // (1 - x) = n / (d2 + n) computed directly to avoid cancellation.
  const double log_density =
      (a - 1.0) * std::log(x) + (b - 1.0) * std::log(n / denom) - log_beta(a, b);
  return std::exp(log_density) * n / (denom * denom);
}

PairLoss pair_loss(double d2, int n, bool is_positive, Forward forward) {
  const double p = forward == Forward::kExact ? f_cdf_exact(d2, n) : f_cdf_laplace(d2, n);
  const double g = f_cdf_grad(d2, n);
  if (is_positive) return {p, g};
  return {1.0 - p, -g};
}

}  // namespace den::fdist
