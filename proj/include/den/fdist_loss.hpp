#pragma once

namespace den::fdist {

// Pairwise probability built on the F(1, n) distribution of a squared
// embedding distance d2:
//
//   P(d2) = I_x(1/2, n/2),  x = d2 / (d2 + n)
//
// P grows with distance. Positive pairs minimize P, negative pairs 1 - P.

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction,
/// accurate to ~1e-14 absolute. Requires a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double x, double a, double b);

/// log B(a, b) via lgamma.
double log_beta(double a, double b);

/// Laplace approximation of 2F1(a, b; c; x) (Butler & Wood) from the Euler
/// integral, with the gamma ratio replaced by its Stirling form so the value
/// is exact at x = 0. Requires c > b > 0 and 0 <= x < 1.
double hyp2f1_laplace(double a, double b, double c, double x);

/// Oracle path: continued-fraction incomplete beta. Throws std::domain_error
/// for d2 < 0.
double f_cdf_exact(double d2, int n);

/// Forward path through 2F1 with its Laplace approximation:
///   B(x; 1/2, n/2) = 2F1(1/2, 1 - n/2; 3/2; x) * x^{1/2} / (1/2)
/// Falls back to f_cdf_exact where the approximation is out of tolerance
/// (n = 1, x >= kLaplaceSwitchN1).
double f_cdf_laplace(double d2, int n);

/// x in the n = 1 case above which f_cdf_laplace delegates to the exact path.
inline constexpr double kLaplaceSwitchN1 = 0.75;

/// dP/dd2, from the beta density:
///   x^{-1/2} (1-x)^{n/2-1} / B(1/2, n/2) * n / (d2 + n)^2
/// d2 is clamped to kMinSquaredDistance to keep the x^{-1/2} term finite.
double f_cdf_grad(double d2, int n);

inline constexpr double kMinSquaredDistance = 1e-8;

enum class Forward { kLaplace, kExact };

struct PairLoss {
  double loss;
  double dloss_dd2;
};

/// loss = P for positive pairs, 1 - P for negative pairs; the gradient is
/// +-f_cdf_grad either way.
PairLoss pair_loss(double d2, int n, bool is_positive, Forward forward = Forward::kLaplace);

}  // namespace den::fdist
