#include "dsense/expint.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dsense/model.hpp"

namespace dsense {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 1000;

void check_args(int n, double x) {
  if (n < 1)
    throw ModelError("exponential integral order must be >= 1, got " + std::to_string(n));
  if (!(x > 0.0) || !std::isfinite(x))
    throw ModelError("exponential integral argument must be finite and > 0");
}

// Power series about x = 0. The n-1 term carries the logarithmic singularity
// and uses psi(n) = -gamma + sum_{i<n} 1/i.
double series(int n, double x) {
  const int nm1 = n - 1;
  double sum = nm1 != 0 ? 1.0 / nm1 : -std::log(x) - std::numbers::egamma;
  double fact = 1.0;
  for (int i = 1; i <= kMaxIter; ++i) {
    fact *= -x / i;
    double del;
    if (i != nm1) {
      del = -fact / (i - nm1);
    } else {
      double psi = -std::numbers::egamma;
      for (int ii = 1; ii <= nm1; ++ii)
        psi += 1.0 / ii;
      del = fact * (-std::log(x) + psi);
    }
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps)
      return sum;
  }
  throw std::runtime_error("exponential integral series failed to converge");
}

// Modified Lentz evaluation of the continued fraction for e^x E_n(x).
double continued_fraction_scaled(int n, double x) {
  constexpr double tiny = 1e-300;
  double b = x + n;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (n - 1 + i);
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps)
      return h;
  }
  throw std::runtime_error("exponential integral continued fraction failed to converge");
}

} // namespace

double exp_integral_en(int n, double x) {
  check_args(n, x);
  if (x <= kExpIntSeriesCutoff)
    return series(n, x);
  return continued_fraction_scaled(n, x) * std::exp(-x);
}

double exp_integral_en_scaled(int n, double x) {
  check_args(n, x);
  if (x <= kExpIntSeriesCutoff)
    return series(n, x) * std::exp(x);
  return continued_fraction_scaled(n, x);
}

} // namespace dsense
