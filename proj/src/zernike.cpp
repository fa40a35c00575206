#include "dopt/zernike.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace dopt::zernike {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

struct RadialTable {
  // coeffs[j-1][p] multiplies rho^p
  std::array<std::array<double, 11>, kModeCount> coeffs{};
  std::array<NollMode, kModeCount> modes{};

  RadialTable() {
    for (int j = 1; j <= kModeCount; ++j) {
      const NollMode nm = noll_to_nm(j);
      modes[j - 1] = nm;
      const int n = nm.n;
      const int m = std::abs(nm.m);
      for (int s = 0; s <= (n - m) / 2; ++s) {
        const double c = ((s % 2) ? -1.0 : 1.0) * factorial(n - s) /
                         (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
        coeffs[j - 1][n - 2 * s] += c;
      }
    }
  }
};

const RadialTable& table() {
  static const RadialTable t;
  return t;
}

}  // namespace

NollMode noll_to_nm(int j) {
  if (j < 1) throw std::invalid_argument("Noll index must be >= 1");
  int n = 0;
  while ((n + 1) * (n + 2) / 2 < j) ++n;
  const int p = j - n * (n + 1) / 2;  // 1-based position within row n
  const int parity = n % 2;
  const int m = 2 * ((p + parity) / 2) - parity;
  if (m == 0) return {n, 0};
  return {n, (j % 2 == 0) ? m : -m};
}

double radial(int n, int m, double rho) {
  m = std::abs(m);
  if (m > n || (n - m) % 2 != 0) return 0.0;
  double sum = 0.0;
  for (int s = 0; s <= (n - m) / 2; ++s) {
    const double c = ((s % 2) ? -1.0 : 1.0) * factorial(n - s) /
                     (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
    sum += c * std::pow(rho, n - 2 * s);
  }
  return sum;
}

double evaluate(int j, double rho, double theta) {
  const NollMode nm = noll_to_nm(j);
  const double r = radial(nm.n, nm.m, rho);
  if (nm.m > 0) return r * std::cos(nm.m * theta);
  if (nm.m < 0) return r * std::sin(-nm.m * theta);
  return r;
}

void evaluate_all(double u, double v, std::span<double, kModeCount> out) {
  const RadialTable& t = table();
  const double rho2 = u * u + v * v;
  const double rho = std::sqrt(rho2);

  std::array<double, 11> powers{};
  powers[0] = 1.0;
  for (int p = 1; p < 11; ++p) powers[p] = powers[p - 1] * rho;

  // cos(m theta), sin(m theta) by angle addition, theta = atan2(v, u)
  std::array<double, 8> cm{};
  std::array<double, 8> sm{};
  const double c1 = rho > 0.0 ? u / rho : 1.0;
  const double s1 = rho > 0.0 ? v / rho : 0.0;
  cm[0] = 1.0;
  sm[0] = 0.0;
  for (int m = 1; m < 8; ++m) {
    cm[m] = cm[m - 1] * c1 - sm[m - 1] * s1;
    sm[m] = sm[m - 1] * c1 + cm[m - 1] * s1;
  }

  for (int j = 0; j < kModeCount; ++j) {
    const NollMode nm = t.modes[j];
    double r = 0.0;
    for (int p = nm.n; p >= 0; p -= 2) r += t.coeffs[j][p] * powers[p];
    if (nm.m > 0) {
      r *= cm[nm.m];
    } else if (nm.m < 0) {
      r *= sm[-nm.m];
    }
    out[j] = r;
  }
}

}  // namespace dopt::zernike
