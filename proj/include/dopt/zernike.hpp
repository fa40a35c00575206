#pragma once

#include <array>
#include <span>

namespace dopt::zernike {

inline constexpr int kModeCount = 36;

/// Radial order n and signed azimuthal frequency m of a Noll index (1-based).
/// m > 0 selects cos(m theta), m < 0 selects sin(|m| theta).
struct NollMode {
  int n;
  int m;
};

NollMode noll_to_nm(int j);

/// Unnormalized radial polynomial R_n^|m|(rho).
double radial(int n, int m, double rho);

/// Unnormalized Zernike term Z_j(rho, theta), Noll ordering.
double evaluate(int j, double rho, double theta);

/// All 36 terms at Cartesian unit-disk coordinates (u, v); out[j-1] = Z_j.
/// rho > 1 is evaluated as-is (callers mask outside the aperture).
void evaluate_all(double u, double v, std::span<double, kModeCount> out);

}  // namespace dopt::zernike
