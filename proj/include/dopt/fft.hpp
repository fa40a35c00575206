#pragma once

#include "dopt/array2d.hpp"

namespace dopt::fft {

// Unnormalized 2D DFTs in place (FFTW conventions). Plans are cached per
// shape and created with FFTW_ESTIMATE so results are reproducible run to run.
void forward(ComplexArray& a);
void inverse(ComplexArray& a);  // includes the 1/N factor

/// Swap quadrants so index n/2 holds DC. Even sizes only (self-inverse).
void fftshift(ComplexArray& a);

}  // namespace dopt::fft
