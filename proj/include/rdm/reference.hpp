#pragma once

#include <vector>

#include "rdm/forward.hpp"
#include "rdm/image.hpp"
#include "rdm/polar.hpp"

// Straightforward serial implementations of the parallel kernels. They share
// no code with the optimized paths beyond Image/PolarGrid and exist to check
// and benchmark them.
namespace rdm::reference {

PolarImage to_polar(const Image& img, const PolarGrid& grid);
Image from_polar(const PolarImage& pimg, int n);

// Ring convolution by direct circular convolution over angle, O(K^2 M^2):
//   f(rho_i, phi_n) = sum_j w_j dtheta sum_m g(r_j, theta_m) h_j(rho_i, phi_n - theta_m)
PolarImage ring_convolve_polar(const PolarImage& g, const std::vector<PolarImage>& psfs);

// Superposition by scattering each source's rotated PSF into the output.
Image superpose_blur(const Image& obj, const RadialPsfTable& table, Point center);

}  // namespace rdm::reference
