#pragma once

#include <Eigen/Dense>
#include <complex>

namespace fxc::detail {

/// Smallest size >= n whose prime factors are all in {2, 3, 5}; keeps FFTW
/// away from large-prime plans.
int next_fast_size(int n);

/// In-place 2-D FFT over an Eigen complex matrix (forward when inverse is
/// false).  The inverse transform is normalized by 1/(rows*cols).
void fft2(Eigen::MatrixXcd& data, bool inverse);

/// Full 2-D self-convolution (a * a), linear (zero padded), returned at size
/// (2*rows - 1) x (2*cols - 1).
Eigen::MatrixXd self_convolution(const Eigen::MatrixXd& a);

}  // namespace fxc::detail
