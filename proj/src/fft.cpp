#include "fft.hpp"

#include <fftw3.h>

#include "fluxcal/errors.hpp"

namespace fxc::detail {

int next_fast_size(int n) {
    if (n <= 1)
        return 1;
    for (int candidate = n;; ++candidate) {
        int rem = candidate;
        for (int p : {2, 3, 5})
            while (rem % p == 0)
                rem /= p;
        if (rem == 1)
            return candidate;
    }
}

void fft2(Eigen::MatrixXcd& data, bool inverse) {
    // Eigen is column-major; FFTW is row-major.  Swapping the dimension
    // order makes the memory layouts agree, and the 2-D transform itself is
    // axis-symmetric.
    const int n0 = static_cast<int>(data.cols());
    const int n1 = static_cast<int>(data.rows());
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan = fftw_plan_dft_2d(n0, n1, ptr, ptr, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE);
    require(plan != nullptr, ErrorCode::numeric, "fftw plan creation failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    if (inverse)
        data /= static_cast<double>(n0) * n1;
}

Eigen::MatrixXd self_convolution(const Eigen::MatrixXd& a) {
    const int m1 = static_cast<int>(a.rows());
    const int m2 = static_cast<int>(a.cols());
    const int p1 = next_fast_size(2 * m1 - 1);
    const int p2 = next_fast_size(2 * m2 - 1);
    Eigen::MatrixXcd work = Eigen::MatrixXcd::Zero(p1, p2);
    work.topLeftCorner(m1, m2) = a.cast<std::complex<double>>();
    fft2(work, false);
    work = work.array().square().matrix();
    fft2(work, true);
    return work.topLeftCorner(2 * m1 - 1, 2 * m2 - 1).real();
}

}  // namespace fxc::detail
