#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>

#include "fluxcal/errors.hpp"

namespace fxc {

enum class AxisQuantity { voltage, flux, frequency };

/// One image axis: a strictly monotone coordinate array plus what it means.
/// `loop` is the flat loop index for bias axes, -1 for frequency.
struct AxisInfo {
    AxisQuantity quantity = AxisQuantity::voltage;
    std::string label;
    int loop = -1;
    Eigen::VectorXd values;

    int size() const { return static_cast<int>(values.size()); }
    double step() const;
    bool monotone() const;
};

/// |S21| samples on a 2-D grid.  axis1 indexes rows (the bias dimension in
/// most sweeps), axis2 indexes columns.  Values are kept complex so the
/// background filter can operate on the full transmission; magnitude() is
/// the view the symmetry analysis works on.
struct TransmissionImage {
    AxisInfo axis1, axis2;
    Eigen::MatrixXcd values;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    Eigen::MatrixXd magnitude() const { return values.cwiseAbs(); }
    void validate() const;
};

/// Evenly spaced grid, symmetric around `center`, with an odd point count
/// (2*half_count + 1).  Symmetric grids keep on-axis symmetry centers exactly
/// on a pixel, which the noiseless fixed-point tests rely on.
Eigen::VectorXd symmetric_grid(double center, double step, int half_count);

Eigen::VectorXd linspace(double lo, double hi, int n);

}  // namespace fxc
