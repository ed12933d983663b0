#include "fluxcal/image.hpp"

namespace fxc {

double AxisInfo::step() const {
    require_contract(values.size() >= 2, "axis step undefined for single-point axis");
    return (values(values.size() - 1) - values(0)) / static_cast<double>(values.size() - 1);
}

bool AxisInfo::monotone() const {
    if (values.size() < 2)
        return true;
    const bool up = values(1) > values(0);
    for (int i = 1; i < values.size(); ++i) {
        if (up ? values(i) <= values(i - 1) : values(i) >= values(i - 1))
            return false;
    }
    return true;
}

void TransmissionImage::validate() const {
    require_contract(axis1.size() == rows() && axis2.size() == cols(),
                     "image dimensions do not match axes");
    require_contract(axis1.monotone() && axis2.monotone(), "image axes must be strictly monotone");
    require_contract(values.allFinite(), "image contains non-finite values");
}

Eigen::VectorXd symmetric_grid(double center, double step, int half_count) {
    require_contract(step > 0 && half_count >= 0, "invalid grid parameters");
    Eigen::VectorXd g(2 * half_count + 1);
    for (int i = -half_count; i <= half_count; ++i)
        g(i + half_count) = center + step * i;
    return g;
}

Eigen::VectorXd linspace(double lo, double hi, int n) {
    require_contract(n >= 1, "linspace needs at least one point");
    if (n == 1)
        return Eigen::VectorXd::Constant(1, lo);
    Eigen::VectorXd g(n);
    const double step = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i)
        g(i) = lo + step * i;
    return g;
}

}  // namespace fxc
