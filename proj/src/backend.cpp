#include "fluxcal/backend.hpp"

#include "rng.hpp"

namespace fxc {

int ControlFrame::size() const {
    return estimate ? estimate->size() : 0;
}

VoltageVector ControlFrame::to_voltages(const Eigen::VectorXd& u) const {
    if (!estimate)
        return VoltageVector{u};
    return voltage_for_flux(*estimate, FluxVector{u});
}

SimulatorBackend::SimulatorBackend(DeviceSpec spec, uint64_t base_seed)
    : spec_(std::move(spec)), seed_(base_seed) {
    spec_.validate();
}

TransmissionImage SimulatorBackend::measure(const ImageRequest& req) {
    const int n1 = req.axis1.size();
    const int n2 = req.axis2.size();
    require_contract(n1 >= 1 && n2 >= 1, "empty measurement grid");
    require_contract(static_cast<bool>(req.voltages_at) && static_cast<bool>(req.probe_at),
                     "measurement request is missing resolvers");

    TransmissionImage img;
    img.axis1 = req.axis1;
    img.axis2 = req.axis2;
    img.values.resize(n1, n2);
    for (int i1 = 0; i1 < n1; ++i1) {
        for (int i2 = 0; i2 < n2; ++i2) {
            const VoltageVector v = req.voltages_at(i1, i2);
            const double wp = req.probe_at(i1, i2);
            const uint64_t point_seed = detail::mix_seed(
                detail::mix_seed(seed_, req.seed_salt),
                (static_cast<uint64_t>(i1) << 32) | static_cast<uint64_t>(i2));
            img.values(i1, i2) = s21(wp, v, spec_, point_seed);
        }
    }
    points_ += static_cast<uint64_t>(n1) * n2;
    return img;
}

ImageRequest make_request(const SimpleSweep& sweep, const ControlFrame& frame,
                          const std::vector<std::string>& cell_names) {
    require_contract(sweep.loop1 >= 0 || sweep.loop2 >= 0, "at least one axis must sweep a loop");
    ImageRequest req;
    auto fill_axis = [&](AxisInfo& axis, int loop, const Eigen::VectorXd& grid) {
        axis.values = grid;
        if (loop < 0) {
            axis.quantity = AxisQuantity::frequency;
            axis.label = "frequency";
            axis.loop = -1;
        } else {
            axis.quantity = frame.flux_coords() ? AxisQuantity::flux : AxisQuantity::voltage;
            axis.label = loop_label(cell_names, loop);
            axis.loop = loop;
        }
    };
    fill_axis(req.axis1, sweep.loop1, sweep.grid1);
    fill_axis(req.axis2, sweep.loop2, sweep.grid2);

    const SimpleSweep s = sweep;
    const ControlFrame f = frame;
    req.voltages_at = [s, f](int i1, int i2) {
        Eigen::VectorXd u = s.fixed_u;
        if (s.loop1 >= 0)
            u(s.loop1) = s.grid1(i1);
        if (s.loop2 >= 0)
            u(s.loop2) = s.grid2(i2);
        return f.to_voltages(u);
    };
    req.probe_at = [s](int i1, int i2) {
        if (s.loop1 < 0)
            return s.grid1(i1);
        if (s.loop2 < 0)
            return s.grid2(i2);
        return s.fixed_probe;
    };
    req.seed_salt = sweep.seed_salt;
    return req;
}

}  // namespace fxc
