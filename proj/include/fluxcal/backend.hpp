#pragma once

#include <functional>
#include <memory>

#include "fluxcal/devicesim.hpp"
#include "fluxcal/image.hpp"

namespace fxc {

/// Control frame the calibration stages sweep in: raw line voltages for the
/// first iteration, estimated flux coordinates afterwards.
struct ControlFrame {
    std::optional<CalibrationEstimate> estimate;

    bool flux_coords() const { return estimate.has_value(); }
    int size() const;
    VoltageVector to_voltages(const Eigen::VectorXd& u) const;
};

/// A fully resolved 2-D measurement request.  Axis grids live in the request
/// axes; per-point voltages and probe frequency come from the callbacks so
/// stages can express constraints (e.g. a compensated resonator line)
/// without the backend knowing about them.
struct ImageRequest {
    AxisInfo axis1, axis2;
    std::function<VoltageVector(int i1, int i2)> voltages_at;
    std::function<double(int i1, int i2)> probe_at;
    uint64_t seed_salt = 0;
};

/// Measurement contract the calibration engine consumes.  Implementations
/// must be deterministic given (request, base seed).
class MeasurementBackend {
  public:
    virtual ~MeasurementBackend() = default;

    virtual TransmissionImage measure(const ImageRequest& req) = 0;
    virtual int loop_count() const = 0;
    virtual uint64_t points_measured() const = 0;

    /// True when concurrent measurement requests are permitted.
    virtual bool stateless() const { return false; }
};

/// Synthetic backend over a DeviceSpec.
class SimulatorBackend : public MeasurementBackend {
  public:
    SimulatorBackend(DeviceSpec spec, uint64_t base_seed);

    TransmissionImage measure(const ImageRequest& req) override;
    int loop_count() const override { return spec_.loop_count(); }
    uint64_t points_measured() const override { return points_; }
    bool stateless() const override { return true; }

    const DeviceSpec& spec() const { return spec_; }
    DeviceSpec& spec() { return spec_; }
    uint64_t base_seed() const { return seed_; }

  private:
    DeviceSpec spec_;
    uint64_t seed_ = 0;
    uint64_t points_ = 0;
};

/// Convenience sweep description for simple voltage/flux grids with no
/// per-point constraints (simulate subcommand, tests).
struct SimpleSweep {
    // loop < 0 selects the frequency axis
    int loop1 = -1;
    Eigen::VectorXd grid1;
    int loop2 = -1;
    Eigen::VectorXd grid2;
    Eigen::VectorXd fixed_u;  // control coordinates for unswept loops
    double fixed_probe = 0.0;
    uint64_t seed_salt = 0;
};

ImageRequest make_request(const SimpleSweep& sweep, const ControlFrame& frame,
                          const std::vector<std::string>& cell_names);

}  // namespace fxc
