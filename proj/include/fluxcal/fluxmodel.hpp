#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fluxcal/errors.hpp"
#include "fluxcal/loops.hpp"

namespace fxc {

/// Magnetic flux quantum, in Wb and in the internal pH * uA unit system.
constexpr double kPhi0_Wb = 2.067833848e-15;
constexpr double kPhi0_pH_uA = 2067.833848;  // 1 pH*uA = 1e-18 Wb

/// Per-loop reduced fluxes, in units of the flux quantum.
struct FluxVector {
    Eigen::VectorXd values;

    int size() const { return static_cast<int>(values.size()); }
    static FluxVector zero(int n) { return FluxVector{Eigen::VectorXd::Zero(n)}; }
};

/// Per-line bias voltages, in volts.
struct VoltageVector {
    Eigen::VectorXd values;

    int size() const { return static_cast<int>(values.size()); }
    static VoltageVector zero(int n) { return VoltageVector{Eigen::VectorXd::Zero(n)}; }
};

enum class CouplingUnits {
    phi0_per_volt,   // maps physical voltages to fluxes
    dimensionless,   // maps estimated fluxes to fluxes (iterations >= 2)
};

/// Flux-per-voltage coupling matrix C, optionally backed by the mutual
/// inductances M (pH) and line resistances R (ohm) it derives from,
/// C = M R^-1.
struct CouplingMatrix {
    Eigen::MatrixXd c;
    CouplingUnits units = CouplingUnits::phi0_per_volt;
    std::optional<Eigen::MatrixXd> mutuals_pH;
    std::optional<Eigen::VectorXd> resistances_ohm;

    int size() const { return static_cast<int>(c.rows()); }
    static CouplingMatrix identity(int n, CouplingUnits u = CouplingUnits::phi0_per_volt) {
        return CouplingMatrix{Eigen::MatrixXd::Identity(n, n), u, {}, {}};
    }

    /// When M and R are both present, verifies C = M R^-1 entrywise to the
    /// given relative tolerance.  Throws on violation.
    void check_mutual_consistency(double rel_tol = 1e-12) const;
};

/// Coupling matrix derived from mutuals (pH) and per-line resistances (ohm).
CouplingMatrix coupling_from_mutuals(const Eigen::MatrixXd& mutuals_pH,
                                     const Eigen::VectorXd& resistances_ohm);

/// One calibration iteration result.  Iteration 1 is measured against raw
/// voltages (phi0/V); later iterations against estimated flux coordinates
/// (dimensionless).
struct IterationRecord {
    int n = 1;
    CouplingMatrix c;
    FluxVector f0;
};

/// f = C V + f0
FluxVector flux_from_voltage(const CouplingMatrix& c, const VoltageVector& v, const FluxVector& f0);

/// Chained estimate over all iterations plus the per-iteration history that
/// produced it.
struct CalibrationEstimate {
    CouplingMatrix c_prime;
    FluxVector f0_prime;
    std::vector<IterationRecord> history;

    int size() const { return c_prime.size(); }

    /// Builds the estimate by composing the history; validates the record
    /// ordering and unit kinds.
    static CalibrationEstimate from_history(std::vector<IterationRecord> records);

    /// Checks that re-composing the history reproduces (c_prime, f0_prime)
    /// to the given relative tolerance.
    void check_composition(double rel_tol = 1e-12) const;
};

/// Composes per-iteration records into the final (C', f0'):
///   C'  = C(n) ... C(1)
///   f0' = C(n)( ... (C(2) f0(1) + f0(2)) ... ) + f0(n)
std::pair<CouplingMatrix, FluxVector> compose_iterations(std::span<const IterationRecord> records);

/// Solves C' V + f0' = f_target for V.  Throws a numeric error with a
/// condition estimate if C' is singular or ill-conditioned.
VoltageVector voltage_for_flux(const CalibrationEstimate& est, const FluxVector& f_target);
VoltageVector voltage_for_flux(const CouplingMatrix& c, const FluxVector& f0,
                               const FluxVector& f_target);

/// Loop convention map between the physical secondary-loop coordinates
/// (f_z', f_x) and the symmetry-point coordinates (f_z, f_x):
/// f_z = f_z' + f_x / 2.
std::pair<double, double> convention_transform(double f_zprime, double f_x);
std::pair<double, double> convention_transform_inverse(double f_z, double f_x);

}  // namespace fxc
