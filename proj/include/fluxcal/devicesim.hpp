#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "fluxcal/fluxmodel.hpp"

namespace fxc {

/// Classical rf-SQUID terminating a quarter-wave readout line.
/// Units: uA, pH, mm, mm/ns, ohm; angular frequencies in rad/ns.
struct RfSquidModel {
    double ic_uA = 1.0;
    double lg_pH = 250.0;
    double len_mm = 5.0;
    double vph_mm_ns = 130.0;
    double z0_ohm = 50.0;

    /// Screening parameter beta_L = 2 pi Lg Ic / Phi0.
    double beta_l() const { return 2.0 * M_PI * lg_pH * ic_uA / kPhi0_pH_uA; }
};

enum class ElementRole { qubit, coupler };

/// Parametric ground-state current of a qubit or coupler z loop.  The shape
/// is periodic with period 1 in f_z and 2 in f_x, odd under flux negation,
/// and bounded by imax.
struct ElementModel {
    ElementRole role = ElementRole::coupler;
    double imax_uA = 0.45;
    double harmonic2 = 0.0;  // weight of the second z harmonic, in [0, 0.5]

    double current_uA(double f_z, double f_x) const;
};

struct NotchModel {
    double depth = 0.8;
    double kappa_rad_ns = 2.0 * M_PI * 1e-3;  // kappa/2pi = 1 MHz
};

struct CellSpec {
    std::string name;
    RfSquidModel squid;
    std::optional<ElementModel> element;
    NotchModel notch;
    /// Mutual between the element z loop and its own readout SQUID; carries
    /// both the inductive loading and the current-injection readout channel.
    double elem_squid_mutual_mphi0_uA = 0.0;
    /// Probe band for spectrum sweeps (rad/ns); derived from the tuning
    /// range when the config leaves it unset.
    double probe_lo = 0.0, probe_hi = 0.0;
};

/// Inter-cell coupling: current of cell a's element injects flux into a loop
/// of cell b (z loop of the element, or r loop of the SQUID) and vice versa
/// for element-element pairs.
struct MutualPair {
    enum class Kind { elem_elem, elem_squid };
    int cell_a = 0;  // 0-based cell index of the source element
    int cell_b = 0;
    Kind kind = Kind::elem_elem;
    double mphi0_per_uA = 0.0;
};

struct DriftModel {
    double rms_48h_mphi0 = 1.3;
    /// 1/f noise amplitude and exponent, recorded for reference; the drift
    /// itself is a random walk scaled to the 48 h target.
    double noise_amp_uphi0_sqrt_hz = 14.4;
    double alpha = 0.91;
    double jump_prob_per_loop_per_day = 0.0;
    double jump_min_mphi0 = 10.0;
    double jump_max_mphi0 = 30.0;
};

/// Ground-truth synthetic device: topology, physics parameters, the true
/// coupling matrix and offsets, and the noise/drift models.
struct DeviceSpec {
    std::vector<CellSpec> cells;
    CouplingMatrix c_true;
    FluxVector f0_true;
    std::vector<MutualPair> mutuals;
    double sigma_s21 = 0.0;
    DriftModel drift;
    double voltage_range = 4.0;
    /// When false, element currents leave neighbouring cells untouched and
    /// only the in-cell readout chain remains (used for linear-device runs).
    bool inter_cell_interactions = true;

    int cell_count() const { return static_cast<int>(cells.size()); }
    int loop_count() const { return cell_count() * kLoopsPerCell; }
    std::vector<std::string> cell_names() const;
    void validate() const;
};

/// Phase across the junction minimizing the rf-SQUID potential
/// U = -(Ic Phi0 / 2pi) cos(phi) + (Phi0^2 / 2 Lg) (phi/2pi - f_r)^2.
/// Requires beta_L < 1 (single minimum); solves phi + beta_L sin(phi) = 2 pi f_r.
double squid_phase(double f_r, const RfSquidModel& model);

/// 1/L = 1/Lg + 2 pi Ic cos(phi) / Phi0.  Throws when the two terms cancel.
double squid_effective_inductance_pH(double phi, const RfSquidModel& model);

/// Lowest positive root of exp(2 i w l / c) = (i w L - Z0) / (i w L + Z0).
/// L = 0 gives the shorted quarter-wave mode pi c / 2 l; L = inf the open
/// line at pi c / l.
double resonator_frequency_rad_ns(double l_eff_pH, const RfSquidModel& model);

/// Element quantum inductance 1/L = (1/Phi0) dI/df_z, central differences.
/// Infinite (no loading) where the current is stationary.
double element_effective_inductance_pH(double f_z, double f_x, const ElementModel& elem,
                                       double step = 1e-4);

/// Full in-cell readout chain: element inductance -> loaded SQUID geometric
/// inductance -> SQUID phase and effective inductance -> resonator root.
/// f_r should include any injected flux.
double loaded_resonator_frequency(double f_r, double f_z, double f_x, const CellSpec& cell);

/// True loop fluxes for a bias setting: external fluxes C V + f0 plus the
/// one-shot element-current injections.
FluxVector total_fluxes(const VoltageVector& v, const DeviceSpec& spec);

/// Resonance frequency of every cell at a bias setting.
Eigen::VectorXd resonator_frequencies(const VoltageVector& v, const DeviceSpec& spec);

/// Complex transmission through the shared feedline: product of per-cell
/// notch responses plus additive complex Gaussian noise (sigma_s21 per
/// quadrature).  Deterministic given the seed.
std::complex<double> s21(double omega_p, const VoltageVector& v, const DeviceSpec& spec,
                         uint64_t seed);

/// Flux-offset drift over dt hours: a per-loop Gaussian random walk whose
/// 48 h RMS matches the configured target, plus an optional rare large-jump
/// channel.
FluxVector apply_drift(const FluxVector& f0, double dt_hours, const DeviceSpec& spec,
                       uint64_t seed);

/// Probe band covering the upper part of the resonator tuning range, so that
/// transmission dips are visible near integer flux but not near half-integer
/// flux (the disambiguation the offset analysis relies on).
std::pair<double, double> suggest_probe_band(const CellSpec& cell, double coverage = 0.55);

}  // namespace fxc
