#include "fluxcal/devicesim.hpp"

#include <cmath>

#include "rng.hpp"

namespace fxc {

double ElementModel::current_uA(double f_z, double f_x) const {
    const double a2 = harmonic2;
    const double zpart = (1.0 - a2) * std::sin(2.0 * M_PI * f_z) +
                         0.5 * a2 * std::sin(4.0 * M_PI * f_z);
    return imax_uA * std::cos(M_PI * f_x) * zpart;
}

std::vector<std::string> DeviceSpec::cell_names() const {
    std::vector<std::string> names;
    names.reserve(cells.size());
    for (const auto& c : cells)
        names.push_back(c.name);
    return names;
}

void DeviceSpec::validate() const {
    require(!cells.empty(), ErrorCode::config, "device has no cells");
    const int n = loop_count();
    require(c_true.c.rows() == n && c_true.c.cols() == n, ErrorCode::config,
            "ground-truth coupling matrix size does not match the cell count");
    require(f0_true.size() == n, ErrorCode::config, "ground-truth offset size mismatch");
    for (int i = 0; i < n; ++i)
        require(c_true.c(i, i) != 0.0, ErrorCode::config,
                "ground-truth coupling diagonal must be nonzero");
    for (const auto& cell : cells) {
        require(cell.squid.ic_uA > 0 && cell.squid.lg_pH > 0 && cell.squid.len_mm > 0 &&
                    cell.squid.vph_mm_ns > 0 && cell.squid.z0_ohm > 0,
                ErrorCode::config, "rf-SQUID parameters must be positive");
        require(cell.squid.beta_l() < 1.0, ErrorCode::config,
                "beta_L >= 1 (hysteretic SQUID regime) is not supported");
        if (cell.element) {
            require(cell.element->imax_uA >= 0, ErrorCode::config, "element imax must be >= 0");
            require(cell.element->harmonic2 >= 0 && cell.element->harmonic2 <= 0.5,
                    ErrorCode::config, "element harmonic2 must lie in [0, 0.5]");
        }
        require(cell.notch.depth > 0 && cell.notch.depth < 1 && cell.notch.kappa_rad_ns > 0,
                ErrorCode::config, "notch parameters out of range");
    }
    for (const auto& mp : mutuals) {
        require(mp.cell_a >= 0 && mp.cell_a < cell_count() && mp.cell_b >= 0 &&
                    mp.cell_b < cell_count(),
                ErrorCode::config, "mutual pair references an unknown cell");
    }
    c_true.check_mutual_consistency();
}

double squid_phase(double f_r, const RfSquidModel& model) {
    const double beta = model.beta_l();
    require(beta < 1.0, ErrorCode::config, "squid_phase requires beta_L < 1");
    const double target = 2.0 * M_PI * f_r;
    // phi + beta sin(phi) = 2 pi f_r; the left side is strictly increasing,
    // so Newton from the linear estimate converges fast and a bisection
    // bracket guards the tails.
    double lo = target - beta, hi = target + beta;
    double phi = target / (1.0 + beta);  // exactly 0 at f_r = 0
    for (int iter = 0; iter < 100; ++iter) {
        const double g = phi + beta * std::sin(phi) - target;
        if (std::abs(g) < 1e-14)
            return phi;
        (g > 0 ? hi : lo) = phi;
        const double dg = 1.0 + beta * std::cos(phi);
        double next = phi - g / dg;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - phi) < 1e-15 * std::max(1.0, std::abs(phi)))
            return next;
        phi = next;
    }
    throw Error(ErrorCode::numeric, "squid phase solve did not converge in [" +
                                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

double squid_effective_inductance_pH(double phi, const RfSquidModel& model) {
    const double inv = 1.0 / model.lg_pH + 2.0 * M_PI * model.ic_uA * std::cos(phi) / kPhi0_pH_uA;
    require(std::abs(inv) > 1e-15, ErrorCode::numeric,
            "singular SQUID inductance: geometric and junction terms cancel");
    return 1.0 / inv;
}

double resonator_frequency_rad_ns(double l_eff_pH, const RfSquidModel& model) {
    const double c = model.vph_mm_ns;
    const double l = model.len_mm;
    if (std::isinf(l_eff_pH))
        return M_PI * c / l;  // open end; the k=0 branch root degenerates to 0
    require(l_eff_pH >= 0, ErrorCode::contract, "resonator solve needs L_eff >= 0");
    // 2 w l / c + 2 atan(w L / Z0) = pi, with w L in ohms = w[rad/ns] L[pH] 1e-3.
    auto g = [&](double w) {
        return 2.0 * w * l / c + 2.0 * std::atan(w * l_eff_pH * 1e-3 / model.z0_ohm) - M_PI;
    };
    double lo = 0.0;
    double hi = M_PI * c / (2.0 * l);
    if (g(hi) < 0)  // cannot happen for L >= 0, but keep the bracket honest
        throw Error(ErrorCode::numeric, "no resonator root in bracket");
    double w = hi / (1.0 + l_eff_pH * 1e-3 * c / (model.z0_ohm * l));  // crude start
    for (int iter = 0; iter < 200; ++iter) {
        const double gv = g(w);
        if (std::abs(gv) < 1e-13)
            return w;
        (gv > 0 ? hi : lo) = w;
        const double u = w * l_eff_pH * 1e-3 / model.z0_ohm;
        const double dg = 2.0 * l / c + 2.0 * (l_eff_pH * 1e-3 / model.z0_ohm) / (1.0 + u * u);
        double next = w - gv / dg;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - w) < 1e-15 * std::max(1.0, w))
            return next;
        w = next;
    }
    throw Error(ErrorCode::numeric, "resonator root solve did not converge");
}

double element_effective_inductance_pH(double f_z, double f_x, const ElementModel& elem,
                                       double step) {
    const double di = (elem.current_uA(f_z + step, f_x) - elem.current_uA(f_z - step, f_x)) /
                      (2.0 * step);
    if (di == 0.0)
        return std::numeric_limits<double>::infinity();
    return kPhi0_pH_uA / di;
}

namespace {

double loaded_lg_pH(double f_z, double f_x, const CellSpec& cell) {
    if (!cell.element || cell.elem_squid_mutual_mphi0_uA == 0.0)
        return cell.squid.lg_pH;
    const double l_elem = element_effective_inductance_pH(f_z, f_x, *cell.element);
    if (std::isinf(l_elem))
        return cell.squid.lg_pH;
    const double m_pH = cell.elem_squid_mutual_mphi0_uA * kPhi0_pH_uA * 1e-3 / 1.0;
    const double lg = cell.squid.lg_pH - m_pH * m_pH / l_elem;
    require(lg > 0, ErrorCode::over_coupling,
            "inductive loading drives the SQUID geometric inductance non-positive");
    return lg;
}

}  // namespace

double loaded_resonator_frequency(double f_r, double f_z, double f_x, const CellSpec& cell) {
    RfSquidModel squid = cell.squid;
    squid.lg_pH = loaded_lg_pH(f_z, f_x, cell);
    const double phi = squid_phase(f_r, squid);
    const double l_eff = squid_effective_inductance_pH(phi, squid);
    return resonator_frequency_rad_ns(l_eff, squid);
}

FluxVector total_fluxes(const VoltageVector& v, const DeviceSpec& spec) {
    require_contract(v.size() == spec.loop_count(), "voltage vector size mismatch");
    require(v.values.cwiseAbs().maxCoeff() <= spec.voltage_range + 1e-12, ErrorCode::contract,
            "bias voltage outside the configured output range");
    FluxVector f = flux_from_voltage(spec.c_true, v, spec.f0_true);

    // One-shot interaction model: element currents are evaluated at the
    // external fluxes and injected once into coupled loops.
    const int m = spec.cell_count();
    Eigen::VectorXd currents = Eigen::VectorXd::Zero(m);
    for (int p = 0; p < m; ++p) {
        if (!spec.cells[p].element)
            continue;
        const int iz = p * kLoopsPerCell + 0;
        const int ix = p * kLoopsPerCell + 1;
        currents(p) = spec.cells[p].element->current_uA(f.values(iz), f.values(ix));
    }
    // In-cell injection into the readout SQUID (the readout mechanism).
    for (int p = 0; p < m; ++p) {
        if (!spec.cells[p].element)
            continue;
        const int ir = p * kLoopsPerCell + 2;
        f.values(ir) += spec.cells[p].elem_squid_mutual_mphi0_uA * currents(p) * 1e-3;
    }
    if (spec.inter_cell_interactions) {
        for (const MutualPair& mp : spec.mutuals) {
            const double scale = mp.mphi0_per_uA * 1e-3;
            if (mp.kind == MutualPair::Kind::elem_elem) {
                f.values(mp.cell_b * kLoopsPerCell + 0) += scale * currents(mp.cell_a);
                f.values(mp.cell_a * kLoopsPerCell + 0) += scale * currents(mp.cell_b);
            } else {
                // element of cell_a into the SQUID loop of cell_b
                f.values(mp.cell_b * kLoopsPerCell + 2) += scale * currents(mp.cell_a);
            }
        }
    }
    return f;
}

Eigen::VectorXd resonator_frequencies(const VoltageVector& v, const DeviceSpec& spec) {
    const FluxVector f = total_fluxes(v, spec);
    Eigen::VectorXd w(spec.cell_count());
    for (int p = 0; p < spec.cell_count(); ++p) {
        const int base = p * kLoopsPerCell;
        w(p) = loaded_resonator_frequency(f.values(base + 2), f.values(base + 0),
                                          f.values(base + 1), spec.cells[p]);
    }
    return w;
}

std::complex<double> s21(double omega_p, const VoltageVector& v, const DeviceSpec& spec,
                         uint64_t seed) {
    const Eigen::VectorXd w = resonator_frequencies(v, spec);
    std::complex<double> t(1.0, 0.0);
    for (int p = 0; p < spec.cell_count(); ++p) {
        const NotchModel& notch = spec.cells[p].notch;
        const std::complex<double> den(1.0, 2.0 * (omega_p - w(p)) / notch.kappa_rad_ns);
        t *= 1.0 - notch.depth / den;
    }
    if (spec.sigma_s21 > 0.0) {
        uint64_t state = seed;
        const auto g = detail::gaussian_pair(state);
        t += spec.sigma_s21 * std::complex<double>(g.g1, g.g2);
    }
    return t;
}

FluxVector apply_drift(const FluxVector& f0, double dt_hours, const DeviceSpec& spec,
                       uint64_t seed) {
    require_contract(dt_hours >= 0, "drift duration must be non-negative");
    FluxVector out = f0;
    if (dt_hours == 0.0)
        return out;
    const double walk_std = spec.drift.rms_48h_mphi0 * 1e-3 * std::sqrt(dt_hours / 48.0);
    for (int i = 0; i < out.size(); ++i) {
        uint64_t state = detail::mix_seed(seed, 0x5eed0000 + i);
        out.values(i) += walk_std * detail::gaussian_pair(state).g1;
        if (spec.drift.jump_prob_per_loop_per_day > 0.0) {
            const double days = dt_hours / 24.0;
            const double p_jump = 1.0 - std::exp(-spec.drift.jump_prob_per_loop_per_day * days);
            if (detail::uniform01(state) < p_jump) {
                const double mag = spec.drift.jump_min_mphi0 +
                                   detail::uniform01(state) *
                                       (spec.drift.jump_max_mphi0 - spec.drift.jump_min_mphi0);
                const double sign = detail::uniform01(state) < 0.5 ? -1.0 : 1.0;
                out.values(i) += sign * mag * 1e-3;
            }
        }
    }
    return out;
}

std::pair<double, double> suggest_probe_band(const CellSpec& cell, double coverage) {
    CellSpec probe = cell;
    // Band limits from the bare tuning curve; loading shifts stay well inside.
    const double w_top = loaded_resonator_frequency(0.0, 0.25, 0.5, probe);
    const double w_bottom = loaded_resonator_frequency(0.5, 0.25, 0.5, probe);
    const double range = w_top - w_bottom;
    const double margin = 8.0 * cell.notch.kappa_rad_ns;
    return {w_top - coverage * range - margin, w_top + margin};
}

}  // namespace fxc
