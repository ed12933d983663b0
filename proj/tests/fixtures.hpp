#pragma once

#include <random>

#include "fluxcal/backend.hpp"
#include "fluxcal/devicesim.hpp"

namespace fxc::testing {

inline CellSpec make_cell(const std::string& name, ElementRole role, double imax_uA,
                          double mutual_mphi0_uA) {
    CellSpec cell;
    cell.name = name;
    cell.squid.ic_uA = 1.1;
    cell.squid.lg_pH = 230.0;
    cell.squid.len_mm = 5.0;
    cell.squid.vph_mm_ns = 130.0;
    cell.squid.z0_ohm = 50.0;
    if (imax_uA > 0) {
        ElementModel elem;
        elem.role = role;
        elem.imax_uA = imax_uA;
        cell.element = elem;
    }
    cell.notch.depth = 0.8;
    cell.notch.kappa_rad_ns = 2.0 * M_PI * 0.010;  // kappa/2pi = 10 MHz
    cell.elem_squid_mutual_mphi0_uA = mutual_mphi0_uA;
    auto [lo, hi] = suggest_probe_band(cell);
    cell.probe_lo = lo;
    cell.probe_hi = hi;
    return cell;
}

/// Single coupler-resonator cell with the intra-cell crosstalk scenario:
/// C_zz = C_rr = 1, C_rz = C_zr = 0.1 Phi0/V, f0_z = 0.4.  The x line is
/// kept decoupled.
inline DeviceSpec interacting_cell_device() {
    DeviceSpec spec;
    spec.cells.push_back(make_cell("c", ElementRole::coupler, 0.45, 28.7));
    spec.c_true.c.resize(3, 3);
    spec.c_true.c << 1.0, 0.0, 0.1,   // z row
                     0.0, 1.0, 0.0,   // x row
                     0.1, 0.0, 1.0;   // r row
    spec.f0_true = FluxVector{Eigen::Vector3d(0.4, 0.0, 0.0)};
    spec.sigma_s21 = 0.0;
    return spec;
}

/// Same geometry with the element-SQUID coupling removed.
inline DeviceSpec decoupled_cell_device() {
    DeviceSpec spec = interacting_cell_device();
    spec.cells[0].elem_squid_mutual_mphi0_uA = 0.0;
    auto [lo, hi] = suggest_probe_band(spec.cells[0]);
    spec.cells[0].probe_lo = lo;
    spec.cells[0].probe_hi = hi;
    return spec;
}

/// Linear device: the in-cell readout chain is intact (so z/x fluxes stay
/// visible) but there is no cross-element interaction, and the true matrix
/// has no crosstalk into z/x loops.  One calibration iteration is exact on
/// such a device up to noise.
inline DeviceSpec linear_device(int m_cells, uint64_t seed, double sigma = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> diag(0.85, 1.15);
    std::uniform_real_distribution<double> off(-0.08, 0.08);
    std::uniform_real_distribution<double> f0r(-0.25, 0.25);
    std::uniform_real_distribution<double> f0zx(-0.1, 0.1);

    DeviceSpec spec;
    for (int p = 0; p < m_cells; ++p) {
        const bool qubit = p % 2 == 0;
        spec.cells.push_back(make_cell(qubit ? "q" + std::to_string(p / 2 + 1)
                                             : "c" + std::to_string(p / 2 + 1),
                                       qubit ? ElementRole::qubit : ElementRole::coupler,
                                       qubit ? 0.14 : 0.45, qubit ? 29.5 : 28.7));
    }
    const int n = spec.loop_count();
    spec.c_true.c = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        spec.c_true.c(i, i) = diag(rng);
    // Crosstalk only into r loops: z and x rows stay diagonal so the
    // response is an exact lattice function of the swept coordinates.
    for (int p = 0; p < m_cells; ++p) {
        const int ir = 3 * p + 2;
        for (int j = 0; j < n; ++j)
            if (j != ir)
                spec.c_true.c(ir, j) = off(rng) * spec.c_true.c(ir, ir);
    }
    spec.f0_true = FluxVector::zero(n);
    for (int p = 0; p < m_cells; ++p) {
        spec.f0_true.values(3 * p + 0) = f0zx(rng);
        spec.f0_true.values(3 * p + 1) = 2.0 * f0zx(rng);
        spec.f0_true.values(3 * p + 2) = f0r(rng);
    }
    spec.sigma_s21 = sigma;
    spec.inter_cell_interactions = false;
    return spec;
}

/// Coupled chain at realistic interaction scale: qubit-coupler-qubit with
/// element currents within +-0.45 uA and ~30 mPhi0/uA mutuals, plus
/// off-diagonal crosstalk up to ~10% of the diagonals.
inline DeviceSpec coupled_device(int m_cells, uint64_t seed, double sigma = 0.01,
                                 double crosstalk_frac = 0.10) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> diag(0.85, 1.15);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> f0r(-0.25, 0.25);
    std::uniform_real_distribution<double> f0zx(-0.1, 0.1);

    DeviceSpec spec;
    for (int p = 0; p < m_cells; ++p) {
        const bool qubit = p % 2 == 0;
        spec.cells.push_back(make_cell(qubit ? "q" + std::to_string(p / 2 + 1)
                                             : "c" + std::to_string(p / 2 + 1),
                                       qubit ? ElementRole::qubit : ElementRole::coupler,
                                       qubit ? 0.14 : 0.45, qubit ? 29.5 : 28.7));
        if (!qubit)
            spec.cells.back().element->harmonic2 = 0.15;
    }
    const int n = spec.loop_count();
    spec.c_true.c = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        spec.c_true.c(i, i) = diag(rng);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j)
                spec.c_true.c(i, j) = crosstalk_frac * uni(rng) * spec.c_true.c(i, i);
    spec.f0_true = FluxVector::zero(n);
    for (int p = 0; p < m_cells; ++p) {
        spec.f0_true.values(3 * p + 0) = f0zx(rng);
        spec.f0_true.values(3 * p + 1) = 2.0 * f0zx(rng);
        spec.f0_true.values(3 * p + 2) = f0r(rng);
    }
    // Nearest-neighbor element coupling along the chain plus element into
    // the neighboring cell's readout SQUID.
    for (int p = 0; p + 1 < m_cells; ++p) {
        spec.mutuals.push_back({p, p + 1, MutualPair::Kind::elem_elem, 30.2});
        spec.mutuals.push_back({p, p + 1, MutualPair::Kind::elem_squid, 8.0});
        spec.mutuals.push_back({p + 1, p, MutualPair::Kind::elem_squid, 8.0});
    }
    spec.sigma_s21 = sigma;
    return spec;
}

}  // namespace fxc::testing
