#include "fluxcal/fluxmodel.hpp"

#include <cmath>
#include <sstream>

namespace fxc {

LoopKind loop_kind_from_char(char c) {
    switch (c) {
        case 'z': return LoopKind::z;
        case 'x': return LoopKind::x;
        case 'r': return LoopKind::r;
    }
    throw Error(ErrorCode::contract, std::string("unknown loop kind '") + c + "'");
}

std::string loop_label(const std::vector<std::string>& cell_names, int flat_idx) {
    const int m = static_cast<int>(cell_names.size());
    LoopIndex li = loop_from_flat(flat_idx, m);
    return cell_names[li.cell - 1] + loop_kind_char(li.kind);
}

std::vector<std::string> loop_labels(const std::vector<std::string>& cell_names) {
    std::vector<std::string> out;
    out.reserve(cell_names.size() * kLoopsPerCell);
    for (int i = 0; i < static_cast<int>(cell_names.size()) * kLoopsPerCell; ++i)
        out.push_back(loop_label(cell_names, i));
    return out;
}

int loop_from_label(const std::vector<std::string>& cell_names, const std::string& label) {
    require_contract(!label.empty(), "empty loop label");
    const std::string cell = label.substr(0, label.size() - 1);
    const LoopKind kind = loop_kind_from_char(label.back());
    for (int i = 0; i < static_cast<int>(cell_names.size()); ++i)
        if (cell_names[i] == cell)
            return flat_index(LoopIndex{i + 1, kind}, static_cast<int>(cell_names.size()));
    throw Error(ErrorCode::contract, "unknown cell in loop label: " + label);
}

void CouplingMatrix::check_mutual_consistency(double rel_tol) const {
    if (!mutuals_pH || !resistances_ohm)
        return;
    require_contract(mutuals_pH->rows() == c.rows() && mutuals_pH->cols() == c.cols(),
                     "mutual matrix dimension mismatch");
    require_contract(resistances_ohm->size() == c.cols(), "resistance vector dimension mismatch");
    for (int i = 0; i < c.rows(); ++i) {
        for (int j = 0; j < c.cols(); ++j) {
            // C_ij = M_ij / (R_j * Phi0), with M in pH and R in ohm.
            const double expect = (*mutuals_pH)(i, j) * 1e-12 / ((*resistances_ohm)(j)*kPhi0_Wb);
            const double scale = std::max(std::abs(expect), std::abs(c(i, j)));
            if (scale > 0.0 && std::abs(c(i, j) - expect) > rel_tol * scale)
                throw Error(ErrorCode::contract, "coupling matrix inconsistent with M R^-1");
        }
    }
}

CouplingMatrix coupling_from_mutuals(const Eigen::MatrixXd& mutuals_pH,
                                     const Eigen::VectorXd& resistances_ohm) {
    require_contract(mutuals_pH.rows() == mutuals_pH.cols(), "mutual matrix must be square");
    require_contract(resistances_ohm.size() == mutuals_pH.cols(), "resistance vector size mismatch");
    require_contract((resistances_ohm.array() > 0).all(), "line resistances must be positive");
    CouplingMatrix cm;
    cm.c = mutuals_pH * 1e-12 / kPhi0_Wb;
    for (int j = 0; j < cm.c.cols(); ++j)
        cm.c.col(j) /= resistances_ohm(j);
    cm.units = CouplingUnits::phi0_per_volt;
    cm.mutuals_pH = mutuals_pH;
    cm.resistances_ohm = resistances_ohm;
    return cm;
}

FluxVector flux_from_voltage(const CouplingMatrix& c, const VoltageVector& v, const FluxVector& f0) {
    require_contract(c.c.cols() == v.values.size(), "coupling/voltage dimension mismatch");
    require_contract(c.c.rows() == f0.values.size(), "coupling/offset dimension mismatch");
    return FluxVector{c.c * v.values + f0.values};
}

std::pair<CouplingMatrix, FluxVector> compose_iterations(std::span<const IterationRecord> records) {
    require_contract(!records.empty(), "cannot compose an empty iteration history");
    const int n = records.front().c.size();
    require_contract(records.front().c.units == CouplingUnits::phi0_per_volt,
                     "first iteration record must carry phi0/V units");
    Eigen::MatrixXd c = records.front().c.c;
    Eigen::VectorXd f0 = records.front().f0.values;
    int expected = records.front().n;
    for (size_t k = 1; k < records.size(); ++k) {
        const IterationRecord& rec = records[k];
        require_contract(rec.c.size() == n && rec.f0.size() == n,
                         "iteration record dimension mismatch");
        require_contract(rec.n == ++expected, "iteration records out of order");
        require_contract(rec.c.units == CouplingUnits::dimensionless,
                         "iteration records beyond the first must be dimensionless");
        c = rec.c.c * c;
        f0 = rec.c.c * f0 + rec.f0.values;
    }
    CouplingMatrix out;
    out.c = std::move(c);
    out.units = CouplingUnits::phi0_per_volt;
    return {std::move(out), FluxVector{std::move(f0)}};
}

CalibrationEstimate CalibrationEstimate::from_history(std::vector<IterationRecord> records) {
    auto [c, f0] = compose_iterations(records);
    CalibrationEstimate est;
    est.c_prime = std::move(c);
    est.f0_prime = std::move(f0);
    est.history = std::move(records);
    return est;
}

void CalibrationEstimate::check_composition(double rel_tol) const {
    auto [c, f0] = compose_iterations(history);
    const double c_scale = std::max(c.c.cwiseAbs().maxCoeff(), 1e-30);
    const double f_scale = std::max({f0.values.cwiseAbs().maxCoeff(), c_scale, 1e-30});
    require_contract((c.c - c_prime.c).cwiseAbs().maxCoeff() <= rel_tol * c_scale,
                     "estimate matrix does not match composed history");
    require_contract((f0.values - f0_prime.values).cwiseAbs().maxCoeff() <= rel_tol * f_scale,
                     "estimate offsets do not match composed history");
}

VoltageVector voltage_for_flux(const CouplingMatrix& c, const FluxVector& f0,
                               const FluxVector& f_target) {
    require_contract(c.c.rows() == c.c.cols(), "coupling matrix must be square for solves");
    require_contract(f_target.size() == c.size() && f0.size() == c.size(),
                     "flux target dimension mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(c.c);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::numeric, "coupling matrix is singular; cannot solve for voltages");
    }
    // rcond estimate from the pivots; the full decomposition is cheap at N <= ~30.
    const double rcond = lu.rcond();
    if (rcond < 1e-12) {
        std::ostringstream msg;
        msg << "coupling matrix is ill-conditioned (rcond " << rcond << ")";
        throw Error(ErrorCode::numeric, msg.str());
    }
    return VoltageVector{lu.solve(f_target.values - f0.values)};
}

VoltageVector voltage_for_flux(const CalibrationEstimate& est, const FluxVector& f_target) {
    return voltage_for_flux(est.c_prime, est.f0_prime, f_target);
}

std::pair<double, double> convention_transform(double f_zprime, double f_x) {
    return {f_zprime + 0.5 * f_x, f_x};
}

std::pair<double, double> convention_transform_inverse(double f_z, double f_x) {
    return {f_z - 0.5 * f_x, f_x};
}

}  // namespace fxc
