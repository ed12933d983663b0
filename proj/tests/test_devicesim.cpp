#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "fluxcal/backend.hpp"
#include "fluxcal/devicesim.hpp"

using namespace fxc;
using namespace fxc::testing;

namespace {

double potential(double phi, double f_r, const RfSquidModel& m) {
    // pH * uA^2 energy units; only the minimizer location matters.
    return -(m.ic_uA * kPhi0_pH_uA / (2 * M_PI)) * std::cos(phi) +
           (kPhi0_pH_uA * kPhi0_pH_uA / (2 * m.lg_pH)) * std::pow(phi / (2 * M_PI) - f_r, 2);
}

}  // namespace

TEST_CASE("squid phase at zero flux is zero") {
    RfSquidModel m;
    m.ic_uA = 1.1;
    m.lg_pH = 230.0;
    CHECK(squid_phase(0.0, m) == 0.0);
}

TEST_CASE("squid phase matches a dense grid-search oracle") {
    RfSquidModel m;
    // beta_L = 0.8
    m.ic_uA = 1.0;
    m.lg_pH = 0.8 * kPhi0_pH_uA / (2 * M_PI);
    CHECK(m.beta_l() == doctest::Approx(0.8).epsilon(1e-12));

    for (double f_r : {0.5, 0.13, -0.31, 0.77}) {
        // Oracle: dense scan of U(phi) with bisection refinement on dU/dphi.
        double best_phi = 0, best_u = std::numeric_limits<double>::max();
        const int steps = 60000;
        for (int k = 0; k <= steps; ++k) {
            const double phi = -2 * M_PI + 6 * M_PI * k / steps;
            const double u = potential(phi, f_r, m);
            if (u < best_u) {
                best_u = u;
                best_phi = phi;
            }
        }
        auto dU = [&](double phi) {
            const double h = 1e-6;
            return (potential(phi + h, f_r, m) - potential(phi - h, f_r, m)) / (2 * h);
        };
        double lo = best_phi - 6 * M_PI / steps, hi = best_phi + 6 * M_PI / steps;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (dU(mid) > 0 ? hi : lo) = mid;
        }
        const double oracle = 0.5 * (lo + hi);
        CHECK(squid_phase(f_r, m) == doctest::Approx(oracle).epsilon(1e-7));
    }
}

TEST_CASE("squid phase is odd in the applied flux") {
    RfSquidModel m;
    m.ic_uA = 0.9;
    m.lg_pH = 260.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        const double f = d(rng);
        CHECK(squid_phase(-f, m) == doctest::Approx(-squid_phase(f, m)).epsilon(1e-12));
    }
}

TEST_CASE("squid effective inductance") {
    RfSquidModel m;
    m.ic_uA = 1.0;
    m.lg_pH = 300.0;
    SUBCASE("cosine vanishes at phi = pi/2") {
        CHECK(squid_effective_inductance_pH(M_PI / 2, m) == doctest::Approx(300.0).epsilon(1e-12));
    }
    SUBCASE("direct formula at phi = 0") {
        const double expect = 1.0 / (1.0 / 300.0 + 2 * M_PI * 1.0 / kPhi0_pH_uA);
        CHECK(squid_effective_inductance_pH(0.0, m) == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("even in phi") {
        for (double phi : {0.3, 1.2, 2.9})
            CHECK(squid_effective_inductance_pH(phi, m) ==
                  doctest::Approx(squid_effective_inductance_pH(-phi, m)).epsilon(1e-14));
    }
}

TEST_CASE("resonator frequency limits and generic root") {
    RfSquidModel m;
    m.len_mm = 5.0;
    m.vph_mm_ns = 130.0;
    m.z0_ohm = 50.0;

    const double quarter = M_PI * m.vph_mm_ns / (2 * m.len_mm);
    CHECK(resonator_frequency_rad_ns(0.0, m) == doctest::Approx(quarter).epsilon(1e-12));
    CHECK(resonator_frequency_rad_ns(std::numeric_limits<double>::infinity(), m) ==
          doctest::Approx(2 * quarter).epsilon(1e-12));

    const double l_eff = 50.0;
    const double root = resonator_frequency_rad_ns(l_eff, m);
    // The root satisfies the complex transcendental equation.
    const std::complex<double> i(0, 1);
    const std::complex<double> lhs = std::exp(2.0 * i * root * m.len_mm / m.vph_mm_ns);
    const std::complex<double> rhs = (i * root * l_eff * 1e-3 - m.z0_ohm) /
                                     (i * root * l_eff * 1e-3 + m.z0_ohm);
    CHECK(std::abs(lhs - rhs) < 1e-10);

    // And it is the lowest positive one: the phase residual has no earlier
    // sign change on a dense grid.
    auto g = [&](double w) {
        return 2 * w * m.len_mm / m.vph_mm_ns + 2 * std::atan(w * l_eff * 1e-3 / m.z0_ohm) - M_PI;
    };
    double prev = g(1e-6);
    for (int k = 1; k <= 20000; ++k) {
        const double w = root * 0.999 * k / 20000.0;
        CHECK(g(w) < 0);
        CHECK(g(w) >= prev - 1e-12);
        prev = g(w);
    }
}

TEST_CASE("element effective inductance") {
    ElementModel elem;
    elem.role = ElementRole::coupler;
    elem.imax_uA = 0.45;

    SUBCASE("infinite at a stationary point of the current") {
        // f_z = 1/4 maximizes sin(2 pi f_z)
        CHECK(std::isinf(element_effective_inductance_pH(0.25, 0.0, elem)));
    }
    SUBCASE("closed-form derivative at f_z = 0") {
        const double expect = kPhi0_pH_uA / (2 * M_PI * elem.imax_uA);
        CHECK(element_effective_inductance_pH(0.0, 0.0, elem) ==
              doctest::Approx(expect).epsilon(1e-7));
    }
    SUBCASE("periodic in f_z with period 1") {
        for (double fz : {0.1, 0.3, 0.7})
            CHECK(element_effective_inductance_pH(fz, 0.3, elem) ==
                  doctest::Approx(element_effective_inductance_pH(fz + 1.0, 0.3, elem))
                      .epsilon(1e-10));
    }
    SUBCASE("central differences converge at second order") {
        const double f_z = 0.13, f_x = 0.4;
        const double exact = 2 * M_PI * elem.imax_uA * std::cos(M_PI * f_x) *
                             std::cos(2 * M_PI * f_z);
        const double d1 = kPhi0_pH_uA / element_effective_inductance_pH(f_z, f_x, elem, 1e-3);
        const double d2 = kPhi0_pH_uA / element_effective_inductance_pH(f_z, f_x, elem, 5e-4);
        const double e1 = std::abs(d1 - exact);
        const double e2 = std::abs(d2 - exact);
        CHECK(e2 < 0.3 * e1);  // ~4x reduction for halved step
    }
}

TEST_CASE("element current symmetry and bounds") {
    ElementModel elem;
    elem.imax_uA = 0.45;
    elem.harmonic2 = 0.2;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-3, 3);
    for (int k = 0; k < 100; ++k) {
        const double fz = d(rng), fx = d(rng);
        const double i = elem.current_uA(fz, fx);
        CHECK(std::abs(i) <= elem.imax_uA + 1e-12);
        CHECK(elem.current_uA(-fz, -fx) == doctest::Approx(-i).epsilon(1e-12));
        CHECK(elem.current_uA(fz + 1.0, fx) == doctest::Approx(i).epsilon(1e-10));
        CHECK(elem.current_uA(fz, fx + 2.0) == doctest::Approx(i).epsilon(1e-10));
    }
}

TEST_CASE("loaded resonator frequency") {
    const DeviceSpec spec = interacting_cell_device();
    const CellSpec& cell = spec.cells[0];

    SUBCASE("decoupled limit equals the unloaded pipeline") {
        CellSpec bare = cell;
        bare.elem_squid_mutual_mphi0_uA = 0.0;
        const double w_loaded = loaded_resonator_frequency(0.2, 0.1, 0.0, bare);
        const double phi = squid_phase(0.2, bare.squid);
        const double w_direct = resonator_frequency_rad_ns(
            squid_effective_inductance_pH(phi, bare.squid), bare.squid);
        CHECK(w_loaded == doctest::Approx(w_direct).epsilon(1e-14));
    }

    SUBCASE("mirror symmetry and flux periodicity") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> d(-1.5, 1.5);
        for (int k = 0; k < 50; ++k) {
            const double fr = d(rng), fz = d(rng), fx = d(rng);
            const double w = loaded_resonator_frequency(fr, fz, fx, cell);
            CHECK(std::abs(loaded_resonator_frequency(-fr, -fz, -fx, cell) - w) < 1e-10 * w);
            CHECK(std::abs(loaded_resonator_frequency(fr + 1, fz + 1, fx + 2, cell) - w) <
                  1e-10 * w);
            CHECK(std::abs(loaded_resonator_frequency(fr + 1, fz, fx, cell) - w) < 1e-10 * w);
            CHECK(std::abs(loaded_resonator_frequency(fr, fz + 1, fx, cell) - w) < 1e-10 * w);
            CHECK(std::abs(loaded_resonator_frequency(fr, fz, fx + 2, cell) - w) < 1e-10 * w);
        }
    }
}

TEST_CASE("interaction breaks translational symmetry in the bias sweep") {
    // Resonator frequency vs V_r at V_z = 0 and V_z = 1 V.  With the
    // coupler-resonator interaction the two curves are not translations of
    // each other; with it removed they are.
    auto translation_residual = [](const DeviceSpec& spec) {
        const int n = 201;
        const double period = 1.0;  // C_rr = 1
        Eigen::VectorXd w0(n), w1(n);
        for (int k = 0; k < n; ++k) {
            const double vr = -1.0 + 2.0 * k / (n - 1);
            VoltageVector v = VoltageVector::zero(3);
            v.values(2) = vr;
            w0(k) = resonator_frequencies(v, spec)(0);
            v.values(0) = 1.0;
            w1(k) = resonator_frequencies(v, spec)(0);
        }
        // Best translation over a fine scan (in units of the grid).
        const double step = 2.0 / (n - 1);
        double best = std::numeric_limits<double>::max();
        for (int s = -n / 2; s <= n / 2; ++s) {
            double rms = 0;
            int count = 0;
            for (int k = 0; k < n; ++k) {
                const int ks = k + s;
                if (ks < 0 || ks >= n)
                    continue;
                (void)period;
                rms += std::pow(w0(k) - w1(ks), 2);
                ++count;
            }
            if (count > n / 2)
                best = std::min(best, std::sqrt(rms / count));
        }
        (void)step;
        return best;
    };

    const double resid_coupled = translation_residual(interacting_cell_device());
    const double resid_decoupled = translation_residual(decoupled_cell_device());
    CHECK(resid_coupled > 0);
    CHECK(resid_coupled > 100.0 * std::max(resid_decoupled, 1e-18));
}

TEST_CASE("s21 notch behavior") {
    DeviceSpec spec = interacting_cell_device();
    spec.sigma_s21 = 0.0;
    const VoltageVector v = VoltageVector::zero(3);
    const double wr = resonator_frequencies(v, spec)(0);
    const double kappa = spec.cells[0].notch.kappa_rad_ns;

    CHECK(std::abs(s21(wr, v, spec, 1)) == doctest::Approx(1.0 - 0.8).epsilon(1e-6));
    CHECK(std::abs(s21(wr + 150 * kappa, v, spec, 1)) == doctest::Approx(1.0).epsilon(1e-4));

    // Two resonators within a linewidth dip deeper than either alone.
    DeviceSpec pair = testing::linear_device(2, 42);
    pair.sigma_s21 = 0.0;
    // Give both cells the same geometry so their resonances coincide.
    pair.cells[1] = pair.cells[0];
    pair.cells[1].name = "c1";
    const VoltageVector v6 = VoltageVector::zero(6);
    const double w_pair = resonator_frequencies(v6, pair)(0);

    DeviceSpec only_first = pair;
    only_first.cells[1].notch.depth = 1e-12;
    DeviceSpec only_second = pair;
    only_second.cells[0].notch.depth = 1e-12;

    const double both = std::abs(s21(w_pair, v6, pair, 1));
    const double first = std::abs(s21(w_pair, v6, only_first, 1));
    const double second = std::abs(s21(w_pair, v6, only_second, 1));
    CHECK(both < first);
    CHECK(both < second);
}

TEST_CASE("voltage range is enforced") {
    DeviceSpec spec = interacting_cell_device();
    spec.voltage_range = 2.0;
    VoltageVector v = VoltageVector::zero(3);
    v.values(0) = 2.5;
    CHECK_THROWS_AS(total_fluxes(v, spec), Error);
}

TEST_CASE("simulator backend determinism and periodicity") {
    DeviceSpec spec = decoupled_cell_device();
    spec.sigma_s21 = 0.0;
    // Fully decoupled from z/x: keep only the r row so a one-period sweep
    // wraps exactly.
    spec.c_true.c = Eigen::Matrix3d::Identity();
    spec.f0_true = FluxVector::zero(3);

    SimulatorBackend backend(spec, 99);
    ControlFrame frame;  // raw voltages

    SimpleSweep sweep;
    sweep.loop1 = 2;  // r line
    sweep.grid1 = linspace(-0.5, 0.5, 41);  // exactly one period at C_rr = 1
    sweep.loop2 = -1;
    sweep.grid2 = linspace(spec.cells[0].probe_lo, spec.cells[0].probe_hi, 31);
    sweep.fixed_u = Eigen::VectorXd::Zero(3);

    const ImageRequest req = make_request(sweep, frame, spec.cell_names());
    const TransmissionImage img = backend.measure(req);
    CHECK(backend.points_measured() == 41u * 31u);
    CHECK((img.values.row(0) - img.values.row(40)).cwiseAbs().maxCoeff() < 1e-10);

    SUBCASE("same seed gives bit-identical images") {
        DeviceSpec noisy = spec;
        noisy.sigma_s21 = 0.02;
        SimulatorBackend b1(noisy, 1234), b2(noisy, 1234);
        const TransmissionImage i1 = b1.measure(req);
        const TransmissionImage i2 = b2.measure(req);
        CHECK((i1.values - i2.values).cwiseAbs().maxCoeff() == 0.0);

        SimulatorBackend b3(noisy, 1235);
        const TransmissionImage i3 = b3.measure(req);
        CHECK((i1.values - i3.values).cwiseAbs().maxCoeff() > 0.0);
    }

    SUBCASE("single point sweep") {
        SimpleSweep one = sweep;
        one.grid1 = linspace(0.2, 0.2, 1);
        one.grid2 = linspace(40.0, 40.0, 1);
        SimulatorBackend b(spec, 7);
        const TransmissionImage i1 = b.measure(make_request(one, frame, spec.cell_names()));
        CHECK(i1.rows() == 1);
        CHECK(i1.cols() == 1);
        VoltageVector v = VoltageVector::zero(3);
        v.values(2) = 0.2;
        // Seed layout matches the backend's per-point derivation.
        CHECK(std::abs(i1.values(0, 0)) == doctest::Approx(std::abs(s21(40.0, v, spec, 0)))
                                               .epsilon(1e-12));
    }
}

TEST_CASE("drift model") {
    DeviceSpec spec = interacting_cell_device();
    spec.drift.rms_48h_mphi0 = 1.3;
    const FluxVector f0 = FluxVector::zero(3);

    SUBCASE("zero duration leaves offsets unchanged") {
        const FluxVector out = apply_drift(f0, 0.0, spec, 5);
        CHECK((out.values - f0.values).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("48 h ensemble RMS matches the configured target") {
        double ss = 0;
        int count = 0;
        for (uint64_t seed = 0; seed < 1000; ++seed) {
            const FluxVector out = apply_drift(f0, 48.0, spec, seed);
            ss += out.values.squaredNorm();
            count += 3;
        }
        const double rms_mphi0 = std::sqrt(ss / count) * 1e3;
        CHECK(rms_mphi0 > 1.3 * 0.9);
        CHECK(rms_mphi0 < 1.3 * 1.1);
    }

    SUBCASE("17-day jump channel produces large excursions") {
        DeviceSpec jumpy = spec;
        jumpy.drift.jump_prob_per_loop_per_day = 0.2;
        int seeds_with_jump = 0;
        for (uint64_t seed = 0; seed < 50; ++seed) {
            const FluxVector out = apply_drift(f0, 17.0 * 24.0, jumpy, seed);
            if (out.values.cwiseAbs().maxCoeff() > 10e-3)
                ++seeds_with_jump;
        }
        // 1 - exp(-3.4) ~ 0.97 per loop, three loops per device.
        CHECK(seeds_with_jump >= 45);

        int no_jump_large = 0;
        for (uint64_t seed = 0; seed < 50; ++seed) {
            const FluxVector out = apply_drift(f0, 17.0 * 24.0, spec, seed);
            if (out.values.cwiseAbs().maxCoeff() > 10e-3)
                ++no_jump_large;
        }
        CHECK(no_jump_large == 0);
    }
}

TEST_CASE("device validation rejects bad configs") {
    DeviceSpec spec = interacting_cell_device();
    SUBCASE("hysteretic SQUID") {
        spec.cells[0].squid.ic_uA = 10.0;  // beta_L > 1
        CHECK_THROWS_AS(spec.validate(), Error);
    }
    SUBCASE("zero diagonal") {
        spec.c_true.c(1, 1) = 0.0;
        CHECK_THROWS_AS(spec.validate(), Error);
    }
    SUBCASE("matrix size mismatch") {
        spec.c_true.c = Eigen::MatrixXd::Identity(2, 2);
        CHECK_THROWS_AS(spec.validate(), Error);
    }
}
