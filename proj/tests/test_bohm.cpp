// Pilot-wave layer: guidance fields, trajectories, quantum potential and
// force, Hamilton-Jacobi residual.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "rbm/bohm.hpp"

using namespace rbm;
using Catch::Approx;

namespace {

const double pi = std::numbers::pi;

WaveState two_mode_box(double L, const DispersionModel& model) {
    return normalize(make_box_superposition(L, {{1, 1.0}, {2, 1.0}}, model));
}

WaveState grid_gaussian(const SpectralGrid& g, double sigma, double k0,
                        const DispersionModel& model) {
    GridState gs;
    gs.grid = g;
    gs.samples.resize(g.point_count);
    const double x0 = 0.5 * g.domain_length;
    for (int i = 0; i < g.point_count; ++i) {
        const double x = g.positions[i] - x0;
        gs.samples[i] = std::polar(std::exp(-x * x / (4.0 * sigma * sigma)), k0 * x);
    }
    return normalize(WaveState{gs, model});
}

}  // namespace

TEST_CASE("velocity_field: stationary box state gives zero flow") {
    const auto s = make_box_superposition(4.0, {{2, 1.0}}, DispersionModel::exact());
    const auto v = velocity_field(s, 0.7, s.model);
    for (double x : {0.3, 1.1, 3.6}) CHECK(v(x) == 0.0);
}

TEST_CASE("velocity_field: two-wave values for exact and nonrelativistic maps") {
    const auto exact = DispersionModel::exact();
    const auto n1 = DispersionModel::truncated(1);
    const auto s_ex = make_two_wave(0.2, 0.4, 1.0, 0.0, 1.0, exact);
    // at xi = 0: grad S = 0.3, exact v = 0.3/sqrt(1.09)
    CHECK(velocity_field(s_ex, 0.0, exact)(0.0) == Approx(0.2873478855663454).margin(1e-12));
    CHECK(velocity_field(s_ex, 0.0, n1)(0.0) == Approx(0.3).margin(1e-14));
}

TEST_CASE("integrate_trajectory: plane wave moves uniformly at v = 0.6") {
    const auto s = make_plane_wave(0.75, 1.0, DispersionModel::exact());
    const auto traj = integrate_trajectory(s, 0.0, {0.0, 10.0}, s.model, 0.01);
    REQUIRE_FALSE(traj.truncated);
    CHECK(traj.positions.back() == Approx(6.0).margin(1e-10));
    CHECK(traj.times.back() == Approx(10.0).margin(1e-12));
}

TEST_CASE("integrate_trajectory: stationary state stays put") {
    const auto s = make_box_superposition(4.0, {{1, 1.0}}, DispersionModel::exact());
    const auto traj = integrate_trajectory(s, 1.7, {0.0, 5.0}, s.model, 0.05);
    for (double x : traj.positions) CHECK(x == Approx(1.7).margin(1e-14));
}

TEST_CASE("integrate_trajectory: light cone for the exact model") {
    const auto s = two_mode_box(1.0, DispersionModel::exact());  // strongly relativistic
    const auto traj = integrate_trajectory(s, 0.45, {0.0, 2.0}, s.model, 1e-3);
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        const double dx = std::abs(traj.positions[i] - traj.positions[i - 1]);
        const double dt = traj.times[i] - traj.times[i - 1];
        CHECK(dx < dt);
    }
}

TEST_CASE("integrate_trajectory: endpoint error scales as dt^4") {
    const auto s = make_two_wave(0.2, 0.4, 1.0, 0.0, 1.0, DispersionModel::exact());
    auto endpoint = [&](double h) {
        return integrate_trajectory(s, 0.5, {0.0, 5.0}, s.model, h).positions.back();
    };
    const double ref = endpoint(0.003125);
    const double e1 = std::abs(endpoint(0.1) - ref);
    const double e2 = std::abs(endpoint(0.05) - ref);
    const double e3 = std::abs(endpoint(0.025) - ref);
    // Richardson: consecutive ratios within a factor 2 of 2^4
    CHECK(e1 / e2 > 8.0);
    CHECK(e1 / e2 < 32.0);
    CHECK(e2 / e3 > 8.0);
    CHECK(e2 / e3 < 32.0);
}

TEST_CASE("quantum_potential: box eigenstate gives the constant E_n - 1") {
    const auto exact = DispersionModel::exact();
    const auto s = make_box_superposition(pi, {{1, 1.0}}, exact);
    const SpectralGrid g = make_box_grid(pi, 256);
    const auto q = quantum_potential(s, 0.0, g, exact);
    const double expect = std::sqrt(2.0) - 1.0;
    for (int i = 0; i < g.point_count; ++i)
        if (q.valid[i]) CHECK(q.values[i] == Approx(expect).margin(1e-10));
}

TEST_CASE("quantum_potential: plane wave gives identically zero") {
    const auto exact = DispersionModel::exact();
    const auto s = make_plane_wave(0.75, 1.0, exact);
    const SpectralGrid g = make_grid(128, 16.0 * pi);  // k = 0.75 on the dual lattice
    const auto q = quantum_potential(s, 1.3, g, exact);
    for (int i = 0; i < g.point_count; ++i)
        if (q.valid[i]) CHECK(q.values[i] == Approx(0.0).margin(1e-11));
}

TEST_CASE("quantum_potential: N = 1 reduces to the standard Bohm potential") {
    const SpectralGrid g = make_grid(1024, 80.0);
    const auto n1 = DispersionModel::truncated(1);
    const auto s = grid_gaussian(g, 4.0, 0.0, n1);
    const auto q = quantum_potential(s, 0.0, g, n1);

    // oracle: -(1/2) R''/R by central differences on R = |psi|
    const auto& gs = std::get<GridState>(s.family);
    const double dx = g.spacing();
    for (int i = 2; i < g.point_count - 2; ++i) {
        if (!q.valid[i]) continue;
        const double rm = std::abs(gs.samples[i - 1]), r0 = std::abs(gs.samples[i]),
                     rp = std::abs(gs.samples[i + 1]);
        const double oracle = -0.5 * (rp - 2.0 * r0 + rm) / (dx * dx) / r0;
        if (std::abs(oracle) > 1e-3)  // compare where the field is resolved
            CHECK(q.values[i] == Approx(oracle).epsilon(1e-4));
    }
}

TEST_CASE("quantum_force: constant potential means zero force") {
    const auto exact = DispersionModel::exact();
    const auto s = make_box_superposition(2.0, {{3, 1.0}}, exact);
    const SpectralGrid g = make_box_grid(2.0, 256);
    const auto f = quantum_force(s, 0.0, g, exact);
    for (int i = 0; i < g.point_count; ++i)
        if (f.valid[i]) CHECK(f.values[i] == Approx(0.0).margin(1e-9));
}

TEST_CASE("quantum_force: matches central differences of Q on a packet") {
    const SpectralGrid g = make_grid(1024, 60.0);
    const auto exact = DispersionModel::exact();
    const auto s = grid_gaussian(g, 3.0, 0.4, exact);
    const auto q = quantum_potential(s, 0.0, g, exact);
    const auto f = quantum_force(s, 0.0, g, exact);
    const double dx = g.spacing();
    double fmax = 0.0;
    for (int i = 0; i < g.point_count; ++i)
        if (f.valid[i]) fmax = std::max(fmax, std::abs(f.values[i]));
    for (int i = 1; i + 1 < g.point_count; ++i) {
        if (!q.valid[i - 1] || !q.valid[i + 1] || !f.valid[i]) continue;
        const double fd = -(q.values[i + 1] - q.values[i - 1]) / (2.0 * dx);
        if (std::abs(fd) > 1e-2 * fmax)
            CHECK(f.values[i] == Approx(fd).epsilon(2e-3));
    }
}

TEST_CASE("quantum_force: material derivative of grad S along a trajectory") {
    const auto exact = DispersionModel::exact();
    const auto s = two_mode_box(5.0, exact);
    const SpectralGrid g = make_box_grid(5.0, 512);
    const double T = characteristic_period(s);

    const double h = T / 4000.0;
    const auto traj = integrate_trajectory(s, 1.6, {0.0, T / 4.0}, exact, h);
    REQUIRE_FALSE(traj.truncated);

    // sample the identity d(grad S)/dt = F(x(t), t) at a few path points
    int checked = 0;
    for (std::size_t i = 40; i + 40 < traj.times.size(); i += 200) {
        const double t = traj.times[i];
        const double pm = eval_grad_s(s, traj.positions[i - 20], traj.times[i - 20]);
        const double pp = eval_grad_s(s, traj.positions[i + 20], traj.times[i + 20]);
        const double dpdt = (pp - pm) / (traj.times[i + 20] - traj.times[i - 20]);

        const BohmFields f = compute_bohm_fields(s, t, g, exact);
        const double force = sample_field_at(g, f.force, traj.positions[i]);
        if (std::abs(force) > 1e-4) {
            CHECK(dpdt == Approx(force).epsilon(2e-3));
            ++checked;
        }
    }
    CHECK(checked > 3);
}

TEST_CASE("hj_residual: stationary and uniform states") {
    const auto exact = DispersionModel::exact();
    {
        const auto s = make_box_superposition(pi, {{2, 1.0}}, exact);
        const SpectralGrid g = make_box_grid(pi, 256);
        const auto r = hj_residual(s, 0.4, g, exact);
        for (int i = 0; i < g.point_count; ++i)
            if (r.valid[i]) CHECK(r.values[i] == Approx(0.0).margin(1e-10));
    }
    {
        const auto s = make_plane_wave(0.75, 1.0, exact);
        const SpectralGrid g = make_grid(128, 16.0 * pi);
        const auto r = hj_residual(s, 0.0, g, exact);
        for (int i = 0; i < g.point_count; ++i)
            if (r.valid[i]) CHECK(r.values[i] == Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("hj_residual: evolving two-mode box state stays below 1e-6") {
    const auto exact = DispersionModel::exact();
    const auto s = two_mode_box(5.0, exact);
    const SpectralGrid g = make_box_grid(5.0, 512);
    const double T = characteristic_period(s);
    for (double frac : {0.17, 0.37, 0.81}) {
        const auto r = hj_residual(s, frac * T, g, exact);
        double max_abs = 0.0;
        for (int i = 0; i < g.point_count; ++i)
            if (r.valid[i]) max_abs = std::max(max_abs, std::abs(r.values[i]));
        CHECK(max_abs < 1e-6);
    }
}

TEST_CASE("energy identity: E(grad S) + Q is the time-independent eigenvalue") {
    const auto exact = DispersionModel::exact();
    for (int n = 1; n <= 3; ++n) {
        const auto s = make_box_superposition(pi, {{n, 1.0}}, exact);
        const SpectralGrid g = make_box_grid(pi, 256);
        const double period = 2.0 * pi / box_energy(n, pi, exact);
        std::vector<double> q_at_t;
        for (double frac : {0.0, 0.31, 0.77}) {
            const BohmFields f = compute_bohm_fields(s, frac * period, g, exact);
            const double En = box_energy(n, pi, exact);
            for (int i = 0; i < g.point_count; ++i)
                if (f.valid[i]) {
                    const double total = multiplier(f.grad_s[i], exact) + f.quantum_potential[i];
                    CHECK(total == Approx(En).margin(1e-10));
                }
            q_at_t.push_back(f.quantum_potential[g.point_count / 3]);
        }
        // dQ/dt = 0 on a stationary state
        CHECK(std::abs(q_at_t[1] - q_at_t[0]) < 1e-10);
        CHECK(std::abs(q_at_t[2] - q_at_t[0]) < 1e-10);
    }
}

TEST_CASE("trajectory gap between exact and N=1 shrinks with box size") {
    // light version of the figure-1 ordering; the acceptance suite runs
    // the full {1,5,25,100} sweep through the CLI
    auto gap = [](double L) {
        const auto rel = two_mode_box(L, DispersionModel::exact());
        const auto nr = two_mode_box(L, DispersionModel::truncated(1));
        const double T_nr = 4.0 * L * L / (3.0 * pi);  // one nonrelativistic beat
        const double h = T_nr / 2000.0;
        const auto tr = integrate_trajectory(rel, 0.5 * L, {0.0, T_nr}, rel.model, h);
        const auto tn = integrate_trajectory(nr, 0.5 * L, {0.0, T_nr}, nr.model, h);
        const std::size_t m = std::min(tr.positions.size(), tn.positions.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            worst = std::max(worst, std::abs(tr.positions[i] - tn.positions[i]));
        return worst / L;
    };
    const double g5 = gap(5.0), g50 = gap(50.0);
    CHECK(g50 < g5);
}
