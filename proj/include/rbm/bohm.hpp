#pragma once
// The relativistic pilot-wave layer: guidance velocity fields, trajectory
// integration, the quantum potential and force, and Hamilton-Jacobi
// diagnostics.
//
// Writing psi = R e^{iS} and H for the free dispersion operator, the
// split (H psi)/psi = zeta + i eta gives
//   dS/dt = -zeta,      dR/dt = R eta,
// verified numerically rather than taken from any printed normalization.
// The quantum potential is defined for every truncation level as
//   Q = zeta - E(grad S),
// which reduces to -(1/2) R''/R at N = 1, equals E_n - 1 on a box
// eigenstate, and makes F = -dQ/dx an exact consequence of the guidance
// law v = E'(grad S) together with the Hamilton-Jacobi equation
//   dS/dt + E(grad S) + Q = 0.
//
// grad S is always computed as Im(conj(psi) dpsi)/|psi|^2 with a spectral
// derivative, never by differentiating an unwrapped phase; dS/dt comes
// from arg(psi(t+d)/psi(t-d))/(2d) at a fixed point, which needs no
// branch tracking as long as |omega_local| d < pi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rbm/dispersion.hpp"
#include "rbm/fft.hpp"
#include "rbm/grid.hpp"
#include "rbm/propagate.hpp"
#include "rbm/states.hpp"

namespace rbm {

// ---------------------------------------------------------------------------
// Field utilities
// ---------------------------------------------------------------------------

struct MaskedField {
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    double max_abs_valid() const {
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            if (valid[i]) m = std::max(m, std::abs(values[i]));
        return m;
    }
    int valid_count() const {
        int c = 0;
        for (auto v : valid) c += v != 0;
        return c;
    }
};

namespace detail {

// Spectral d/dx of a sampled field (Nyquist mode of the odd multiplier zeroed).
inline std::vector<Complex> spectral_derivative_c(const std::vector<Complex>& f,
                                                  const SpectralGrid& grid) {
    std::vector<Complex> out = f;
    fft_forward(out);
    const Complex I(0.0, 1.0);
    for (int j = 0; j < grid.point_count; ++j) {
        if (j == grid.point_count / 2)
            out[j] = 0.0;
        else
            out[j] *= I * grid.wavenumbers[j];
    }
    fft_inverse(out);
    return out;
}

inline std::vector<double> spectral_derivative(const std::vector<double>& f,
                                               const SpectralGrid& grid) {
    std::vector<Complex> c(f.begin(), f.end());
    c = spectral_derivative_c(c, grid);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = c[i].real();
    return out;
}

// Replace masked entries by linear interpolation between the nearest valid
// neighbours (periodic).  Keeps fields finite so a global spectral
// derivative stays meaningful; errors are confined to the masked pockets.
inline std::vector<double> fill_masked(const std::vector<double>& f,
                                       const std::vector<std::uint8_t>& valid) {
    const int n = static_cast<int>(f.size());
    std::vector<double> out = f;
    int nvalid = 0;
    for (auto v : valid) nvalid += v != 0;
    if (nvalid == 0) throw std::runtime_error("fill_masked: field is masked everywhere");
    if (nvalid == n) return out;
    for (int i = 0; i < n; ++i) {
        if (valid[i]) continue;
        int l = i, r = i;
        int dl = 0, dr = 0;
        while (!valid[(l + n) % n]) { --l; ++dl; }
        while (!valid[r % n]) { ++r; ++dr; }
        const double fl = f[(l + n) % n], fr = f[r % n];
        out[i] = (fl * dr + fr * dl) / (dl + dr);
    }
    return out;
}

}  // namespace detail

// 4-point Lagrange interpolation of a periodic grid field at an arbitrary
// position.  Good to O(dx^4) for smooth fields; used to read field
// snapshots along particle paths.
inline double sample_field_at(const SpectralGrid& grid, const std::vector<double>& field,
                              double x) {
    const int n = grid.point_count;
    const double dx = grid.spacing();
    double r = (x - grid.positions.front()) / dx;
    r -= std::floor(r / n) * n;  // wrap into [0, n)
    const int j0 = static_cast<int>(std::floor(r));
    const double s = r - j0;
    const double f0 = field[(j0 - 1 + n) % n], f1 = field[j0 % n];
    const double f2 = field[(j0 + 1) % n], f3 = field[(j0 + 2) % n];
    return f0 * (-s * (s - 1.0) * (s - 2.0) / 6.0) + f1 * ((s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0) +
           f2 * (-(s + 1.0) * s * (s - 2.0) / 2.0) + f3 * ((s + 1.0) * s * (s - 1.0) / 6.0);
}

// ---------------------------------------------------------------------------
// BohmFields: one-time snapshot of every guidance-related field on a grid
// ---------------------------------------------------------------------------

struct BohmFields {
    SpectralGrid grid;
    double time = 0.0;
    std::vector<double> density;            // |psi|^2
    std::vector<double> grad_s;             // Im(conj psi dpsi)/|psi|^2
    std::vector<double> velocity;           // E'(grad S)
    std::vector<double> quantum_potential;  // zeta - E(grad S)
    std::vector<double> force;              // -dQ/dx (spectral)
    std::vector<double> zeta;               // Re[(H psi)/psi]
    std::vector<double> eta;                // Im[(H psi)/psi]
    std::vector<std::uint8_t> valid;        // false near nodes
};

inline BohmFields compute_bohm_fields(const WaveState& state, double t, const SpectralGrid& grid,
                                      const DispersionModel& model) {
    BohmFields f;
    f.grid = grid;
    f.time = t;
    const GridState gs = sample_at(state, grid, t);
    const int n = grid.point_count;

    f.density.resize(n);
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        f.density[i] = std::norm(gs.samples[i]);
        dmax = std::max(dmax, f.density[i]);
    }
    if (dmax == 0.0) throw std::runtime_error("compute_bohm_fields: zero state");
    const double floor = node_floor_rel * dmax;
    f.valid.resize(n);
    for (int i = 0; i < n; ++i) f.valid[i] = f.density[i] >= floor ? 1 : 0;

    const std::vector<Complex> dpsi = detail::spectral_derivative_c(gs.samples, grid);
    const std::vector<Complex> hpsi = apply_hamiltonian(gs.samples, grid, model);

    f.grad_s.assign(n, 0.0);
    f.velocity.assign(n, 0.0);
    f.zeta.assign(n, 0.0);
    f.eta.assign(n, 0.0);
    f.quantum_potential.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (!f.valid[i]) continue;
        const Complex ratio_num = std::conj(gs.samples[i]);
        f.grad_s[i] = std::imag(ratio_num * dpsi[i]) / f.density[i];
        f.velocity[i] = guidance_velocity(f.grad_s[i], model);
        const Complex hr = ratio_num * hpsi[i];
        f.zeta[i] = hr.real() / f.density[i];
        f.eta[i] = hr.imag() / f.density[i];
        f.quantum_potential[i] = f.zeta[i] - multiplier(f.grad_s[i], model);
    }
    const std::vector<double> q_filled = detail::fill_masked(f.quantum_potential, f.valid);
    const std::vector<double> dq = detail::spectral_derivative(q_filled, grid);
    f.force.resize(n);
    for (int i = 0; i < n; ++i) f.force[i] = -dq[i];
    return f;
}

inline MaskedField quantum_potential(const WaveState& state, double t, const SpectralGrid& grid,
                                     const DispersionModel& model) {
    BohmFields f = compute_bohm_fields(state, t, grid, model);
    MaskedField out{std::move(f.quantum_potential), std::move(f.valid)};
    if (out.valid_count() == 0) throw std::runtime_error("quantum_potential: all points masked");
    return out;
}

inline MaskedField quantum_force(const WaveState& state, double t, const SpectralGrid& grid,
                                 const DispersionModel& model) {
    BohmFields f = compute_bohm_fields(state, t, grid, model);
    MaskedField out{std::move(f.force), std::move(f.valid)};
    if (out.valid_count() == 0) throw std::runtime_error("quantum_force: all points masked");
    return out;
}

// Residual of the Hamilton-Jacobi equation dS/dt + E(grad S) + Q at time t.
// dS/dt is measured by central phase differences over dt = 1e-4.
inline MaskedField hj_residual(const WaveState& state, double t, const SpectralGrid& grid,
                               const DispersionModel& model) {
    const double delta = 1e-4;
    const BohmFields f = compute_bohm_fields(state, t, grid, model);
    const GridState plus = sample_at(state, grid, t + delta);
    const GridState minus = sample_at(state, grid, t - delta);

    const int n = grid.point_count;
    MaskedField out;
    out.values.assign(n, 0.0);
    out.valid = f.valid;
    for (int i = 0; i < n; ++i) {
        if (!out.valid[i]) continue;
        const Complex ratio = plus.samples[i] / minus.samples[i];
        if (!(std::abs(ratio) > 0.0) || !std::isfinite(std::abs(ratio))) {
            out.valid[i] = 0;
            continue;
        }
        const double ds_dt = std::arg(ratio) / (2.0 * delta);
        out.values[i] = ds_dt + multiplier(f.grad_s[i], model) + f.quantum_potential[i];
    }
    if (out.valid_count() == 0) throw std::runtime_error("hj_residual: all points masked");
    return out;
}

// ---------------------------------------------------------------------------
// Velocity evaluation
// ---------------------------------------------------------------------------

namespace detail {

// Band-limited evaluator for grid states: freezes the Fourier coefficients
// once and evaluates psi and derivatives at arbitrary (x, t) by direct mode
// summation with exact phase evolution.  O(N) per call; intended for
// trajectory integration, not for bulk field work.
class BandLimitedState {
  public:
    BandLimitedState(const GridState& gs, const DispersionModel& model)
        : grid_(gs.grid), t0_(gs.time), model_(model), coeff_(gs.samples) {
        fft_forward(coeff_);
        const double inv_n = 1.0 / grid_.point_count;
        omega_.resize(grid_.point_count);
        for (int j = 0; j < grid_.point_count; ++j) {
            coeff_[j] *= inv_n;
            omega_[j] = multiplier(grid_.wavenumbers[j], model_);
        }
    }

    void eval(double x, double t, Complex& psi, Complex& dpsi, Complex& d2psi) const {
        const Complex I(0.0, 1.0);
        psi = dpsi = d2psi = 0.0;
        for (int j = 0; j < grid_.point_count; ++j) {
            const double k = grid_.wavenumbers[j];
            const Complex m = coeff_[j] * std::exp(I * (k * x - omega_[j] * (t - t0_)));
            psi += m;
            dpsi += I * k * m;
            d2psi += -k * k * m;
        }
    }

    double density_scale() const {
        double m = 0.0;
        for (const auto& c : coeff_) m += std::abs(c);
        return m * m;
    }

  private:
    SpectralGrid grid_;
    double t0_;
    DispersionModel model_;
    std::vector<Complex> coeff_;
    std::vector<double> omega_;
};

}  // namespace detail

// Unified point evaluator used by the integrator: closed forms for analytic
// families, band-limited summation for grid states.
class VelocityField {
  public:
    VelocityField(const WaveState& state, const DispersionModel& model)
        : state_(&state), model_(model) {
        if (const auto* gs = std::get_if<GridState>(&state.family))
            grid_eval_.emplace(*gs, model);
    }

    double velocity(double x, double t) const { return guidance_velocity(grad_s(x, t), model_); }

    double grad_s(double x, double t) const {
        if (!grid_eval_) return eval_grad_s(*state_, x, t);
        Complex psi, dpsi, d2psi;
        grid_eval_->eval(x, t, psi, dpsi, d2psi);
        const double den = std::norm(psi);
        if (den < node_floor_rel * grid_eval_->density_scale()) throw NodeSingularity(x, t);
        return std::imag(std::conj(psi) * dpsi) / den;
    }

    // dv/dx at a point, for log-density transport.
    double velocity_slope(double x, double t) const {
        double p, dp;
        if (!grid_eval_) {
            p = eval_grad_s(*state_, x, t);
            dp = eval_grad_s_slope(*state_, x, t);
        } else {
            Complex psi, dpsi, d2psi;
            grid_eval_->eval(x, t, psi, dpsi, d2psi);
            const double den = std::norm(psi);
            if (den < node_floor_rel * grid_eval_->density_scale()) throw NodeSingularity(x, t);
            p = std::imag(std::conj(psi) * dpsi) / den;
            dp = (std::imag(std::conj(psi) * d2psi) -
                  2.0 * p * std::real(std::conj(psi) * dpsi)) /
                 den;
        }
        return guidance_slope(p, model_) * dp;
    }

    const DispersionModel& model() const { return model_; }

  private:
    const WaveState* state_;
    DispersionModel model_;
    std::optional<detail::BandLimitedState> grid_eval_;
};

// Frozen-time velocity profile v(x) at time t, per the guidance law.
inline std::function<double(double)> velocity_field(const WaveState& state, double t,
                                                    const DispersionModel& model) {
    auto vf = std::make_shared<VelocityField>(state, model);
    return [vf, t](double x) { return vf->velocity(x, t); };
}

// ---------------------------------------------------------------------------
// Trajectory integration
// ---------------------------------------------------------------------------

struct TrajectoryEvent {
    enum class Kind { StepHalved, NodeTruncated };
    Kind kind;
    double time;
    double position;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<double> log_density;  // empty unless requested
    DispersionModel model = DispersionModel::exact();
    bool truncated = false;
    std::vector<TrajectoryEvent> events;
};

struct TrajectoryOptions {
    bool carry_log_density = false;
    double initial_log_density = 0.0;
    double dt_min = 1e-6;
};

namespace detail {

// One classical RK4 step of dx/dt = v(x,t), optionally transporting
// d(ln rho)/dt = -dv/dx along the path.  Returns false if any stage hits a
// node (or leaves the state's domain), in which case x/lnrho are untouched.
inline bool rk4_step(const VelocityField& vf, double& x, double& lnrho, double t, double h,
                     bool with_lnrho) {
    try {
        const double k1 = vf.velocity(x, t);
        const double k2 = vf.velocity(x + 0.5 * h * k1, t + 0.5 * h);
        const double k3 = vf.velocity(x + 0.5 * h * k2, t + 0.5 * h);
        const double k4 = vf.velocity(x + h * k3, t + h);
        double l1 = 0.0, l2 = 0.0, l3 = 0.0, l4 = 0.0;
        if (with_lnrho) {
            l1 = -vf.velocity_slope(x, t);
            l2 = -vf.velocity_slope(x + 0.5 * h * k1, t + 0.5 * h);
            l3 = -vf.velocity_slope(x + 0.5 * h * k2, t + 0.5 * h);
            l4 = -vf.velocity_slope(x + h * k3, t + h);
        }
        x += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        if (with_lnrho) lnrho += h * (l1 + 2.0 * l2 + 2.0 * l3 + l4) / 6.0;
        return true;
    } catch (const NodeSingularity&) {
        return false;
    } catch (const std::domain_error&) {
        return false;
    }
}

}  // namespace detail

inline Trajectory integrate_trajectory(const WaveState& state, double x0,
                                       std::pair<double, double> t_span,
                                       const DispersionModel& model, double step,
                                       const TrajectoryOptions& opts = {}) {
    if (!(step > 0.0)) throw std::invalid_argument("integrate_trajectory: step must be positive");
    const auto [t0, t1] = t_span;
    if (!(t1 > t0)) throw std::invalid_argument("integrate_trajectory: need t1 > t0");

    const VelocityField vf(state, model);
    Trajectory traj;
    traj.model = model;
    double x = x0, lnrho = opts.initial_log_density, t = t0;
    traj.times.push_back(t);
    traj.positions.push_back(x);
    if (opts.carry_log_density) traj.log_density.push_back(lnrho);

    while (t < t1 - 1e-15 * (1.0 + std::abs(t1))) {
        const double h_nominal = std::min(step, t1 - t);
        double h = h_nominal;
        bool advanced = false;
        while (h >= opts.dt_min) {
            double xn = x, ln = lnrho;
            if (detail::rk4_step(vf, xn, ln, t, h, opts.carry_log_density)) {
                x = xn;
                lnrho = ln;
                t += h;
                advanced = true;
                break;
            }
            traj.events.push_back({TrajectoryEvent::Kind::StepHalved, t, x});
            h *= 0.5;
        }
        if (!advanced) {
            traj.truncated = true;
            traj.events.push_back({TrajectoryEvent::Kind::NodeTruncated, t, x});
            break;
        }
        traj.times.push_back(t);
        traj.positions.push_back(x);
        if (opts.carry_log_density) traj.log_density.push_back(lnrho);
    }
    return traj;
}

}  // namespace rbm
