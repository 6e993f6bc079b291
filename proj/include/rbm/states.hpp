#pragma once
// Wave-function families with closed-form psi, |psi|^2 and grad S, plus
// grid-sampled numeric states.
//
// Analytic families carry their time dependence exactly (e^{-i omega t}
// phases with omega from the state's dispersion model), so they double as
// discretization-free oracles for the grid machinery.  A box eigenstate
// phi_n(x) = sqrt(2/L) sin(n pi x / L) pairs with E_n = E(n pi / L); the
// mode function and the energy share the same wavenumber by construction.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <variant>
#include <vector>

#include "rbm/dispersion.hpp"
#include "rbm/grid.hpp"

namespace rbm {

using Complex = std::complex<double>;

// grad S is singular at wave-function nodes; operations signal instead of
// returning garbage there.
struct NodeSingularity : std::runtime_error {
    double position, time;
    NodeSingularity(double x, double t)
        : std::runtime_error("node singularity: |psi|^2 below floor"), position(x), time(t) {}
};

struct PlaneWave {
    double wavenumber = 0.0;
    Complex amplitude = 1.0;
};

// psi = A [ e^{i(k1 x - w1 t)} + b e^{i(k2 x - w2 t)} ],  b = rel_amp e^{i rel_phase}
struct TwoWave {
    double k1 = 0.0, k2 = 0.0;
    double rel_amp = 1.0;    // |b| >= 0
    double rel_phase = 0.0;  // delta in [0, 2pi)
    Complex overall = 1.0;   // A
};

struct BoxSuperposition {
    double box_length = 0.0;                          // L in Compton lengths
    std::vector<std::pair<int, Complex>> mode_coeffs;  // n >= 1, sorted by n
};

struct GridState {
    SpectralGrid grid;
    std::vector<Complex> samples;
    double time = 0.0;  // instant the samples represent
};

struct WaveState {
    std::variant<PlaneWave, TwoWave, BoxSuperposition, GridState> family;
    DispersionModel model = DispersionModel::exact();
};

// --- constructors -----------------------------------------------------------

inline WaveState make_plane_wave(double k, Complex amplitude, const DispersionModel& model) {
    return WaveState{PlaneWave{k, amplitude}, model};
}

inline WaveState make_two_wave(double k1, double k2, double rel_amp, double rel_phase,
                               Complex overall, const DispersionModel& model) {
    if (rel_amp < 0.0) throw std::invalid_argument("make_two_wave: |b| must be >= 0");
    return WaveState{TwoWave{k1, k2, rel_amp, rel_phase, overall}, model};
}

inline WaveState make_box_superposition(double box_length,
                                        std::vector<std::pair<int, Complex>> modes,
                                        const DispersionModel& model) {
    if (!(box_length > 0.0)) throw std::invalid_argument("box: length must be positive");
    if (modes.empty()) throw std::invalid_argument("box: at least one mode required");
    for (const auto& [n, c] : modes)
        if (n < 1) throw std::invalid_argument("box: mode indices must be >= 1");
    std::sort(modes.begin(), modes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return WaveState{BoxSuperposition{box_length, std::move(modes)}, model};
}

// --- box energies ------------------------------------------------------------

inline double box_energy(int n, double box_length, const DispersionModel& model) {
    if (n < 1) throw std::invalid_argument("box_energy: mode index must be >= 1");
    if (!(box_length > 0.0)) throw std::invalid_argument("box_energy: box length must be positive");
    return multiplier(n * std::numbers::pi / box_length, model);
}

inline double box_energy(int nx, int ny, int nz, double box_length, const DispersionModel& model) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("box_energy: mode indices must be >= 1");
    if (!(box_length > 0.0)) throw std::invalid_argument("box_energy: box length must be positive");
    const double u = std::numbers::pi / box_length;
    const double k = u * std::sqrt(static_cast<double>(nx) * nx + static_cast<double>(ny) * ny +
                                   static_cast<double>(nz) * nz);
    return multiplier(k, model);
}

// --- evaluation --------------------------------------------------------------

namespace detail {

inline Complex box_mode(int n, double box_length, double x) {
    return std::sqrt(2.0 / box_length) * std::sin(n * std::numbers::pi * x / box_length);
}

// psi and its first two spatial derivatives for the analytic families.
// order: 0 -> psi, 1 -> dpsi/dx, 2 -> d2psi/dx2.
inline Complex eval_analytic(const WaveState& s, double x, double t, int order) {
    const Complex I(0.0, 1.0);
    if (const auto* pw = std::get_if<PlaneWave>(&s.family)) {
        const double w = multiplier(pw->wavenumber, s.model);
        Complex v = pw->amplitude * std::exp(I * (pw->wavenumber * x - w * t));
        for (int d = 0; d < order; ++d) v *= I * pw->wavenumber;
        return v;
    }
    if (const auto* tw = std::get_if<TwoWave>(&s.family)) {
        const double w1 = multiplier(tw->k1, s.model), w2 = multiplier(tw->k2, s.model);
        Complex u1 = std::exp(I * (tw->k1 * x - w1 * t));
        Complex u2 = tw->rel_amp * std::exp(I * (tw->rel_phase + tw->k2 * x - w2 * t));
        for (int d = 0; d < order; ++d) {
            u1 *= I * tw->k1;
            u2 *= I * tw->k2;
        }
        return tw->overall * (u1 + u2);
    }
    if (const auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        const double L = box->box_length;
        if (x < 0.0 || x > L)
            throw std::domain_error("eval_psi: position outside the box domain [0, L]");
        const double norm = std::sqrt(2.0 / L);
        Complex acc = 0.0;
        for (const auto& [n, c] : box->mode_coeffs) {
            const double kn = n * std::numbers::pi / L;
            const double En = multiplier(kn, s.model);
            const Complex phase = std::exp(-I * En * t);
            double sp;
            switch (order) {
                case 0: sp = std::sin(kn * x); break;
                case 1: sp = kn * std::cos(kn * x); break;
                default: sp = -kn * kn * std::sin(kn * x); break;
            }
            acc += c * norm * sp * phase;
        }
        return acc;
    }
    throw std::invalid_argument("eval: grid states are evaluated at grid nodes only");
}

}  // namespace detail

inline Complex eval_psi(const WaveState& s, double x, double t) {
    if (const auto* gs = std::get_if<GridState>(&s.family)) {
        const double dx = gs->grid.spacing();
        const double r = (x - gs->grid.positions.front()) / dx;
        const long j = std::lround(r);
        if (std::abs(r - j) > 1e-9 || j < 0 || j >= gs->grid.point_count)
            throw std::domain_error("eval_psi: grid states are evaluated at grid nodes only");
        if (std::abs(t - gs->time) > 1e-12 * (1.0 + std::abs(gs->time)))
            throw std::domain_error("eval_psi: grid state sampled at a different time; evolve it first");
        return gs->samples[static_cast<std::size_t>(j)];
    }
    return detail::eval_analytic(s, x, t, 0);
}

// Conservative bound on the spatial max of |psi|^2, used for the node floor.
inline double density_scale(const WaveState& s) {
    if (const auto* pw = std::get_if<PlaneWave>(&s.family)) return std::norm(pw->amplitude);
    if (const auto* tw = std::get_if<TwoWave>(&s.family)) {
        const double a = std::abs(tw->overall) * (1.0 + tw->rel_amp);
        return a * a;
    }
    if (const auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        double a = 0.0;
        for (const auto& [n, c] : box->mode_coeffs) a += std::abs(c);
        return a * a * 2.0 / box->box_length;
    }
    const auto* gs = std::get_if<GridState>(&s.family);
    double m = 0.0;
    for (const auto& v : gs->samples) m = std::max(m, std::norm(v));
    return m;
}

inline constexpr double node_floor_rel = 1e-12;

// grad S = Im(conj(psi) dpsi) / |psi|^2.  Exactly k for plane waves, exactly
// zero for real states, and the interference closed form for two waves.
inline double eval_grad_s(const WaveState& s, double x, double t) {
    if (std::holds_alternative<GridState>(s.family))
        throw std::invalid_argument("eval_grad_s: use bohm field routines for grid states");
    const Complex psi = detail::eval_analytic(s, x, t, 0);
    const Complex dpsi = detail::eval_analytic(s, x, t, 1);
    const double den = std::norm(psi);
    if (den < node_floor_rel * density_scale(s)) throw NodeSingularity(x, t);
    return std::imag(std::conj(psi) * dpsi) / den;
}

// d(grad S)/dx, needed for log-density transport along trajectories.
inline double eval_grad_s_slope(const WaveState& s, double x, double t) {
    const Complex psi = detail::eval_analytic(s, x, t, 0);
    const Complex dpsi = detail::eval_analytic(s, x, t, 1);
    const Complex d2psi = detail::eval_analytic(s, x, t, 2);
    const double den = std::norm(psi);
    if (den < node_floor_rel * density_scale(s)) throw NodeSingularity(x, t);
    const double gs = std::imag(std::conj(psi) * dpsi) / den;
    return (std::imag(std::conj(psi) * d2psi) - 2.0 * gs * std::real(std::conj(psi) * dpsi)) / den;
}

// Closed form of the two-wave phase-gradient (the interference formula):
//   grad S = [k1 + |b|^2 k2 + |b| (k1+k2) cos xi] / [1 + |b|^2 + 2 |b| cos xi]
//   xi     = (k2 - k1) x - (w2 - w1) t + delta
inline double two_wave_grad_s_closed_form(const TwoWave& tw, const DispersionModel& model,
                                          double x, double t) {
    const double w1 = multiplier(tw.k1, model), w2 = multiplier(tw.k2, model);
    const double xi = (tw.k2 - tw.k1) * x - (w2 - w1) * t + tw.rel_phase;
    const double b = tw.rel_amp, c = std::cos(xi);
    const double den = 1.0 + b * b + 2.0 * b * c;
    return (tw.k1 + b * b * tw.k2 + b * (tw.k1 + tw.k2) * c) / den;
}

// --- normalization -----------------------------------------------------------

inline WaveState normalize(WaveState s) {
    if (std::holds_alternative<PlaneWave>(s.family) || std::holds_alternative<TwoWave>(s.family))
        return s;  // non-normalizable families pass through unchanged
    if (auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        double n2 = 0.0;
        for (const auto& [n, c] : box->mode_coeffs) n2 += std::norm(c);
        if (n2 <= 0.0) throw std::invalid_argument("normalize: zero state");
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& [n, c] : box->mode_coeffs) c *= inv;
        return s;
    }
    auto* gs = std::get_if<GridState>(&s.family);
    const double nrm = discrete_norm(gs->samples, gs->grid.spacing());
    if (nrm <= 0.0) throw std::invalid_argument("normalize: zero state");
    const double inv = 1.0 / nrm;
    for (auto& v : gs->samples) v *= inv;
    return s;
}

// --- grid sampling -----------------------------------------------------------

// Sample an analytic state onto a periodic grid.  Box states require a grid
// of twice the box length and are extended oddly, psi(2L - x) = -psi(x); on
// that circle the state is smooth and the sine modes sit exactly on the
// dual lattice.
inline GridState sample_on_grid(const WaveState& s, const SpectralGrid& grid, double t) {
    if (const auto* gs = std::get_if<GridState>(&s.family)) {
        if (gs->grid.point_count != grid.point_count ||
            gs->grid.domain_length != grid.domain_length)
            throw std::invalid_argument("sample_on_grid: grid mismatch for grid state");
        return *gs;
    }
    GridState out;
    out.grid = grid;
    out.time = t;
    out.samples.resize(grid.point_count);
    if (const auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        const double L = box->box_length;
        if (std::abs(grid.domain_length - 2.0 * L) > 1e-9 * L)
            throw std::invalid_argument(
                "sample_on_grid: box states need a periodic grid of length 2 L (odd extension)");
        for (int j = 0; j < grid.point_count; ++j) {
            const double x = grid.positions[j];
            out.samples[j] = x <= L ? detail::eval_analytic(s, x, t, 0)
                                    : -detail::eval_analytic(s, 2.0 * L - x, t, 0);
        }
        return out;
    }
    // plane/two-wave families must be commensurate with the grid period
    auto check_mode = [&](double k) {
        const double cycles = k * grid.domain_length / (2.0 * std::numbers::pi);
        if (std::abs(cycles - std::round(cycles)) > 1e-9)
            throw std::invalid_argument("sample_on_grid: wavenumber not on the grid's dual lattice");
    };
    if (const auto* pw = std::get_if<PlaneWave>(&s.family)) check_mode(pw->wavenumber);
    if (const auto* tw = std::get_if<TwoWave>(&s.family)) {
        check_mode(tw->k1);
        check_mode(tw->k2);
    }
    for (int j = 0; j < grid.point_count; ++j)
        out.samples[j] = detail::eval_analytic(s, grid.positions[j], t, 0);
    return out;
}

// Convenience: the odd-extension grid a box state lives on.
inline SpectralGrid make_box_grid(double box_length, int point_count) {
    return make_grid(point_count, 2.0 * box_length);
}

// Slowest beat period of the state: 2 pi over the smallest nonzero gap
// between the frequencies present.  Single-frequency states return the
// phase period 2 pi / omega.
inline double characteristic_period(const WaveState& s) {
    const double two_pi = 2.0 * std::numbers::pi;
    if (const auto* pw = std::get_if<PlaneWave>(&s.family))
        return two_pi / multiplier(pw->wavenumber, s.model);
    if (const auto* tw = std::get_if<TwoWave>(&s.family)) {
        const double gap = std::abs(multiplier(tw->k2, s.model) - multiplier(tw->k1, s.model));
        return gap > 0.0 ? two_pi / gap : two_pi / multiplier(tw->k1, s.model);
    }
    if (const auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        double min_gap = 0.0;
        for (std::size_t i = 0; i < box->mode_coeffs.size(); ++i)
            for (std::size_t j = i + 1; j < box->mode_coeffs.size(); ++j) {
                const double gap =
                    std::abs(box_energy(box->mode_coeffs[j].first, box->box_length, s.model) -
                             box_energy(box->mode_coeffs[i].first, box->box_length, s.model));
                if (gap > 0.0 && (min_gap == 0.0 || gap < min_gap)) min_gap = gap;
            }
        if (min_gap > 0.0) return two_pi / min_gap;
        return two_pi / box_energy(box->mode_coeffs.front().first, box->box_length, s.model);
    }
    const auto* gs = std::get_if<GridState>(&s.family);
    const double dk = 2.0 * std::numbers::pi / gs->grid.domain_length;
    return two_pi / (multiplier(dk, s.model) - multiplier(0.0, s.model));
}

}  // namespace rbm
