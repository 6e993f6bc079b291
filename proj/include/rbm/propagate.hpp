#pragma once
// Time evolution under the chosen dispersion model.
//
// Every family evolves by exact phase rotation: the free equation is
// diagonal in the mode basis, so a single step of any size is exact and
// evolution is unitary to rounding.  Grid states go through one forward /
// inverse transform per step; analytic families never touch a grid.

#include <cmath>
#include <complex>

#include "rbm/dispersion.hpp"
#include "rbm/fft.hpp"
#include "rbm/states.hpp"

namespace rbm {

inline WaveState evolve(WaveState s, double dt, Diagnostics* diag = nullptr) {
    if (!std::isfinite(dt)) throw std::domain_error("evolve: dt must be finite");
    const Complex I(0.0, 1.0);

    if (auto* pw = std::get_if<PlaneWave>(&s.family)) {
        pw->amplitude *= std::exp(-I * multiplier(pw->wavenumber, s.model) * dt);
        return s;
    }
    if (auto* tw = std::get_if<TwoWave>(&s.family)) {
        const double w1 = multiplier(tw->k1, s.model), w2 = multiplier(tw->k2, s.model);
        tw->overall *= std::exp(-I * w1 * dt);
        tw->rel_phase -= (w2 - w1) * dt;
        return s;
    }
    if (auto* box = std::get_if<BoxSuperposition>(&s.family)) {
        for (auto& [n, c] : box->mode_coeffs)
            c *= std::exp(-I * box_energy(n, box->box_length, s.model) * dt);
        return s;
    }
    auto* gs = std::get_if<GridState>(&s.family);
    if (!s.model.is_exact() && diag && gs->grid.nyquist() > 1.0)
        diag->warn("evolve: truncated dispersion applied beyond |k| <= 1 on this grid");
    fft_forward(gs->samples);
    for (int j = 0; j < gs->grid.point_count; ++j)
        gs->samples[j] *= std::exp(-I * multiplier(gs->grid.wavenumbers[j], s.model) * dt);
    fft_inverse(gs->samples);
    gs->time += dt;
    return s;
}

// Samples of the state at absolute time t on the given grid.  Analytic
// families evaluate their exact phases; grid states are phase-rotated from
// their stored instant (exact for any dt).
inline GridState sample_at(const WaveState& s, const SpectralGrid& grid, double t) {
    if (const auto* gs = std::get_if<GridState>(&s.family)) {
        if (gs->grid.point_count != grid.point_count ||
            gs->grid.domain_length != grid.domain_length)
            throw std::invalid_argument("sample_at: grid mismatch for grid state");
        if (std::abs(t - gs->time) <= 1e-14 * (1.0 + std::abs(t))) return *gs;
        WaveState shifted = evolve(s, t - gs->time);
        return std::get<GridState>(shifted.family);
    }
    return sample_on_grid(s, grid, t);
}

}  // namespace rbm
