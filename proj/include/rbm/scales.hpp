#pragma once
// Physical scales and Compton-unit nondimensionalization.
//
// Every computation inside the library is done in Compton units:
//   length   in l_c  = hbar / (m0 c)
//   time     in t_c  = hbar / (m0 c^2)
//   energy   in m0 c^2
//   momentum in m0 c
// so that hbar = c = m0 = 1 everywhere downstream.  Dimensional values
// enter and leave only through rescale() at the I/O boundary.

#include <cmath>
#include <stdexcept>

namespace rbm {

enum class QuantityKind { Length, Time, Energy, Momentum };
enum class RescaleDirection { ToDimensionless, ToDimensional };

struct Scales {
    double rest_mass;       // m0
    double light_speed;     // c
    double planck_reduced;  // hbar

    Scales(double m0, double c, double hbar)
        : rest_mass(m0), light_speed(c), planck_reduced(hbar) {
        if (!(m0 > 0.0) || !(c > 0.0) || !(hbar > 0.0))
            throw std::invalid_argument("Scales: all scales must be strictly positive");
        if (!std::isfinite(m0) || !std::isfinite(c) || !std::isfinite(hbar))
            throw std::invalid_argument("Scales: all scales must be finite");
    }

    double compton_length() const { return planck_reduced / (rest_mass * light_speed); }
    double compton_time() const { return planck_reduced / (rest_mass * light_speed * light_speed); }
    double rest_energy() const { return rest_mass * light_speed * light_speed; }
    double momentum_unit() const { return rest_mass * light_speed; }
};

inline double unit_of(QuantityKind kind, const Scales& s) {
    switch (kind) {
        case QuantityKind::Length:   return s.compton_length();
        case QuantityKind::Time:     return s.compton_time();
        case QuantityKind::Energy:   return s.rest_energy();
        case QuantityKind::Momentum: return s.momentum_unit();
    }
    throw std::invalid_argument("rescale: unknown quantity kind");
}

inline double rescale(double value, QuantityKind kind, const Scales& s, RescaleDirection dir) {
    const double u = unit_of(kind, s);
    return dir == RescaleDirection::ToDimensionless ? value / u : value * u;
}

}  // namespace rbm
