#pragma once
// Uniform periodic 1D grid with its wavenumber lattice.
//
// Positions are x_j = j * (L/N), j = 0..N-1, in Compton lengths.  The
// wavenumber array follows standard FFT ordering {0, 1, .., N/2, -N/2+1,
// .., -1} * (2*pi/L); the Nyquist mode appears once with positive sign.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rbm {

struct SpectralGrid {
    int point_count = 0;
    double domain_length = 0.0;
    std::vector<double> positions;
    std::vector<double> wavenumbers;

    double spacing() const { return domain_length / point_count; }
    double nyquist() const { return std::numbers::pi * point_count / domain_length; }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline SpectralGrid make_grid(int point_count, double domain_length) {
    if (!is_power_of_two(point_count) || point_count < 8)
        throw std::invalid_argument("make_grid: point_count must be a power of two >= 8");
    if (!(domain_length > 0.0) || !std::isfinite(domain_length))
        throw std::invalid_argument("make_grid: domain_length must be positive and finite");

    SpectralGrid g;
    g.point_count = point_count;
    g.domain_length = domain_length;
    g.positions.resize(point_count);
    g.wavenumbers.resize(point_count);
    const double dx = domain_length / point_count;
    const double dk = 2.0 * std::numbers::pi / domain_length;
    for (int j = 0; j < point_count; ++j) {
        g.positions[j] = j * dx;
        g.wavenumbers[j] = (j <= point_count / 2 ? j : j - point_count) * dk;
    }
    return g;
}

// Discrete L2 norm with the dx quadrature weight: sqrt(dx * sum |f_j|^2).
inline double discrete_norm(const std::vector<std::complex<double>>& f, double dx) {
    double s = 0.0;
    for (const auto& v : f) s += std::norm(v);
    return std::sqrt(dx * s);
}

}  // namespace rbm
