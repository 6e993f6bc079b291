#pragma once
// Statistical layer: position sampling, density transport along the
// Bohmian flow, and deviation of the transported density from |psi_t|^2.
//
// Two independent density estimators run side by side: a histogram of
// particle positions and the log-density carried along characteristics by
// d(ln rho)/dt = -dv/dx.  Nonrelativistically (N = 1) both track |psi_t|^2
// to sampling noise; with the exact dispersion they drift away from it,
// which is the quantity this module measures.
//
// Randomness is counter-based (one splitmix64 stream per particle index),
// so serial and threaded runs produce bit-identical ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rbm/bohm.hpp"
#include "rbm/dispersion.hpp"
#include "rbm/states.hpp"

namespace rbm {

// ---------------------------------------------------------------------------
// Deterministic per-index uniforms
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// i-th uniform in [0,1) of the stream identified by seed
inline double uniform01(std::uint64_t seed, std::uint64_t i) {
    const std::uint64_t z = splitmix64(seed ^ splitmix64(i + 1));
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Inverse-CDF sampling from a tabulated density
// ---------------------------------------------------------------------------

// Density known at uniformly spaced nodes x_j = x_min + j * spacing; the
// cumulative is the trapezoid of the table and is inverted piecewise
// linearly.
struct SampledDensity {
    double x_min = 0.0;
    double spacing = 0.0;
    std::vector<double> values;
};

inline SampledDensity tabulate_density(const WaveState& state, double t, double x_min,
                                       double x_max, int points) {
    if (points < 2 || !(x_max > x_min)) throw std::invalid_argument("tabulate_density: bad range");
    SampledDensity d;
    d.x_min = x_min;
    d.spacing = (x_max - x_min) / (points - 1);
    d.values.resize(points);
    for (int j = 0; j < points; ++j)
        d.values[j] = std::norm(eval_psi(state, x_min + j * d.spacing, t));
    return d;
}

inline std::vector<double> sample_from_quantiles(const SampledDensity& density,
                                                 const std::vector<double>& quantiles) {
    const int n = static_cast<int>(density.values.size());
    if (n < 2) throw std::invalid_argument("sample_from_density: need at least two nodes");
    std::vector<double> cdf(n, 0.0);
    for (int j = 0; j + 1 < n; ++j) {
        const double a = density.values[j], b = density.values[j + 1];
        if (a < 0.0 || b < 0.0)
            throw std::invalid_argument("sample_from_density: negative density value");
        cdf[j + 1] = cdf[j] + 0.5 * (a + b) * density.spacing;
    }
    const double total = cdf.back();
    if (!(total > 0.0)) throw std::invalid_argument("sample_from_density: zero total mass");

    std::vector<double> out(quantiles.size());
    for (std::size_t i = 0; i < quantiles.size(); ++i) {
        const double target = quantiles[i] * total;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        int j = static_cast<int>(it - cdf.begin()) - 1;
        j = std::clamp(j, 0, n - 2);
        const double seg = cdf[j + 1] - cdf[j];
        const double frac = seg > 0.0 ? (target - cdf[j]) / seg : 0.0;
        out[i] = density.x_min + (j + frac) * density.spacing;
    }
    return out;
}

inline std::vector<double> sample_from_density(const SampledDensity& density, int count,
                                               std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("sample_from_density: negative count");
    std::vector<double> q(count);
    for (int i = 0; i < count; ++i) q[i] = detail::uniform01(seed, static_cast<std::uint64_t>(i));
    return sample_from_quantiles(density, q);
}

// ---------------------------------------------------------------------------
// Ensemble transport
// ---------------------------------------------------------------------------

struct EnsembleSnapshot {
    double time = 0.0;
    std::vector<double> positions;
    std::vector<double> log_density;
    std::vector<std::uint8_t> excluded;  // sticky: trajectory truncated at a node
};

struct EnsembleRun {
    std::uint64_t seed = 0;
    int particle_count = 0;
    DispersionModel model = DispersionModel::exact();
    std::string state_ref;
    std::vector<EnsembleSnapshot> snapshots;

    double excluded_fraction(std::size_t snapshot_index) const {
        const auto& s = snapshots.at(snapshot_index);
        if (s.excluded.empty()) return 0.0;
        double c = 0.0;
        for (auto e : s.excluded) c += e != 0;
        return c / static_cast<double>(s.excluded.size());
    }
};

struct TransportOptions {
    std::vector<double> snapshot_times;  // must be increasing, first >= t0
    double dt_min = 1e-6;
    int threads = 1;
    std::uint64_t seed = 0;       // recorded in the run
    std::string state_ref = "";   // descriptive tag for the manifest
};

inline EnsembleRun transport(const std::vector<double>& positions0, const WaveState& state,
                             const DispersionModel& model, std::pair<double, double> t_span,
                             double step, const TransportOptions& opts) {
    const auto [t0, t1] = t_span;
    if (!(step > 0.0)) throw std::invalid_argument("transport: step must be positive");
    if (!(t1 >= t0)) throw std::invalid_argument("transport: need t1 >= t0");

    std::vector<double> times = opts.snapshot_times;
    if (times.empty()) times = {t0, t1};
    if (times.front() > t0 + 1e-12) times.insert(times.begin(), t0);

    const int n = static_cast<int>(positions0.size());
    EnsembleRun run;
    run.seed = opts.seed;
    run.particle_count = n;
    run.model = model;
    run.state_ref = opts.state_ref;
    run.snapshots.resize(times.size());
    for (std::size_t s = 0; s < times.size(); ++s) {
        run.snapshots[s].time = times[s];
        run.snapshots[s].positions.assign(n, 0.0);
        run.snapshots[s].log_density.assign(n, 0.0);
        run.snapshots[s].excluded.assign(n, 0);
    }

    const VelocityField vf(state, model);

    auto run_block = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            double x = positions0[i];
            double lnrho = std::log(std::max(std::norm(eval_psi(state, x, t0)), 1e-300));
            bool excluded = false;
            double t = t0;
            for (std::size_t s = 0; s < times.size(); ++s) {
                const double target = times[s];
                while (!excluded && t < target - 1e-13 * (1.0 + std::abs(target))) {
                    const double remaining = target - t;
                    double h = std::min(step, remaining);
                    bool advanced = false;
                    while (h >= opts.dt_min) {
                        double xn = x, ln = lnrho;
                        if (detail::rk4_step(vf, xn, ln, t, h, true)) {
                            x = xn;
                            lnrho = ln;
                            t += h;
                            advanced = true;
                            break;
                        }
                        h *= 0.5;
                    }
                    if (!advanced) excluded = true;  // freeze at last good point
                }
                run.snapshots[s].positions[i] = x;
                run.snapshots[s].log_density[i] = lnrho;
                run.snapshots[s].excluded[i] = excluded ? 1 : 0;
                if (excluded) t = target;
            }
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1 || n < 2048) {
        run_block(0, n);
    } else {
        // fixed-size blocks; identical work decomposition for any thread count
        constexpr int block = 4096;
        std::vector<std::pair<int, int>> blocks;
        for (int b = 0; b < n; b += block) blocks.emplace_back(b, std::min(b + block, n));
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mtx;
        for (int w = 0; w < threads; ++w)
            pool.emplace_back([&]() {
                for (;;) {
                    std::size_t mine;
                    {
                        std::lock_guard<std::mutex> lk(mtx);
                        if (next >= blocks.size()) return;
                        mine = next++;
                    }
                    run_block(blocks[mine].first, blocks[mine].second);
                }
            });
        for (auto& th : pool) th.join();
    }
    return run;
}

// ---------------------------------------------------------------------------
// Born deviation (total-variation distance)
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<double, double> state_domain(const WaveState& state) {
    if (const auto* box = std::get_if<BoxSuperposition>(&state.family))
        return {0.0, box->box_length};
    if (const auto* gs = std::get_if<GridState>(&state.family))
        return {0.0, gs->grid.domain_length};
    throw std::invalid_argument("born_deviation: state has no finite domain");
}

// probability mass of |psi(.,t)|^2 in each bin (composite Simpson, then
// normalized over the whole domain)
inline std::vector<double> born_bin_masses(const WaveState& state, double t, double a, double b,
                                           int bins) {
    const int panels = 16;  // per bin, even
    std::vector<double> mass(bins, 0.0);
    const double w = (b - a) / bins;
    for (int i = 0; i < bins; ++i) {
        const double lo = a + i * w;
        const double h = w / panels;
        double s = 0.0;
        for (int j = 0; j <= panels; ++j) {
            const double x = lo + j * h;
            const double f = std::norm(eval_psi(state, std::min(x, b), t));
            const double c = (j == 0 || j == panels) ? 1.0 : (j % 2 ? 4.0 : 2.0);
            s += c * f;
        }
        mass[i] = s * h / 3.0;
    }
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(total > 0.0)) throw std::runtime_error("born_bin_masses: zero mass");
    for (auto& m : mass) m /= total;
    return mass;
}

}  // namespace detail

// epsilon(t) = (1/2) sum_bins | hist_b - P_b |, both normalized; excluded
// particles are left out of the histogram.
inline double born_deviation(const EnsembleRun& run, const WaveState& state, double t, int bins) {
    if (bins < 1) throw std::invalid_argument("born_deviation: need at least one bin");
    const EnsembleSnapshot* snap = nullptr;
    for (const auto& s : run.snapshots)
        if (std::abs(s.time - t) <= 1e-9 * (1.0 + std::abs(t))) snap = &s;
    if (!snap) throw std::invalid_argument("born_deviation: time not among run snapshots");
    if (snap->positions.empty()) throw std::invalid_argument("born_deviation: empty snapshot");

    const auto [a, b] = detail::state_domain(state);
    std::vector<double> counts(bins, 0.0);
    double n_used = 0.0;
    for (std::size_t i = 0; i < snap->positions.size(); ++i) {
        if (!snap->excluded.empty() && snap->excluded[i]) continue;
        const double x = snap->positions[i];
        int bin = static_cast<int>((x - a) / (b - a) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        counts[bin] += 1.0;
        n_used += 1.0;
    }
    if (n_used == 0.0) throw std::runtime_error("born_deviation: every particle excluded");

    const std::vector<double> born = detail::born_bin_masses(state, t, a, b, bins);
    double tv = 0.0;
    for (int i = 0; i < bins; ++i) tv += std::abs(counts[i] / n_used - born[i]);
    return 0.5 * tv;
}

// Density estimate from the log-density carried along characteristics:
// per-bin mean of exp(ln rho) over the particles landing in the bin,
// normalized like a density.  Cross-check for the histogram estimator.
inline double characteristics_deviation(const EnsembleRun& run, const WaveState& state, double t,
                                        int bins) {
    const EnsembleSnapshot* snap = nullptr;
    for (const auto& s : run.snapshots)
        if (std::abs(s.time - t) <= 1e-9 * (1.0 + std::abs(t))) snap = &s;
    if (!snap) throw std::invalid_argument("characteristics_deviation: time not among snapshots");

    const auto [a, b] = detail::state_domain(state);
    std::vector<double> sum(bins, 0.0), cnt(bins, 0.0);
    for (std::size_t i = 0; i < snap->positions.size(); ++i) {
        if (!snap->excluded.empty() && snap->excluded[i]) continue;
        int bin = static_cast<int>((snap->positions[i] - a) / (b - a) * bins);
        bin = std::clamp(bin, 0, bins - 1);
        sum[bin] += std::exp(snap->log_density[i]);
        cnt[bin] += 1.0;
    }
    std::vector<double> rho(bins, 0.0);
    double total = 0.0;
    const double w = (b - a) / bins;
    for (int i = 0; i < bins; ++i) {
        rho[i] = cnt[i] > 0.0 ? sum[i] / cnt[i] : 0.0;
        total += rho[i] * w;
    }
    if (!(total > 0.0)) throw std::runtime_error("characteristics_deviation: zero density");
    const std::vector<double> born = detail::born_bin_masses(state, t, a, b, bins);
    double tv = 0.0;
    for (int i = 0; i < bins; ++i) tv += std::abs(rho[i] * w / total - born[i]);
    return 0.5 * tv;
}

// ---------------------------------------------------------------------------
// Continuity defect of |psi|^2
// ---------------------------------------------------------------------------

// D(x,t) = d|psi|^2/dt + d(|psi|^2 v)/dx with d|psi|^2/dt taken from the
// imaginary part of the dispersion split, 2 Im(conj(psi) H psi).  At N = 1
// this vanishes identically (the nonrelativistic continuity equation); for
// the exact model it is the local rate at which |psi|^2 fails to be
// transported by the guidance flow.
//
// The flux divergence is expanded by the product rule,
//   d(rho v)/dx = v drho/dx + rho v'(p) dp/dx,
// with every psi-derivative spectral and the ratios formed pointwise.  At
// N = 1 the expansion cancels d|psi|^2/dt to rounding; a spectral
// derivative of the assembled (rational) flux field would instead leak
// node-pocket errors across the whole grid.
inline MaskedField continuity_defect(const WaveState& state, double t, const SpectralGrid& grid,
                                     const DispersionModel& model) {
    const GridState gs = sample_at(state, grid, t);
    const int n = grid.point_count;

    const std::vector<Complex> hpsi = apply_hamiltonian(gs.samples, grid, model);
    const std::vector<Complex> dpsi = detail::spectral_derivative_c(gs.samples, grid);
    const std::vector<Complex> d2psi = detail::spectral_derivative_c(dpsi, grid);

    std::vector<double> density(n);
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        density[i] = std::norm(gs.samples[i]);
        dmax = std::max(dmax, density[i]);
    }
    const double floor = node_floor_rel * dmax;

    MaskedField out;
    out.values.assign(n, 0.0);
    out.valid.resize(n);
    for (int i = 0; i < n; ++i) {
        out.valid[i] = density[i] >= floor ? 1 : 0;
        if (!out.valid[i]) continue;
        const Complex pc = std::conj(gs.samples[i]);
        const double ddt = 2.0 * std::imag(pc * hpsi[i]);
        const double im_d = std::imag(pc * dpsi[i]);
        const double re_d = std::real(pc * dpsi[i]);
        const double p = im_d / density[i];
        const double dp_dx = (std::imag(pc * d2psi[i]) - 2.0 * p * re_d) / density[i];
        const double drho_dx = 2.0 * re_d;
        out.values[i] = ddt + guidance_velocity(p, model) * drho_dx +
                        density[i] * guidance_slope(p, model) * dp_dx;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Equivariance residual
// ---------------------------------------------------------------------------

// Candidate density functional rho[R, S]: either the analytic family
// c * R^alpha or an arbitrary tabulated function with finite-difference
// functional derivatives.
struct DensityCandidate {
    enum class Form { PowerLaw, Tabulated };
    Form form = Form::PowerLaw;
    double c = 1.0;
    double alpha = 2.0;
    std::function<double(double, double)> table;  // rho(R, S)

    static DensityCandidate power_law(double c, double alpha) {
        DensityCandidate d;
        d.form = Form::PowerLaw;
        d.c = c;
        d.alpha = alpha;
        return d;
    }
    static DensityCandidate tabulated(std::function<double(double, double)> f) {
        DensityCandidate d;
        d.form = Form::Tabulated;
        d.table = std::move(f);
        return d;
    }
};

// Left side of the transported-density equation for the candidate:
//   (dR/dt + v dR/dx) drho/dR + (dS/dt + v dS/dx) drho/dS + rho dv/dx
// with dR/dt and dS/dt from the dispersion split (R eta and -zeta).  A
// vanishing residual means the candidate is equivariant under this model.
// dv/dx is assembled pointwise as v'(p) dp/dx from spectral psi-derivatives
// for the same reason as in continuity_defect.
inline MaskedField equivariance_residual(const DensityCandidate& cand, const WaveState& state,
                                         double t, const SpectralGrid& grid,
                                         const DispersionModel& model) {
    if (cand.form == DensityCandidate::Form::Tabulated && !cand.table)
        throw std::invalid_argument("equivariance_residual: empty candidate");

    const GridState gs = sample_at(state, grid, t);
    const int n = grid.point_count;
    const std::vector<Complex> hpsi = apply_hamiltonian(gs.samples, grid, model);
    const std::vector<Complex> dpsi = detail::spectral_derivative_c(gs.samples, grid);
    const std::vector<Complex> d2psi = detail::spectral_derivative_c(dpsi, grid);

    std::vector<double> density(n);
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        density[i] = std::norm(gs.samples[i]);
        dmax = std::max(dmax, density[i]);
    }
    const double floor = node_floor_rel * dmax;

    MaskedField out;
    out.values.assign(n, 0.0);
    out.valid.resize(n);
    for (int i = 0; i < n; ++i) {
        out.valid[i] = density[i] >= floor ? 1 : 0;
        if (!out.valid[i]) continue;
        const Complex pc = std::conj(gs.samples[i]);
        const double im_d = std::imag(pc * dpsi[i]);
        const double re_d = std::real(pc * dpsi[i]);
        const double p = im_d / density[i];           // dS/dx
        const double v = guidance_velocity(p, model);
        const double dp_dx = (std::imag(pc * d2psi[i]) - 2.0 * p * re_d) / density[i];
        const double dv_dx = guidance_slope(p, model) * dp_dx;
        const double R = std::sqrt(density[i]);
        const double dR_dx = re_d / R;  // d|psi|^2/dx / (2R) with d|psi|^2/dx = 2 re_d
        const Complex hr = pc * hpsi[i];
        const double zeta = hr.real() / density[i];
        const double eta = hr.imag() / density[i];
        const double dR_dt = R * eta;
        const double dS_dt = -zeta;

        double rho, drho_dR, drho_dS;
        if (cand.form == DensityCandidate::Form::PowerLaw) {
            rho = cand.c * std::pow(R, cand.alpha);
            drho_dR = cand.c * cand.alpha * std::pow(R, cand.alpha - 1.0);
            drho_dS = 0.0;
        } else {
            const double S = std::arg(gs.samples[i]);
            const double hR = 1e-6 * std::max(R, 1e-3), hS = 1e-6;
            rho = cand.table(R, S);
            if (!std::isfinite(rho))
                throw std::domain_error("equivariance_residual: candidate undefined at (R,S)");
            drho_dR = (cand.table(R + hR, S) - cand.table(R - hR, S)) / (2.0 * hR);
            drho_dS = (cand.table(R, S + hS) - cand.table(R, S - hS)) / (2.0 * hS);
        }
        out.values[i] = (dR_dt + v * dR_dx) * drho_dR + (dS_dt + v * p) * drho_dS + rho * dv_dx;
    }
    return out;
}

}  // namespace rbm
