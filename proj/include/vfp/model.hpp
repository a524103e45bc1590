/*
   Copyright 2026 The vfpkit Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfp/errors.hpp"
#include "vfp/noise.hpp"
#include "vfp/parallel.hpp"
#include "vfp/potential.hpp"

namespace vfp {

/// Mean-field kinetic model: exterior potential V, even interaction W,
/// friction gamma and noise sigma in dimension d, with the curvature
/// constants the convergence theory needs.
struct ModelSpec {
    std::size_t d = 1;
    double gamma = 1.0;
    double sigma = 1.0;
    Potential V;
    Potential W;
    double c1 = 0.0;        ///< inf of the smallest eigenvalue of Hess V
    double c2 = 0.0;        ///< sup of the negative part of Hess W
    double hessV_sup = 0.0; ///< operator-norm sup of Hess V
    double hessW_sup = 0.0; ///< operator-norm sup of Hess W

    bool is_quadratic() const { return V.is_quadratic() && W.is_quadratic(); }

    /// c1 - 2 c2, the uniform convexity of U_N.
    double convexity() const { return c1 - 2.0 * c2; }
};

/// Validates the model and fills in its curvature constants.
inline ModelSpec build_model(std::size_t d, double gamma, double sigma, Potential V, Potential W) {
    if (d == 0) throw ModelError("dimension must be positive");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ModelError("gamma must be > 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ModelError("sigma must be > 0");

    ModelSpec model{d, gamma, sigma, std::move(V), std::move(W)};
    const CurvatureRange v_range = model.V.curvature_range(d);
    const CurvatureRange w_range = model.W.curvature_range(d);
    model.c1 = v_range.min_eigenvalue;
    model.hessV_sup = v_range.sup_norm();
    model.c2 = std::max(0.0, -w_range.min_eigenvalue);
    model.hessW_sup = w_range.sup_norm();

    if (!(model.c1 > 0.0))
        throw ModelError("exterior potential " + model.V.describe() + " is not strictly convex (c1 = " +
                         std::to_string(model.c1) + ")");
    if (!(model.c2 < 0.5 * model.c1))
        throw ModelError("interaction too concave: c2 = " + std::to_string(model.c2) +
                         " must be < c1/2 = " + std::to_string(0.5 * model.c1));
    return model;
}

/// Positions and velocities of N particles in R^d, stored particle-major.
struct PhaseState {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> x;
    std::vector<double> y;
    double t = 0.0;

    PhaseState() = default;
    PhaseState(std::size_t n_, std::size_t d_) : n(n_), d(d_), x(n_ * d_, 0.0), y(n_ * d_, 0.0) {}

    std::span<double> position(std::size_t i) { return {x.data() + i * d, d}; }
    std::span<const double> position(std::size_t i) const { return {x.data() + i * d, d}; }
    std::span<double> velocity(std::size_t i) { return {y.data() + i * d, d}; }
    std::span<const double> velocity(std::size_t i) const { return {y.data() + i * d, d}; }

    bool is_finite() const {
        auto finite = [](double v) { return std::isfinite(v); };
        return std::all_of(x.begin(), x.end(), finite) && std::all_of(y.begin(), y.end(), finite) &&
               std::isfinite(t);
    }

    void validate() const {
        if (x.size() != n * d || y.size() != n * d)
            throw std::invalid_argument("phase state arrays do not match n x d");
        if (!is_finite()) throw NumericalError("phase state has non-finite entries");
    }
};

/// Product Gaussian initial law m_0 with the same moments per coordinate.
struct InitialLaw {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double var_x = 1.0;
    double var_y = 1.0;
};

/// Draws N i.i.d. particles from `law`; particle i only reads addresses of i,
/// so a prefix of a larger draw equals a smaller draw.
inline PhaseState sample_initial_state(std::size_t n, std::size_t d, const InitialLaw& law,
                                       const NoiseStream& stream) {
    PhaseState state(n, d);
    const double sx = std::sqrt(law.var_x), sy = std::sqrt(law.var_y);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            state.x[i * d + c] = law.mean_x + sx * stream.normal(i, 0, c);
            state.y[i * d + c] = law.mean_y + sy * stream.normal(i, 0, d + c);
        }
    }
    return state;
}

namespace detail {

inline void centroid(std::span<const double> x, std::size_t n, std::size_t d, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) out[c] += x[i * d + c];
    for (std::size_t c = 0; c < d; ++c) out[c] /= static_cast<double>(n);
}

} // namespace detail

/// Interaction part (1/N) sum_j grad W(x_i - x_j) for every particle.
/// Quadratic W uses b (x_i - centroid); the identically-zero W writes zeros.
inline void interaction_forces(const ModelSpec& model, std::span<const double> x, std::size_t n,
                               std::span<double> out, std::size_t threads = 1) {
    const std::size_t d = model.d;
    if (model.W.is_zero()) {
        std::fill(out.begin(), out.begin() + n * d, 0.0);
        return;
    }
    if (model.W.is_quadratic()) {
        const double b = model.W.quadratic_coefficient();
        std::vector<double> bar(d);
        detail::centroid(x, n, d, bar);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] = b * (x[i * d + c] - bar[c]);
        return;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<double> diff(d);
        std::span<double> fi = out.subspan(i * d, d);
        std::fill(fi.begin(), fi.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = x[i * d + c] - x[j * d + c];
            model.W.add_gradient(diff, inv_n, fi);
        }
    });
}

/// grad V(x_i) + (1/N) sum_j grad W(x_i - x_j) for all particles (j = i included).
inline void mean_field_forces(const ModelSpec& model, std::span<const double> x, std::size_t n,
                              std::span<double> out, std::size_t threads = 1) {
    const std::size_t d = model.d;
    interaction_forces(model, x, n, out, threads);
    for (std::size_t i = 0; i < n; ++i) model.V.add_gradient(x.subspan(i * d, d), 1.0, out.subspan(i * d, d));
}

inline std::vector<double> mean_field_forces(const ModelSpec& model, const PhaseState& state,
                                             std::size_t threads = 1) {
    std::vector<double> out(state.n * state.d);
    mean_field_forces(model, state.x, state.n, out, threads);
    return out;
}

/// Force on particle i alone; same arithmetic as the batch path.
inline std::vector<double> mean_field_force(const ModelSpec& model, const PhaseState& state, std::size_t i) {
    if (i >= state.n) throw std::out_of_range("particle index out of range");
    const std::size_t d = model.d;
    std::vector<double> out(d, 0.0);
    if (model.W.is_quadratic()) {
        if (!model.W.is_zero()) {
            const double b = model.W.quadratic_coefficient();
            std::vector<double> bar(d);
            detail::centroid(state.x, state.n, d, bar);
            for (std::size_t c = 0; c < d; ++c) out[c] = b * (state.x[i * d + c] - bar[c]);
        }
    } else {
        std::vector<double> diff(d);
        const double inv_n = 1.0 / static_cast<double>(state.n);
        for (std::size_t j = 0; j < state.n; ++j) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = state.x[i * d + c] - state.x[j * d + c];
            model.W.add_gradient(diff, inv_n, out);
        }
    }
    model.V.add_gradient(state.position(i), 1.0, out);
    return out;
}

/// U_N(x) = sum_i V(x_i) + (1/2N) sum_{i,j} W(x_i - x_j).
inline double un_potential(const ModelSpec& model, std::span<const double> x, std::size_t n) {
    const std::size_t d = model.d;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += model.V.value(x.subspan(i * d, d));
    if (model.W.is_zero()) return total;
    if (model.W.is_quadratic()) {
        std::vector<double> bar(d);
        detail::centroid(x, n, d, bar);
        double spread = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) spread += (x[i * d + c] - bar[c]) * (x[i * d + c] - bar[c]);
        return total + 0.5 * model.W.quadratic_coefficient() * spread;
    }
    std::vector<double> diff(d);
    double pair = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = x[i * d + c] - x[j * d + c];
            pair += model.W.value(diff);
        }
    return total + pair / (2.0 * static_cast<double>(n));
}

/// (Hess U_N(x) u)_i = Hess V(x_i) u_i + (1/N) sum_j Hess W(x_i - x_j)(u_i - u_j).
inline void un_hessian_vector(const ModelSpec& model, std::span<const double> x, std::span<const double> u,
                              std::size_t n, std::span<double> out) {
    const std::size_t d = model.d;
    std::vector<double> diff(d), du(d), tmp(d);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::span<double> oi = out.subspan(i * d, d);
        model.V.hessian_vector(x.subspan(i * d, d), u.subspan(i * d, d), oi);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d; ++c) {
                diff[c] = x[i * d + c] - x[j * d + c];
                du[c] = u[i * d + c] - u[j * d + c];
            }
            model.W.hessian_vector(diff, du, tmp);
            for (std::size_t c = 0; c < d; ++c) oi[c] += inv_n * tmp[c];
        }
    }
}

struct HessianProbeReport {
    double min_quotient = std::numeric_limits<double>::infinity();
    double max_quotient = -std::numeric_limits<double>::infinity();
    std::size_t trials = 0;
};

/// Extreme Rayleigh quotients u . Hess U_N(x) u over random (x, |u| = 1).
/// Positions are drawn i.i.d. N(0, spread^2) per coordinate.
inline HessianProbeReport un_hessian_bound_probe(const ModelSpec& model, std::size_t trials, std::uint64_t seed,
                                                 std::size_t n_particles = 8, double spread = 2.0) {
    if (trials == 0) throw std::invalid_argument("trials must be >= 1");
    const std::size_t dim = n_particles * model.d;
    const NoiseStream stream = NoiseStream(seed).substream(static_cast<std::uint64_t>(StreamPurpose::Probe));
    std::vector<double> x(dim), u(dim), hu(dim);
    HessianProbeReport report;
    report.trials = trials;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        double norm = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = spread * stream.normal(k, trial, 0);
            u[k] = stream.normal(k, trial, 1);
            norm += u[k] * u[k];
        }
        norm = std::sqrt(norm);
        for (double& v : u) v /= norm;
        un_hessian_vector(model, x, u, n_particles, hu);
        double q = 0.0;
        for (std::size_t k = 0; k < dim; ++k) q += u[k] * hu[k];
        report.min_quotient = std::min(report.min_quotient, q);
        report.max_quotient = std::max(report.max_quotient, q);
    }
    return report;
}

} // namespace vfp
