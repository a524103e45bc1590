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
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfp/errors.hpp"
#include "vfp/gaussian.hpp"
#include "vfp/model.hpp"
#include "vfp/noise.hpp"
#include "vfp/parallel.hpp"
#include "vfp/transport.hpp"

namespace vfp {

/// Position marginal of the nonlinear equilibrium on a uniform midpoint grid.
struct FixedPointDensity {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> values; ///< density at the cell midpoints
    std::size_t iterations = 0;
    double residual = 0.0;      ///< L1 change of the last iteration
    std::vector<double> residual_history;

    std::size_t points() const { return values.size(); }
    double spacing() const { return (hi - lo) / static_cast<double>(values.size()); }
    double x(std::size_t k) const { return lo + (static_cast<double>(k) + 0.5) * spacing(); }

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * spacing();
    }
    double mean() const {
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += x(k) * values[k];
        return s * spacing();
    }
    double variance() const {
        const double m = mean();
        double s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += (x(k) - m) * (x(k) - m) * values[k];
        return s * spacing();
    }
    /// max_k |nu(x_k) - nu(-x_k)|, meaningful on a grid symmetric about 0.
    double symmetry_residual() const {
        double r = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            r = std::max(r, std::abs(values[k] - values[values.size() - 1 - k]));
        return r;
    }
    /// CDF at the cell edges lo + k h, k = 0..points.
    std::vector<double> edge_cdf() const {
        std::vector<double> F(values.size() + 1, 0.0);
        const double h = spacing();
        for (std::size_t k = 0; k < values.size(); ++k) F[k + 1] = F[k] + values[k] * h;
        return F;
    }
};

struct FixedPointOptions {
    std::size_t points = 4096;
    std::optional<double> half_width; ///< default 10 / sqrt(c1)
    double tol = 1e-9;
    double damping = 0.5;
    std::size_t max_iterations = 10000;
    std::size_t threads = 1;
};

namespace detail {

inline void normalize(std::vector<double>& v, double h) {
    double s = 0.0;
    for (double x : v) s += x;
    s *= h;
    for (double& x : v) x /= s;
}

/// One application of nu -> normalize(exp(-beta (V + W * nu))).
class FixedPointMap {
public:
    FixedPointMap(const ModelSpec& model, double lo, double h, std::size_t p, std::size_t threads)
        : p_(p), h_(h), threads_(threads), beta_(2.0 * model.gamma / (model.sigma * model.sigma)), v_(p),
          w_(model.W.is_zero() ? 0 : 2 * p - 1) {
        for (std::size_t k = 0; k < p; ++k) {
            const std::array<double, 1> xk{lo + (static_cast<double>(k) + 0.5) * h};
            v_[k] = model.V.value(xk);
        }
        // Toeplitz kernel: w_[m + p - 1] = W(m h)
        for (std::size_t m = 0; m < w_.size(); ++m) {
            const std::array<double, 1> r{(static_cast<double>(m) - static_cast<double>(p - 1)) * h};
            w_[m] = model.W.value(r);
        }
    }

    std::vector<double> operator()(const std::vector<double>& nu) const {
        std::vector<double> phase(v_);
        if (!w_.empty()) {
            parallel_for(p_, threads_, [&](std::size_t k) {
                const double* row = w_.data() + (p_ - 1 + k);
                double s = 0.0;
                for (std::size_t j = 0; j < p_; ++j) s += *(row - j) * nu[j];
                phase[k] += s * h_;
            });
        }
        const double floor = *std::min_element(phase.begin(), phase.end());
        std::vector<double> out(p_);
        for (std::size_t k = 0; k < p_; ++k) out[k] = std::exp(-beta_ * (phase[k] - floor));
        normalize(out, h_);
        return out;
    }

    std::vector<double> initial() const {
        const double floor = *std::min_element(v_.begin(), v_.end());
        std::vector<double> out(p_);
        for (std::size_t k = 0; k < p_; ++k) out[k] = std::exp(-beta_ * (v_[k] - floor));
        normalize(out, h_);
        return out;
    }

private:
    std::size_t p_;
    double h_;
    std::size_t threads_;
    double beta_;
    std::vector<double> v_, w_;
};

inline double l1_change(const std::vector<double>& a, const std::vector<double>& b, double h) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
    return s * h;
}

} // namespace detail

/// Damped self-consistency iteration for the position marginal of the
/// nonlinear equilibrium in d = 1. Throws NumericalError when the L1 change
/// is still above tol after max_iterations.
inline FixedPointDensity solve_fixed_point(const ModelSpec& model, const FixedPointOptions& opt = {}) {
    if (model.d != 1) throw std::invalid_argument("solve_fixed_point supports d = 1 only");
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw std::invalid_argument("damping must lie in (0, 1]");
    if (opt.points < 2) throw std::invalid_argument("grid needs at least 2 points");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    const double half = opt.half_width.value_or(10.0 / std::sqrt(model.c1));
    if (!(half > 0.0)) throw std::invalid_argument("grid half width must be > 0");

    FixedPointDensity out;
    out.lo = -half;
    out.hi = half;
    const double h = 2.0 * half / static_cast<double>(opt.points);
    const detail::FixedPointMap map(model, out.lo, h, opt.points, opt.threads);

    std::vector<double> nu = map.initial();
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        const std::vector<double> image = map(nu);
        std::vector<double> next(nu.size());
        for (std::size_t k = 0; k < nu.size(); ++k) next[k] = (1.0 - opt.damping) * nu[k] + opt.damping * image[k];
        detail::normalize(next, h);
        out.residual = detail::l1_change(next, nu, h);
        out.iterations = it;
        out.residual_history.push_back(out.residual);
        nu = std::move(next);
        if (out.residual < opt.tol) {
            out.values = std::move(nu);
            return out;
        }
    }
    throw NumericalError("fixed point did not converge after " + std::to_string(opt.max_iterations) +
                         " iterations (residual " + std::to_string(out.residual) + ")");
}

/// L1 change under one undamped application of the map; small for a genuine
/// fixed point.
inline double fixed_point_defect(const ModelSpec& model, const FixedPointDensity& density) {
    const detail::FixedPointMap map(model, density.lo, density.spacing(), density.points(), 1);
    return detail::l1_change(map(density.values), density.values, density.spacing());
}

/// Closed-form m_inf of the quadratic model on R^{2d}, ordered [x, y].
inline GaussianLaw equilibrium_quadratic(double a, double b, double gamma, double sigma, std::size_t d) {
    if (!(a > 0.0) || !(a + b > 0.0)) throw ModelError("equilibrium needs a > 0 and a + b > 0");
    if (!(gamma > 0.0) || !(sigma > 0.0) || d == 0) throw ModelError("equilibrium needs gamma, sigma > 0 and d >= 1");
    const auto k = static_cast<Eigen::Index>(d);
    const double sv = sigma * sigma / (2.0 * gamma);
    GaussianLaw g{Eigen::VectorXd::Zero(2 * k), Eigen::MatrixXd::Zero(2 * k, 2 * k)};
    g.cov.topLeftCorner(k, k).diagonal().setConstant(sv / (a + b));
    g.cov.bottomRightCorner(k, k).diagonal().setConstant(sv);
    return g;
}

/// n i.i.d. points (x, y) of m_inf: x by inverting the piecewise-linear grid
/// CDF, y ~ N(0, sigma^2 / (2 gamma)).
inline EmpiricalCloud sample_equilibrium(const FixedPointDensity& density, double gamma, double sigma, std::size_t n,
                                         std::uint64_t seed) {
    if (density.values.empty()) throw std::invalid_argument("empty density");
    if (n == 0) throw std::invalid_argument("n must be >= 1");
    const auto F = density.edge_cdf();
    const double total = F.back(), h = density.spacing();
    const double sv = std::sqrt(sigma * sigma / (2.0 * gamma));
    const NoiseStream stream = NoiseStream(seed).substream(static_cast<std::uint64_t>(StreamPurpose::EquilibriumSample));
    EmpiricalCloud cloud(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = stream.uniform(i, 0, 0) * total;
        auto it = std::upper_bound(F.begin(), F.end(), u);
        std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - F.begin() - 1, 0));
        k = std::min(k, density.points() - 1);
        const double cell = F[k + 1] - F[k];
        const double frac = cell > 0.0 ? std::clamp((u - F[k]) / cell, 0.0, 1.0) : 0.5;
        cloud.points[2 * i] = density.lo + (static_cast<double>(k) + frac) * h;
        cloud.points[2 * i + 1] = sv * stream.normal(i, 0, 2); // block 1: independent of u
    }
    return cloud;
}

} // namespace vfp
