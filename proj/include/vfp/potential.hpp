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
#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include "vfp/errors.hpp"

namespace vfp {

/// (coefficient / 2) |x|^2
struct Quadratic {
    double coefficient = 0.0;
};

/// strength * (mollifier^2 + |x|^2)^(-1/2), a smoothed Coulomb kernel.
struct MollifiedCoulomb {
    double strength = 0.0;
    double mollifier = 1.0;
};

/// Extreme Hessian eigenvalues of a radial potential over R^d.
struct CurvatureRange {
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double sup_norm() const { return std::max(std::abs(min_eigenvalue), std::abs(max_eigenvalue)); }
};

/// Radial grid used to bound the Hessian of non-quadratic potentials:
/// r in [0, 50 * mollifier], 10^5 points, endpoints included.
inline constexpr double kCurvatureGridExtent = 50.0;
inline constexpr std::size_t kCurvatureGridPoints = 100000;

/// An even, smooth potential on R^d with analytic gradient and
/// Hessian-vector product. Both shipped families are radial.
class Potential {
public:
    using Kind = std::variant<Quadratic, MollifiedCoulomb>;

    Potential() : kind_(Quadratic{0.0}) {}

    static Potential quadratic(double coefficient) {
        if (!std::isfinite(coefficient))
            throw ModelError("quadratic coefficient must be finite");
        return Potential(Quadratic{coefficient});
    }

    static Potential mollified_coulomb(double strength, double mollifier) {
        if (!(strength >= 0.0) || !std::isfinite(strength))
            throw ModelError("coulomb strength must be finite and >= 0");
        if (!(mollifier > 0.0) || !std::isfinite(mollifier))
            throw ModelError("coulomb mollifier must be > 0");
        return Potential(MollifiedCoulomb{strength, mollifier});
    }

    const Kind& kind() const { return kind_; }

    bool is_quadratic() const { return std::holds_alternative<Quadratic>(kind_); }

    /// Coefficient of a quadratic potential; throws for other families.
    double quadratic_coefficient() const {
        if (const auto* q = std::get_if<Quadratic>(&kind_)) return q->coefficient;
        throw std::logic_error("potential is not quadratic");
    }

    /// True when the potential is identically zero (no force at all).
    bool is_zero() const {
        if (const auto* q = std::get_if<Quadratic>(&kind_)) return q->coefficient == 0.0;
        return std::get<MollifiedCoulomb>(kind_).strength == 0.0;
    }

    double value(std::span<const double> x) const {
        const double r2 = squared_norm(x);
        if (const auto* q = std::get_if<Quadratic>(&kind_)) return 0.5 * q->coefficient * r2;
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        return c.strength / std::sqrt(c.mollifier * c.mollifier + r2);
    }

    void gradient(std::span<const double> x, std::span<double> out) const {
        const double scale = radial_derivative_over_r(squared_norm(x));
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = scale * x[k];
    }

    /// Accumulates `weight * gradient(x)` into out.
    void add_gradient(std::span<const double> x, double weight, std::span<double> out) const {
        const double scale = weight * radial_derivative_over_r(squared_norm(x));
        for (std::size_t k = 0; k < x.size(); ++k) out[k] += scale * x[k];
    }

    /// out = Hess(x) u
    void hessian_vector(std::span<const double> x, std::span<const double> u,
                        std::span<double> out) const {
        if (const auto* q = std::get_if<Quadratic>(&kind_)) {
            for (std::size_t k = 0; k < u.size(); ++k) out[k] = q->coefficient * u[k];
            return;
        }
        // Hess = g(r) I + h(r) x x^T with g = -s q^{-3/2}, h = 3 s q^{-5/2}
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        const double q = c.mollifier * c.mollifier + squared_norm(x);
        const double inv_sqrt = 1.0 / std::sqrt(q);
        const double g = -c.strength * inv_sqrt / q;
        const double h = 3.0 * c.strength * inv_sqrt / (q * q);
        double xu = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) xu += x[k] * u[k];
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = g * u[k] + h * xu * x[k];
    }

    /// Second derivative of the radial profile phi(r).
    double radial_second_derivative(double r) const {
        if (const auto* q = std::get_if<Quadratic>(&kind_)) return q->coefficient;
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        const double q = c.mollifier * c.mollifier + r * r;
        return c.strength * (2.0 * r * r - c.mollifier * c.mollifier) / (q * q * std::sqrt(q));
    }

    /// phi'(r) / r, the Hessian eigenvalue in directions tangential to x.
    double tangential_curvature(double r) const { return radial_derivative_over_r(r * r); }

    /// Hessian eigenvalue range over R^d. Exact for quadratics; for the
    /// Coulomb family a dense scan of the radial profile on the documented grid.
    CurvatureRange curvature_range(std::size_t dim) const {
        if (const auto* q = std::get_if<Quadratic>(&kind_))
            return {q->coefficient, q->coefficient};
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        const double extent = kCurvatureGridExtent * c.mollifier;
        CurvatureRange range{radial_second_derivative(0.0), radial_second_derivative(0.0)};
        for (std::size_t k = 0; k < kCurvatureGridPoints; ++k) {
            const double r = extent * static_cast<double>(k) / static_cast<double>(kCurvatureGridPoints - 1);
            const double radial = radial_second_derivative(r);
            range.min_eigenvalue = std::min(range.min_eigenvalue, radial);
            range.max_eigenvalue = std::max(range.max_eigenvalue, radial);
            if (dim >= 2) {
                const double tangential = tangential_curvature(r);
                range.min_eigenvalue = std::min(range.min_eigenvalue, tangential);
                range.max_eigenvalue = std::max(range.max_eigenvalue, tangential);
            }
        }
        return range;
    }

    std::string describe() const {
        if (const auto* q = std::get_if<Quadratic>(&kind_))
            return "quadratic(" + fmt_double(q->coefficient) + ")";
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        return "coulomb(" + fmt_double(c.strength) + "," + fmt_double(c.mollifier) + ")";
    }

private:
    explicit Potential(Kind kind) : kind_(kind) {}

    static double squared_norm(std::span<const double> x) {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
    }

    double radial_derivative_over_r(double r2) const {
        if (const auto* q = std::get_if<Quadratic>(&kind_)) return q->coefficient;
        const auto& c = std::get<MollifiedCoulomb>(kind_);
        const double q = c.mollifier * c.mollifier + r2;
        return -c.strength / (q * std::sqrt(q));
    }

    static std::string fmt_double(double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v); // shortest round-trip form
        return std::string(buf, res.ptr);
    }

    Kind kind_;
};

} // namespace vfp
