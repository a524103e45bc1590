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

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <Eigen/Dense>

#include "vfp/errors.hpp"
#include "vfp/gaussian.hpp"
#include "vfp/model.hpp"

namespace vfp {

/// Which linear SDE a Gaussian law is pushed through.
struct FlowKind {
    enum class Type { ParticleSystem, NonlinearFlow };
    Type type = Type::NonlinearFlow;
    std::size_t N = 1;

    static FlowKind particle_system(std::size_t n) {
        if (n == 0) throw std::invalid_argument("particle system needs N >= 1");
        return {Type::ParticleSystem, n};
    }
    static FlowKind nonlinear() { return {Type::NonlinearFlow, 1}; }

    /// Phase-space dimension: 2dN or 2d.
    std::size_t dim(std::size_t d) const { return 2 * d * (type == Type::ParticleSystem ? N : 1); }
};

namespace detail {

/// Applies A = [[0, -I], [aI + b(I - pi), gamma I]] to the columns of M without
/// forming pi. Rows are [x (N*d), y (N*d)], particle-major; N = 1 gives the
/// single-copy block with coefficient a.
inline Eigen::MatrixXd apply_drift(const Eigen::MatrixXd& M, double a, double b, double gamma, std::size_t N,
                                   std::size_t d) {
    const Eigen::Index k = static_cast<Eigen::Index>(N * d);
    Eigen::MatrixXd out(M.rows(), M.cols());
    const auto top = M.topRows(k);
    const auto bottom = M.bottomRows(k);
    out.topRows(k) = -bottom;
    out.bottomRows(k) = (a + b) * top + gamma * bottom;
    if (b != 0.0) {
        // subtract b * pi * top: the per-coordinate particle average
        Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), M.cols());
        for (std::size_t i = 0; i < N; ++i) avg += top.middleRows(static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d));
        avg /= static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i)
            out.middleRows(k + static_cast<Eigen::Index>(i * d), static_cast<Eigen::Index>(d)) -= b * avg;
    }
    return out;
}

} // namespace detail

/// Pushes a Gaussian law through the quadratic model's linear SDE with RK4 on
/// mean' = -A mean and cov' = -A cov - cov A^T + diag(0, sigma^2 I).
///
/// For the nonlinear flow the mean feels only V (the interaction averages to
/// zero) while fluctuations feel a + b.
inline GaussianLaw propagate_gaussian(const FlowKind& kind, const ModelSpec& model, const GaussianLaw& law,
                                      double t_target, double dt) {
    if (!model.is_quadratic()) throw ModelError("Gaussian flows need quadratic V and W");
    const std::size_t d = model.d;
    if (static_cast<std::size_t>(law.dim()) != kind.dim(d))
        throw std::invalid_argument("law dimension " + std::to_string(law.dim()) + " does not match flow dimension " +
                                    std::to_string(kind.dim(d)));
    if (!(t_target >= 0.0) || !std::isfinite(t_target)) throw std::invalid_argument("t_target must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (t_target == 0.0) return law;

    const double a = model.V.quadratic_coefficient(), b = model.W.quadratic_coefficient();
    const double gam = model.gamma, s2 = model.sigma * model.sigma;
    const bool particles = kind.type == FlowKind::Type::ParticleSystem;
    const std::size_t N = particles ? kind.N : 1;
    const Eigen::Index k = static_cast<Eigen::Index>(N * d);

    // N = 1 with the mean-field coefficient folded into a
    auto drift_mean = [&](const Eigen::MatrixXd& m) {
        return particles ? detail::apply_drift(m, a, b, gam, N, d) : detail::apply_drift(m, a, 0.0, gam, 1, d);
    };
    auto drift_cov = [&](const Eigen::MatrixXd& m) {
        return particles ? detail::apply_drift(m, a, b, gam, N, d) : detail::apply_drift(m, a + b, 0.0, gam, 1, d);
    };
    auto f_mean = [&](const Eigen::VectorXd& m) -> Eigen::VectorXd { return -drift_mean(m); };
    auto f_cov = [&](const Eigen::MatrixXd& c) -> Eigen::MatrixXd {
        const Eigen::MatrixXd ac = drift_cov(c);
        Eigen::MatrixXd out = -ac - ac.transpose();
        out.bottomRightCorner(k, k).diagonal().array() += s2;
        return out;
    };

    const auto steps = static_cast<std::size_t>(std::ceil(t_target / dt - 1e-9));
    const double h = t_target / static_cast<double>(steps);
    Eigen::VectorXd mean = law.mean;
    Eigen::MatrixXd cov = law.cov;
    for (std::size_t s = 0; s < steps; ++s) {
        const Eigen::VectorXd m1 = f_mean(mean);
        const Eigen::VectorXd m2 = f_mean(mean + 0.5 * h * m1);
        const Eigen::VectorXd m3 = f_mean(mean + 0.5 * h * m2);
        const Eigen::VectorXd m4 = f_mean(mean + h * m3);
        mean += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);

        const Eigen::MatrixXd c1 = f_cov(cov);
        const Eigen::MatrixXd c2 = f_cov(cov + 0.5 * h * c1);
        const Eigen::MatrixXd c3 = f_cov(cov + 0.5 * h * c2);
        const Eigen::MatrixXd c4 = f_cov(cov + h * c3);
        cov += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        cov = 0.5 * (cov + cov.transpose()).eval();
    }
    if (!mean.allFinite() || !cov.allFinite()) throw NumericalError("Gaussian flow diverged; reduce dt");
    return GaussianLaw::make(std::move(mean), std::move(cov));
}

/// Stationary law of the flow. Particle system: positions (sigma^2/2gamma) K^-1
/// with K^-1 = pi/a + (I - pi)/(a + b); nonlinear: the product law m_inf.
inline GaussianLaw gibbs_law(const FlowKind& kind, const ModelSpec& model) {
    if (!model.is_quadratic()) throw ModelError("Gibbs law in closed form needs quadratic V and W");
    const double a = model.V.quadratic_coefficient(), b = model.W.quadratic_coefficient();
    if (!(a + b > 0.0)) throw ModelError("a + b must be > 0");
    const double sv = model.sigma * model.sigma / (2.0 * model.gamma);
    const std::size_t d = model.d;
    const std::size_t N = kind.type == FlowKind::Type::ParticleSystem ? kind.N : 1;
    const Eigen::Index k = static_cast<Eigen::Index>(N * d), dim = 2 * k;
    GaussianLaw out{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim)};
    if (kind.type == FlowKind::Type::ParticleSystem) {
        const double off = (1.0 / a - 1.0 / (a + b)) / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t j = 0; j < N; ++j)
                for (std::size_t c = 0; c < d; ++c)
                    out.cov(static_cast<Eigen::Index>(i * d + c), static_cast<Eigen::Index>(j * d + c)) =
                        sv * (off + (i == j ? 1.0 / (a + b) : 0.0));
    } else {
        out.cov.topLeftCorner(k, k).diagonal().setConstant(sv / (a + b));
    }
    out.cov.bottomRightCorner(k, k).diagonal().setConstant(sv);
    return out;
}

/// m_0 (tensorized N times for the particle system) as a Gaussian law.
inline GaussianLaw initial_gaussian(const FlowKind& kind, std::size_t d, const InitialLaw& law) {
    const std::size_t N = kind.type == FlowKind::Type::ParticleSystem ? kind.N : 1;
    const Eigen::Index k = static_cast<Eigen::Index>(N * d);
    GaussianLaw out{Eigen::VectorXd(2 * k), Eigen::MatrixXd::Zero(2 * k, 2 * k)};
    out.mean.head(k).setConstant(law.mean_x);
    out.mean.tail(k).setConstant(law.mean_y);
    out.cov.topLeftCorner(k, k).diagonal().setConstant(law.var_x);
    out.cov.bottomRightCorner(k, k).diagonal().setConstant(law.var_y);
    return out;
}

} // namespace vfp
