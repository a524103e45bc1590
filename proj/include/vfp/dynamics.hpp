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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vfp/errors.hpp"
#include "vfp/model.hpp"
#include "vfp/noise.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

enum class Stepper {
    EulerMaruyama,
    /// O-B-A-B-O: exact OU half step, half kick, drift, half kick, exact OU half step.
    Splitting,
};

inline const char* to_string(Stepper s) { return s == Stepper::EulerMaruyama ? "euler" : "splitting"; }

namespace detail {

/// out[c] = normal(particle, step, c) for c < count, one Philox call per pair.
inline void draw_normals(const NoiseStream& noise, std::uint64_t particle, std::uint64_t step, std::size_t count,
                         double* out) {
    for (std::size_t c = 0; c < count; c += 2) {
        const auto [z0, z1] = noise.normal_pair(particle, step, c / 2);
        out[c] = z0;
        if (c + 1 < count) out[c + 1] = z1;
    }
}

inline void require_finite(const PhaseState& s, std::uint64_t step, const char* what) {
    if (!s.is_finite())
        throw NumericalError(std::string(what) + " blew up at step " + std::to_string(step) + " (t = " +
                             std::to_string(s.t) + "); reduce dt");
}

/// One step of either scheme. `force(x, out, phase)` fills the total drift
/// force; phase 0 is the pre-step position, phase 1 the post-drift position
/// (splitting only).
template <class ForceFn>
void advance(const ModelSpec& model, PhaseState& s, double dt, const NoiseStream& noise, std::uint64_t step,
             Stepper stepper, std::vector<double>& force, ForceFn&& force_at) {
    const std::size_t n = s.n, d = s.d, nd = n * d;
    const double g = model.gamma, sig = model.sigma;
    force.resize(nd);
    std::array<double, 16> small{};
    std::vector<double> big;
    double* xi = small.data();
    if (2 * d > small.size()) {
        big.resize(2 * d);
        xi = big.data();
    }

    if (stepper == Stepper::EulerMaruyama) {
        force_at(std::span<const double>(s.x), std::span<double>(force), 0);
        const double sdt = sig * std::sqrt(dt);
        for (std::size_t i = 0; i < n; ++i) {
            draw_normals(noise, i, step, d, xi);
            for (std::size_t c = 0; c < d; ++c) {
                const std::size_t k = i * d + c;
                const double y = s.y[k];
                s.x[k] += y * dt;
                s.y[k] = y - g * y * dt - force[k] * dt + sdt * xi[c];
            }
        }
    } else {
        const double decay = std::exp(-0.5 * g * dt);
        const double ou = sig * std::sqrt(-std::expm1(-g * dt) / (2.0 * g));
        for (std::size_t i = 0; i < n; ++i) {
            draw_normals(noise, i, step, 2 * d, xi);
            for (std::size_t c = 0; c < d; ++c) s.y[i * d + c] = decay * s.y[i * d + c] + ou * xi[c];
        }
        force_at(std::span<const double>(s.x), std::span<double>(force), 0);
        for (std::size_t k = 0; k < nd; ++k) {
            s.y[k] -= 0.5 * dt * force[k];
            s.x[k] += dt * s.y[k];
        }
        force_at(std::span<const double>(s.x), std::span<double>(force), 1);
        for (std::size_t i = 0; i < n; ++i) {
            draw_normals(noise, i, step, 2 * d, xi);
            for (std::size_t c = 0; c < d; ++c) {
                const std::size_t k = i * d + c;
                s.y[k] = decay * (s.y[k] - 0.5 * dt * force[k]) + ou * xi[d + c];
            }
        }
    }
    s.t += dt;
}

inline void check_step_args(const ModelSpec& model, const PhaseState& s, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be > 0");
    if (s.d != model.d) throw std::invalid_argument("state dimension does not match the model");
    if (s.x.size() != s.n * s.d || s.y.size() != s.n * s.d)
        throw std::invalid_argument("phase state arrays do not match n x d");
}

} // namespace detail

/// Scratch space reused across steps.
struct StepWorkspace {
    std::vector<double> force;
};

/// Advances the N-particle system by one step in place. `step` addresses the
/// noise, so the same (stream, step) always replays the same increments.
inline void step_interacting_inplace(const ModelSpec& model, PhaseState& state, double dt, const NoiseStream& noise,
                                     std::uint64_t step, Stepper stepper, StepWorkspace& ws, std::size_t threads = 1) {
    detail::check_step_args(model, state, dt);
    detail::advance(model, state, dt, noise, step, stepper, ws.force,
                    [&](std::span<const double> x, std::span<double> out, int) {
                        mean_field_forces(model, x, state.n, out, threads);
                    });
    detail::require_finite(state, step, "interacting system");
}

inline PhaseState step_interacting(const ModelSpec& model, PhaseState state, double dt, const NoiseStream& noise,
                                   std::uint64_t step, Stepper stepper = Stepper::EulerMaruyama) {
    state.validate();
    StepWorkspace ws;
    step_interacting_inplace(model, state, dt, noise, step, stepper, ws);
    return state;
}

/// (1/M) sum_k grad W(x_i - u_k) for every i, against a reference cloud u.
inline void cross_interaction_forces(const ModelSpec& model, std::span<const double> x, std::size_t n,
                                     std::span<const double> u, std::size_t m, std::span<double> out,
                                     std::size_t threads = 1) {
    const std::size_t d = model.d;
    if (model.W.is_zero()) {
        std::fill(out.begin(), out.begin() + n * d, 0.0);
        return;
    }
    if (model.W.is_quadratic()) {
        const double b = model.W.quadratic_coefficient();
        std::vector<double> bar(d);
        detail::centroid(u, m, d, bar);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] = b * (x[i * d + c] - bar[c]);
        return;
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<double> diff(d);
        std::span<double> fi = out.subspan(i * d, d);
        std::fill(fi.begin(), fi.end(), 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t c = 0; c < d; ++c) diff[c] = x[i * d + c] - u[k * d + c];
            model.W.add_gradient(diff, inv_m, fi);
        }
    });
}

/// Stand-in for the law m_t of the nonlinear process.
class LawSurrogate {
public:
    struct ExactGaussian {
        std::vector<double> mean_x, mean_y;
        double t = 0.0;
    };
    struct ReferenceEnsemble {
        PhaseState ensemble;
        NoiseStream noise;
        std::uint64_t step = 0;
        Stepper stepper = Stepper::EulerMaruyama;
        StepWorkspace ws;
    };

    /// Moment flow of the mean; valid for quadratic V and W only.
    static LawSurrogate exact_gaussian(const ModelSpec& model, const InitialLaw& law) {
        if (!model.is_quadratic()) throw ModelError("the exact Gaussian surrogate needs quadratic V and W");
        return LawSurrogate(
            ExactGaussian{std::vector<double>(model.d, law.mean_x), std::vector<double>(model.d, law.mean_y), 0.0});
    }

    /// Independent interacting system of size m drawn from `law`.
    static LawSurrogate reference_ensemble(const ModelSpec& model, std::size_t m, const InitialLaw& law,
                                           const NoiseStream& init, const NoiseStream& dynamics, Stepper stepper) {
        if (m == 0) throw std::invalid_argument("reference ensemble needs at least one particle");
        return LawSurrogate(ReferenceEnsemble{sample_initial_state(m, model.d, law, init), dynamics, 0, stepper, {}});
    }

    bool is_exact() const { return std::holds_alternative<ExactGaussian>(impl_); }

    double time() const {
        return is_exact() ? std::get<ExactGaussian>(impl_).t : std::get<ReferenceEnsemble>(impl_).ensemble.t;
    }

    const ExactGaussian& exact() const { return std::get<ExactGaussian>(impl_); }
    const ReferenceEnsemble& ensemble() const { return std::get<ReferenceEnsemble>(impl_); }

    /// out_i = integral of grad W(x_i - u) m_t(du).
    void interaction(const ModelSpec& model, std::span<const double> x, std::size_t n, std::span<double> out,
                     std::size_t threads = 1) const {
        if (const auto* g = std::get_if<ExactGaussian>(&impl_)) {
            const double b = model.W.quadratic_coefficient();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < model.d; ++c) out[i * model.d + c] = b * (x[i * model.d + c] - g->mean_x[c]);
        } else {
            const auto& e = std::get<ReferenceEnsemble>(impl_);
            cross_interaction_forces(model, x, n, e.ensemble.x, e.ensemble.n, out, threads);
        }
    }

    void advance(const ModelSpec& model, double dt, std::size_t threads = 1) {
        if (auto* g = std::get_if<ExactGaussian>(&impl_)) {
            // RK4 on mx' = my, my' = -gamma my - a mx (the interaction averages out)
            const double a = model.V.quadratic_coefficient(), gam = model.gamma;
            for (std::size_t c = 0; c < model.d; ++c) {
                auto f = [&](double mx, double my) { return std::array<double, 2>{my, -gam * my - a * mx}; };
                const double x0 = g->mean_x[c], y0 = g->mean_y[c];
                const auto k1 = f(x0, y0);
                const auto k2 = f(x0 + 0.5 * dt * k1[0], y0 + 0.5 * dt * k1[1]);
                const auto k3 = f(x0 + 0.5 * dt * k2[0], y0 + 0.5 * dt * k2[1]);
                const auto k4 = f(x0 + dt * k3[0], y0 + dt * k3[1]);
                g->mean_x[c] = x0 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                g->mean_y[c] = y0 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            }
            g->t += dt;
        } else {
            auto& e = std::get<ReferenceEnsemble>(impl_);
            step_interacting_inplace(model, e.ensemble, dt, e.noise, e.step++, e.stepper, e.ws, threads);
        }
    }

private:
    explicit LawSurrogate(std::variant<ExactGaussian, ReferenceEnsemble> impl) : impl_(std::move(impl)) {}
    std::variant<ExactGaussian, ReferenceEnsemble> impl_;
};

/// Advances copies of the nonlinear process by one step and moves the
/// surrogate along to t + dt. With W identically zero the update is bitwise
/// the interacting one.
inline void step_nonlinear_inplace(const ModelSpec& model, PhaseState& state, LawSurrogate& surrogate, double dt,
                                   const NoiseStream& noise, std::uint64_t step, Stepper stepper, StepWorkspace& ws,
                                   std::size_t threads = 1) {
    detail::check_step_args(model, state, dt);
    if (std::abs(surrogate.time() - state.t) > 0.5 * dt)
        throw std::invalid_argument("surrogate time " + std::to_string(surrogate.time()) +
                                    " does not match state time " + std::to_string(state.t));
    bool advanced = false;
    detail::advance(model, state, dt, noise, step, stepper, ws.force,
                    [&](std::span<const double> x, std::span<double> out, int phase) {
                        if (phase == 1 && !advanced) {
                            surrogate.advance(model, dt, threads);
                            advanced = true;
                        }
                        const std::size_t d = model.d;
                        if (model.W.is_zero())
                            std::fill(out.begin(), out.end(), 0.0);
                        else
                            surrogate.interaction(model, x, state.n, out, threads);
                        for (std::size_t i = 0; i < state.n; ++i)
                            model.V.add_gradient(x.subspan(i * d, d), 1.0, out.subspan(i * d, d));
                    });
    if (!advanced) surrogate.advance(model, dt, threads);
    detail::require_finite(state, step, "nonlinear process");
}

inline PhaseState step_nonlinear(const ModelSpec& model, PhaseState state, LawSurrogate& surrogate, double dt,
                                 const NoiseStream& noise, std::uint64_t step,
                                 Stepper stepper = Stepper::EulerMaruyama) {
    state.validate();
    StepWorkspace ws;
    step_nonlinear_inplace(model, state, surrogate, dt, noise, step, stepper, ws);
    return state;
}

struct SurrogateSpec {
    enum class Kind { ExactGaussian, ReferenceEnsemble };
    Kind kind = Kind::ExactGaussian;
    std::size_t ensemble_factor = 16; ///< M = factor * N
    std::size_t ensemble_size = 0;    ///< when nonzero, M = ensemble_size regardless of N

    std::size_t reference_size(std::size_t n) const { return ensemble_size ? ensemble_size : ensemble_factor * n; }
};

/// Interacting system and nonlinear copies started from the same samples and
/// driven by the same noise addresses.
struct CoupledPair {
    PhaseState interacting;
    PhaseState nonlinear;
    NoiseStream noise;
    LawSurrogate surrogate;
    Stepper stepper = Stepper::EulerMaruyama;
    std::uint64_t step = 0;
    StepWorkspace ws_interacting, ws_nonlinear;

    void advance(const ModelSpec& model, double dt, std::size_t threads = 1) {
        step_interacting_inplace(model, interacting, dt, noise, step, stepper, ws_interacting, threads);
        step_nonlinear_inplace(model, nonlinear, surrogate, dt, noise, step, stepper, ws_nonlinear, threads);
        ++step;
    }
};

/// Streams of replica r are derived from `root` by purpose, so replicas and
/// the reference ensemble never share noise.
inline CoupledPair make_coupled_pair(const ModelSpec& model, std::size_t n, const InitialLaw& law,
                                     const NoiseStream& root, std::uint64_t replica, const SurrogateSpec& spec,
                                     Stepper stepper = Stepper::EulerMaruyama) {
    if (n == 0) throw std::invalid_argument("coupled pair needs N >= 1");
    PhaseState start = sample_initial_state(n, model.d, law, replica_stream(root, replica, StreamPurpose::InitialCondition));
    LawSurrogate surrogate =
        spec.kind == SurrogateSpec::Kind::ExactGaussian
            ? LawSurrogate::exact_gaussian(model, law)
            : LawSurrogate::reference_ensemble(model, spec.reference_size(n), law,
                                               replica_stream(root, replica, StreamPurpose::EnsembleInitialCondition),
                                               replica_stream(root, replica, StreamPurpose::EnsembleDynamics), stepper);
    return CoupledPair{start, start, replica_stream(root, replica, StreamPurpose::Dynamics), std::move(surrogate),
                       stepper, 0, {}, {}};
}

} // namespace vfp
