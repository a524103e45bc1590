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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfp/dynamics.hpp"
#include "vfp/errors.hpp"
#include "vfp/model.hpp"
#include "vfp/noise.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

struct SimulationOptions {
    std::size_t n = 64;
    double dt = 1e-3;
    double t_end = 1.0;
    double record_every = 0.1;
    std::size_t replicas = 64;
    Stepper stepper = Stepper::EulerMaruyama;
    std::size_t threads = 1; ///< replicas run concurrently; each replica is sequential
    InitialLaw law;
    std::uint64_t seed = 0;
    SurrogateSpec surrogate;
    std::optional<double> lyapunov_epsilon; ///< default 0.05 min(1, gamma, c1 - 2 c2)
};

/// One diagnostic recorded on the time grid for every replica.
struct MetricTable {
    std::string name;
    std::vector<std::vector<double>> by_replica; ///< [replica][time index]

    double mean(std::size_t k) const {
        double s = 0.0;
        for (const auto& row : by_replica) s += row[k];
        return s / static_cast<double>(by_replica.size());
    }

    /// Standard error of the replica mean; zero for a single replica.
    double stderr_of_mean(std::size_t k) const {
        const std::size_t r = by_replica.size();
        if (r < 2) return 0.0;
        const double m = mean(k);
        double ss = 0.0;
        for (const auto& row : by_replica) ss += (row[k] - m) * (row[k] - m);
        return std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r));
    }

    std::vector<double> means() const {
        std::vector<double> out(by_replica.empty() ? 0 : by_replica.front().size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = mean(k);
        return out;
    }
};

struct SimulationRun {
    std::vector<double> t;
    std::vector<MetricTable> metrics;
    std::vector<PhaseState> final_interacting;
    std::vector<PhaseState> final_nonlinear; ///< empty unless coupled

    const MetricTable& metric(const std::string& name) const {
        for (const auto& m : metrics)
            if (m.name == name) return m;
        throw std::out_of_range("no metric named " + name);
    }
};

inline double default_lyapunov_epsilon(const ModelSpec& model) {
    return 0.05 * std::min({1.0, model.gamma, model.convexity()});
}

namespace detail {

struct TimeGrid {
    std::vector<double> t;
    std::size_t steps_per_record = 1;
};

inline TimeGrid make_time_grid(const SimulationOptions& o) {
    if (!(o.dt > 0.0) || !(o.t_end >= 0.0) || !(o.record_every > 0.0))
        throw std::invalid_argument("dt, t_end and record_every must be positive");
    const double spr = o.record_every / o.dt;
    const double records = o.t_end / o.record_every;
    if (std::abs(spr - std::round(spr)) > 1e-6 * spr || std::round(spr) < 1.0)
        throw std::invalid_argument("record_every must be a whole multiple of dt");
    if (std::abs(records - std::round(records)) > 1e-6 * std::max(1.0, records))
        throw std::invalid_argument("t_end must be a whole multiple of record_every");
    TimeGrid g;
    g.steps_per_record = static_cast<std::size_t>(std::llround(spr));
    const auto count = static_cast<std::size_t>(std::llround(records));
    for (std::size_t k = 0; k <= count; ++k) g.t.push_back(static_cast<double>(k * g.steps_per_record) * o.dt);
    return g;
}

inline double mean_square(const std::vector<double>& v, std::size_t n) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s / static_cast<double>(n);
}

/// Unbiased sample variance over particles, pooled over coordinates.
inline double sample_variance(const std::vector<double>& v, std::size_t n, std::size_t d) {
    if (n < 2) return 0.0;
    double total = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += v[i * d + c];
        m /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) total += (v[i * d + c] - m) * (v[i * d + c] - m);
    }
    return total / static_cast<double>(d * (n - 1));
}

/// H / N with H = U_N(x) + |y|^2 / 2 + eps x . y.
inline double lyapunov_per_particle(const ModelSpec& model, const PhaseState& s, double eps) {
    double kin = 0.0, cross = 0.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        kin += s.y[k] * s.y[k];
        cross += s.x[k] * s.y[k];
    }
    return (un_potential(model, s.x, s.n) + 0.5 * kin + eps * cross) / static_cast<double>(s.n);
}

inline double coupling_per_particle(const PhaseState& a, const PhaseState& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.x.size(); ++k) {
        const double dx = a.x[k] - b.x[k], dy = a.y[k] - b.y[k];
        s += dx * dx + dy * dy;
    }
    return s / static_cast<double>(a.n);
}

inline std::vector<MetricTable> make_tables(std::initializer_list<const char*> names, std::size_t r, std::size_t k) {
    std::vector<MetricTable> out;
    for (const char* n : names) out.push_back({n, std::vector<std::vector<double>>(r, std::vector<double>(k, 0.0))});
    return out;
}

/// parallel_for whose blow-ups name the offending replica.
template <class Body>
void parallel_replicas(std::size_t replicas, std::size_t threads, Body&& body) {
    parallel_for(replicas, threads, [&](std::size_t r) {
        try {
            body(r);
        } catch (const NumericalError& e) {
            throw NumericalError("replica " + std::to_string(r) + ": " + e.what());
        }
    });
}

} // namespace detail

/// Replicas of the N-particle system. Metrics per replica and record time:
/// x2 = |X|^2/N, y2 = |Y|^2/N, var_x, var_y (sample variances across
/// particles) and lyapunov = H/N.
inline SimulationRun simulate_interacting(const ModelSpec& model, const SimulationOptions& o) {
    if (o.n == 0 || o.replicas == 0) throw std::invalid_argument("N and replicas must be >= 1");
    const auto grid = detail::make_time_grid(o);
    const double eps = o.lyapunov_epsilon.value_or(default_lyapunov_epsilon(model));
    const NoiseStream root(o.seed);
    SimulationRun run;
    run.t = grid.t;
    run.metrics = detail::make_tables({"x2", "y2", "var_x", "var_y", "lyapunov"}, o.replicas, grid.t.size());
    run.final_interacting.resize(o.replicas);

    detail::parallel_replicas(o.replicas, o.threads, [&](std::size_t r) {
        PhaseState s = sample_initial_state(o.n, model.d, o.law, replica_stream(root, r, StreamPurpose::InitialCondition));
        const NoiseStream noise = replica_stream(root, r, StreamPurpose::Dynamics);
        StepWorkspace ws;
        std::uint64_t step = 0;
        for (std::size_t k = 0; k < grid.t.size(); ++k) {
            if (k > 0)
                for (std::size_t j = 0; j < grid.steps_per_record; ++j)
                    step_interacting_inplace(model, s, o.dt, noise, step++, o.stepper, ws);
            run.metrics[0].by_replica[r][k] = detail::mean_square(s.x, s.n);
            run.metrics[1].by_replica[r][k] = detail::mean_square(s.y, s.n);
            run.metrics[2].by_replica[r][k] = detail::sample_variance(s.x, s.n, s.d);
            run.metrics[3].by_replica[r][k] = detail::sample_variance(s.y, s.n, s.d);
            run.metrics[4].by_replica[r][k] = detail::lyapunov_per_particle(model, s, eps);
        }
        run.final_interacting[r] = std::move(s);
    });
    return run;
}

/// Replicas of the coupled pair. Metrics: coupling = |Z - Zbar|^2 / N, plus
/// x2, y2 and lyapunov of the interacting member.
inline SimulationRun simulate_coupled(const ModelSpec& model, const SimulationOptions& o) {
    if (o.n == 0 || o.replicas == 0) throw std::invalid_argument("N and replicas must be >= 1");
    const auto grid = detail::make_time_grid(o);
    const double eps = o.lyapunov_epsilon.value_or(default_lyapunov_epsilon(model));
    const NoiseStream root(o.seed);
    SimulationRun run;
    run.t = grid.t;
    run.metrics = detail::make_tables({"coupling", "x2", "y2", "lyapunov"}, o.replicas, grid.t.size());
    run.final_interacting.resize(o.replicas);
    run.final_nonlinear.resize(o.replicas);

    detail::parallel_replicas(o.replicas, o.threads, [&](std::size_t r) {
        CoupledPair pair = make_coupled_pair(model, o.n, o.law, root, r, o.surrogate, o.stepper);
        for (std::size_t k = 0; k < grid.t.size(); ++k) {
            if (k > 0)
                for (std::size_t j = 0; j < grid.steps_per_record; ++j) pair.advance(model, o.dt);
            const PhaseState& s = pair.interacting;
            run.metrics[0].by_replica[r][k] = detail::coupling_per_particle(s, pair.nonlinear);
            run.metrics[1].by_replica[r][k] = detail::mean_square(s.x, s.n);
            run.metrics[2].by_replica[r][k] = detail::mean_square(s.y, s.n);
            run.metrics[3].by_replica[r][k] = detail::lyapunov_per_particle(model, s, eps);
        }
        run.final_interacting[r] = std::move(pair.interacting);
        run.final_nonlinear[r] = std::move(pair.nonlinear);
    });
    return run;
}

} // namespace vfp
