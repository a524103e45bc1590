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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vfp/equilibrium.hpp"
#include "vfp/errors.hpp"
#include "vfp/gaussian_flow.hpp"
#include "vfp/lab/config.hpp"
#include "vfp/lab/csv.hpp"
#include "vfp/lab/fit.hpp"
#include "vfp/noise.hpp"
#include "vfp/rates.hpp"
#include "vfp/simulate.hpp"
#include "vfp/transport.hpp"

namespace vfp::lab {

inline constexpr const char* kToolVersion = "vfpkit 0.1.0";

struct FitRecord {
    std::optional<double> rate;
    std::optional<double> prefactor;
    std::optional<double> slope;
    double r_squared = 1.0;
};

struct CsvOutput {
    std::string file; ///< name inside the output directory
    std::vector<std::string> columns;
};

struct RunRecord {
    ExperimentConfig config;
    std::filesystem::path out_dir;
    std::vector<CsvOutput> csv;
    std::map<std::string, FitRecord> fits;
    nlohmann::json summary = nlohmann::json::object();
    double wall_clock_seconds = 0.0;
    std::uint64_t seed = 0;

    std::filesystem::path path_of(const std::string& file) const { return out_dir / file; }
};

inline nlohmann::json to_json(const FitRecord& f) {
    nlohmann::json j;
    if (f.rate) j["rate"] = *f.rate;
    if (f.prefactor) j["prefactor"] = *f.prefactor;
    if (f.slope) j["slope"] = *f.slope;
    j["r_squared"] = f.r_squared;
    return j;
}

inline nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json j;
    j["tool"] = kToolVersion;
    j["kind"] = to_string(r.config.kind);
    j["seed"] = r.seed;
    j["config"] = to_json(r.config);
    j["csv"] = nlohmann::json::array();
    for (const auto& c : r.csv) j["csv"].push_back({{"file", c.file}, {"columns", c.columns}});
    j["fits"] = nlohmann::json::object();
    for (const auto& [name, f] : r.fits) j["fits"][name] = to_json(f);
    j["summary"] = r.summary;
    j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ splitmix64(a)) ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

inline CsvWriter open_csv(RunRecord& rec, const std::string& file, std::vector<std::string> columns) {
    rec.csv.push_back({file, columns});
    return CsvWriter(rec.path_of(file), std::move(columns));
}

inline std::string suffix(std::size_t n) { return "_N" + std::to_string(n); }

inline FitWindow window_for(const ExperimentConfig& c) {
    return c.fit_window.value_or(FitWindow{0.5 * c.t_end, c.t_end});
}

inline SimulationOptions sim_options(const ExperimentConfig& c, std::size_t n, double record_every) {
    SimulationOptions o;
    o.n = n;
    o.dt = c.dt;
    o.t_end = c.t_end;
    o.record_every = record_every;
    o.replicas = c.replicas;
    o.stepper = c.stepper;
    o.threads = c.threads;
    o.law = c.m0_law;
    o.seed = derive_seed(c.seed, n);
    o.lyapunov_epsilon = c.lyapunov_epsilon;
    return o;
}

/// Exact moment flow where it exists, otherwise a reference ensemble of
/// ensemble_factor * n_max particles shared by every N of the run.
inline SurrogateSpec surrogate_for(const ExperimentConfig& c, const ModelSpec& model) {
    SurrogateSpec s;
    const bool exact = c.surrogate == SurrogateChoice::Exact ||
                       (c.surrogate == SurrogateChoice::Auto && model.is_quadratic());
    if (exact && !model.is_quadratic()) throw ConfigError("surrogate = exact needs quadratic V and W");
    s.kind = exact ? SurrogateSpec::Kind::ExactGaussian : SurrogateSpec::Kind::ReferenceEnsemble;
    s.ensemble_factor = c.ensemble_factor;
    s.ensemble_size = c.ensemble_factor * c.N.back();
    return s;
}

inline nlohmann::json surrogate_json(const SurrogateSpec& s) {
    if (s.kind == SurrogateSpec::Kind::ExactGaussian) return {{"kind", "exact"}};
    return {{"kind", "ensemble"}, {"size", s.ensemble_size}};
}

/// Writes one metric in long format; replica -1 rows carry the replica mean.
inline void write_metric(RunRecord& rec, const std::string& file, const std::vector<double>& t,
                         const MetricTable& m, double scale = 1.0) {
    CsvWriter w = open_csv(rec, file, {"replica", "t", "value"});
    for (std::size_t r = 0; r < m.by_replica.size(); ++r)
        for (std::size_t k = 0; k < t.size(); ++k) w.row(static_cast<long long>(r), t[k], scale * m.by_replica[r][k]);
    for (std::size_t k = 0; k < t.size(); ++k) w.row(-1LL, t[k], scale * m.mean(k));
}

inline std::vector<double> time_grid(const ExperimentConfig& c) {
    const auto steps = static_cast<std::size_t>(std::llround(c.t_end / c.t_step));
    std::vector<double> t(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * c.t_step;
    return t;
}

inline void require_quadratic(const ModelSpec& model, const char* what) {
    if (!model.is_quadratic()) throw ConfigError(std::string(what) + " needs quadratic V and W");
}

/// EmpiricalCloud of the (x, y) coordinates of every particle.
inline EmpiricalCloud phase_cloud(const PhaseState& s) {
    EmpiricalCloud c(s.n, 2 * s.d);
    for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t k = 0; k < s.d; ++k) {
            c.points[i * 2 * s.d + k] = s.x[i * s.d + k];
            c.points[i * 2 * s.d + s.d + k] = s.y[i * s.d + k];
        }
    return c;
}

/// i.i.d. samples of the nonlinear equilibrium, laid out like phase_cloud.
using EquilibriumSampler = std::function<EmpiricalCloud(std::size_t n, std::uint64_t seed)>;

inline EquilibriumSampler equilibrium_sampler(const ExperimentConfig& c, const ModelSpec& model,
                                              nlohmann::json& summary) {
    if (model.is_quadratic()) {
        const auto law = equilibrium_quadratic(model.V.quadratic_coefficient(), model.W.quadratic_coefficient(),
                                               model.gamma, model.sigma, model.d);
        const std::size_t d = model.d;
        const double sx = std::sqrt(law.cov(0, 0)), sy = std::sqrt(law.cov(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
        return [d, sx, sy](std::size_t n, std::uint64_t seed) {
            const NoiseStream stream =
                NoiseStream(seed).substream(static_cast<std::uint64_t>(StreamPurpose::EquilibriumSample));
            EmpiricalCloud cloud(n, 2 * d);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < 2 * d; ++k)
                    cloud.points[i * 2 * d + k] = (k < d ? sx : sy) * stream.normal(i, 0, k);
            return cloud;
        };
    }
    if (model.d != 1) throw ConfigError("equilibrium samples of a non-quadratic model need d = 1");
    FixedPointOptions fp = c.fixed_point;
    fp.threads = c.threads;
    auto density = std::make_shared<FixedPointDensity>(solve_fixed_point(model, fp));
    summary["fixed_point"] = {{"iterations", density->iterations}, {"residual", density->residual},
                              {"variance", density->variance()}};
    const double gamma = model.gamma, sigma = model.sigma;
    return [density, gamma, sigma](std::size_t n, std::uint64_t seed) {
        return sample_equilibrium(*density, gamma, sigma, n, seed);
    };
}

/// Exponential fit over the window, or nullopt with the reason logged in the
/// summary when the window holds too few points or a nonpositive value.
inline std::optional<ExponentialFit> tail_fit(RunRecord& rec, const std::string& name, const std::vector<double>& t,
                                              const std::vector<double>& v, const FitWindow& window) {
    std::size_t inside = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!window.contains(t[k])) continue;
        ++inside;
        if (!(v[k] > 0.0)) {
            rec.summary["skipped_fits"].push_back(name + ": the series vanishes inside the window");
            return std::nullopt;
        }
    }
    if (inside < 4) {
        rec.summary["skipped_fits"].push_back(name + ": fewer than 4 points inside the window");
        return std::nullopt;
    }
    return fit_exponential_rate(t, v, window);
}

inline void run_entropy(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    require_quadratic(model, "the entropy experiment");
    const auto t = time_grid(c);
    std::vector<std::vector<double>> kl(c.N.size(), std::vector<double>(t.size()));
    parallel_for(c.N.size(), c.threads, [&](std::size_t j) {
        const auto kind = FlowKind::particle_system(c.N[j]);
        const GaussianLaw target = gibbs_law(kind, model);
        GaussianLaw law = c.m0 == InitialChoice::Gibbs ? target : initial_gaussian(kind, model.d, c.m0_law);
        kl[j][0] = kl_gaussian(law, target);
        for (std::size_t k = 1; k < t.size(); ++k) {
            law = propagate_gaussian(kind, model, law, c.t_step, c.dt);
            kl[j][k] = kl_gaussian(law, target);
        }
    });

    const auto spec = spectrum_quadratic(model.V.quadratic_coefficient(), model.W.quadratic_coefficient(),
                                         model.gamma, c.N.front(), model.d);
    rec.summary["chi_exact"] = spec.chi_exact;
    const FitWindow window = window_for(c);
    rec.summary["fit_window"] = {window.lo, window.hi};
    for (std::size_t j = 0; j < c.N.size(); ++j) {
        const std::string name = "entropy" + suffix(c.N[j]);
        CsvWriter w = open_csv(rec, name + ".csv", {"replica", "t", "value"});
        for (std::size_t k = 0; k < t.size(); ++k) w.row(-1LL, t[k], kl[j][k]);
        rec.summary["initial_kl"][std::to_string(c.N[j])] = kl[j][0];

        if (const auto fit = tail_fit(rec, name, t, kl[j], window))
            rec.fits[name] = {fit->rate, fit->prefactor, std::nullopt, fit->r_squared};
    }
}

inline void run_chaos(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    const SurrogateSpec surrogate = surrogate_for(c, model);
    rec.summary["surrogate"] = surrogate_json(surrogate);
    std::vector<double> ns, w2;
    CsvWriter per_replica = open_csv(rec, "chaos_particle1.csv", {"replica", "N", "value"});
    for (std::size_t n : c.N) {
        SimulationOptions o = sim_options(c, n, c.t_end);
        o.surrogate = surrogate;
        const SimulationRun run = simulate_coupled(model, o);
        // particle 1 of every replica: interacting cloud vs its coupled nonlinear copy
        EmpiricalCloud a(c.replicas, 2 * model.d), b(c.replicas, 2 * model.d);
        for (std::size_t r = 0; r < c.replicas; ++r) {
            const PhaseState& s = run.final_interacting[r];
            const PhaseState& sb = run.final_nonlinear[r];
            double sq = 0.0;
            for (std::size_t k = 0; k < model.d; ++k) {
                a.points[r * 2 * model.d + k] = s.x[k];
                a.points[r * 2 * model.d + model.d + k] = s.y[k];
                b.points[r * 2 * model.d + k] = sb.x[k];
                b.points[r * 2 * model.d + model.d + k] = sb.y[k];
                sq += (s.x[k] - sb.x[k]) * (s.x[k] - sb.x[k]) + (s.y[k] - sb.y[k]) * (s.y[k] - sb.y[k]);
            }
            per_replica.row(static_cast<long long>(r), n, sq);
        }
        ns.push_back(static_cast<double>(n));
        w2.push_back(std::sqrt(w2_empirical(a, b, c.threads).cost));
    }
    CsvWriter w = open_csv(rec, "chaos_w2.csv", {"replica", "N", "value"});
    for (std::size_t j = 0; j < ns.size(); ++j) {
        w.row(-1LL, c.N[j], w2[j]);
        rec.summary["w2"][std::to_string(c.N[j])] = w2[j];
    }
    rec.summary["t"] = c.t_end;
    if (ns.size() >= 3) {
        const auto fit = fit_powerlaw(ns, w2);
        rec.fits["chaos"] = {std::nullopt, fit.prefactor, fit.slope, fit.r_squared};
    } else {
        rec.summary["skipped_fits"].push_back("chaos: the power-law fit needs at least 3 values of N");
    }
}

inline void run_confidence(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    const EquilibriumSampler sampler = equilibrium_sampler(c, model, rec.summary);
    const auto t = time_grid(c);
    const auto spr = static_cast<std::size_t>(std::llround(c.t_step / c.dt));
    CsvWriter ex = open_csv(rec, "exceedance.csv", {"t", "N", "epsilon", "frequency", "stderr"});

    // freq[j][k][e] for the monotonicity summary
    std::vector<std::vector<std::vector<double>>> freq(c.N.size());
    for (std::size_t j = 0; j < c.N.size(); ++j) {
        const std::size_t n = c.N[j];
        const std::uint64_t seed_n = derive_seed(c.seed, n);
        const NoiseStream root(seed_n);
        std::vector<std::vector<double>> w2(c.replicas, std::vector<double>(t.size()));
        vfp::detail::parallel_replicas(c.replicas, c.threads, [&](std::size_t r) {
            PhaseState s = sample_initial_state(n, model.d, c.m0_law,
                                                replica_stream(root, r, StreamPurpose::InitialCondition));
            const NoiseStream noise = replica_stream(root, r, StreamPurpose::Dynamics);
            StepWorkspace ws;
            std::uint64_t step = 0;
            for (std::size_t k = 0; k < t.size(); ++k) {
                if (k > 0)
                    for (std::size_t q = 0; q < spr; ++q)
                        step_interacting_inplace(model, s, c.dt, noise, step++, c.stepper, ws);
                const EmpiricalCloud reference = sampler(n, derive_seed(seed_n, r + 1, k));
                w2[r][k] = std::sqrt(w2_empirical(phase_cloud(s), reference).cost);
            }
        });

        CsvWriter w = open_csv(rec, "confidence_w2" + suffix(n) + ".csv", {"replica", "t", "value"});
        for (std::size_t r = 0; r < c.replicas; ++r)
            for (std::size_t k = 0; k < t.size(); ++k) w.row(static_cast<long long>(r), t[k], w2[r][k]);
        freq[j].assign(t.size(), std::vector<double>(c.epsilon.size()));
        const double reps = static_cast<double>(c.replicas);
        for (std::size_t k = 0; k < t.size(); ++k) {
            double mean = 0.0;
            for (std::size_t r = 0; r < c.replicas; ++r) mean += w2[r][k] / reps;
            w.row(-1LL, t[k], mean);
            for (std::size_t e = 0; e < c.epsilon.size(); ++e) {
                std::size_t hits = 0;
                for (std::size_t r = 0; r < c.replicas; ++r) hits += w2[r][k] >= c.epsilon[e];
                const double p = static_cast<double>(hits) / reps;
                freq[j][k][e] = p;
                ex.row(t[k], n, c.epsilon[e], p, std::sqrt(p * (1.0 - p) / reps));
            }
        }
    }

    // non-increasing in N at fixed (t, epsilon), up to two binomial standard errors
    bool monotone = true;
    const double reps = static_cast<double>(c.replicas);
    for (std::size_t j = 1; j < c.N.size(); ++j)
        for (std::size_t k = 0; k < t.size(); ++k)
            for (std::size_t e = 0; e < c.epsilon.size(); ++e) {
                const double p0 = freq[j - 1][k][e], p1 = freq[j][k][e];
                const double se = std::sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / reps);
                if (p1 > p0 + 2.0 * se + 1e-12) monotone = false;
            }
    rec.summary["non_increasing_in_N"] = monotone;
}

inline void run_coupling(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    const SurrogateSpec surrogate = surrogate_for(c, model);
    rec.summary["surrogate"] = surrogate_json(surrogate);
    const FitWindow window = window_for(c);
    rec.summary["fit_window"] = {window.lo, window.hi};
    double lo = INFINITY, hi = 0.0;
    for (std::size_t n : c.N) {
        SimulationOptions o = sim_options(c, n, c.t_step);
        o.surrogate = surrogate;
        const SimulationRun run = simulate_coupled(model, o);
        const MetricTable& m = run.metric("coupling");
        const std::string name = "coupling" + suffix(n);
        write_metric(rec, name + ".csv", run.t, m);
        write_metric(rec, "coupling_full" + suffix(n) + ".csv", run.t, m, static_cast<double>(n));

        std::vector<double> full = m.means();
        for (double& v : full) v *= static_cast<double>(n);
        rec.summary["full_norm_at_t_end"][std::to_string(n)] = full.back();
        lo = std::min(lo, full.back());
        hi = std::max(hi, full.back());
        // log E|Z - Zbar|^2 = ln K + b t
        if (const auto fit = tail_fit(rec, name, run.t, full, window))
            rec.fits[name] = {std::nullopt, fit->prefactor, -fit->rate, fit->r_squared};
    }
    rec.summary["band_ratio_at_t_end"] = hi / lo;
}

inline void run_equilibrium(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    const double var_y = model.sigma * model.sigma / (2.0 * model.gamma);
    std::optional<double> var_x;
    if (model.is_quadratic())
        var_x = var_y / (model.V.quadratic_coefficient() + model.W.quadratic_coefficient());
    if (model.d == 1) {
        FixedPointOptions fp = c.fixed_point;
        fp.threads = c.threads;
        const FixedPointDensity density = solve_fixed_point(model, fp);
        CsvWriter w = open_csv(rec, "equilibrium_density.csv", {"x", "nu"});
        for (std::size_t k = 0; k < density.points(); ++k) w.row(density.x(k), density.values[k]);
        const nlohmann::json fp_summary = {{"variance", density.variance()},
                                           {"mean", density.mean()},
                                           {"mass", density.mass()},
                                           {"iterations", density.iterations},
                                           {"residual", density.residual},
                                           {"points", density.points()},
                                           {"lo", density.lo},
                                           {"hi", density.hi}};
        rec.summary["fixed_point"] = fp_summary;
        std::ofstream(rec.path_of("equilibrium_summary.json")) << fp_summary.dump(2) << '\n';
        if (!var_x) var_x = density.variance();
    }
    rec.summary["predicted"] = {{"var_x", var_x ? nlohmann::json(*var_x) : nlohmann::json(nullptr)},
                                {"var_y", var_y}};

    for (std::size_t n : c.N) {
        const SimulationRun run = simulate_interacting(model, sim_options(c, n, c.t_step));
        nlohmann::json entry;
        for (const char* metric : {"var_x", "var_y"}) {
            const MetricTable& m = run.metric(metric);
            write_metric(rec, std::string("equilibrium_") + metric + suffix(n) + ".csv", run.t, m);
            const std::size_t last = run.t.size() - 1;
            const std::optional<double> target = std::string(metric) == "var_x" ? var_x : std::optional(var_y);
            const double mean = m.mean(last), se = m.stderr_of_mean(last);
            entry[metric] = {{"mean", mean}, {"stderr", se}};
            if (target && se > 0.0) entry[metric]["z"] = (mean - *target) / se;
        }
        rec.summary["long_run"][std::to_string(n)] = entry;
    }
}

inline void run_rates(RunRecord& rec, const ModelSpec& model) {
    const nlohmann::json report = to_json(rate_report(model, rec.config.N.front()));
    rec.summary["report"] = report;
    std::ofstream(rec.path_of("rates.json")) << report.dump(2) << '\n';
}

inline void run_simulate(RunRecord& rec, const ModelSpec& model) {
    const ExperimentConfig& c = rec.config;
    for (std::size_t n : c.N) {
        const SimulationRun run = simulate_interacting(model, sim_options(c, n, c.t_step));
        CsvWriter w = open_csv(rec, "trajectories" + suffix(n) + ".csv", {"replica", "t", "metric", "value"});
        for (std::size_t r = 0; r < c.replicas; ++r)
            for (std::size_t k = 0; k < run.t.size(); ++k)
                for (const auto& m : run.metrics) w.row(static_cast<long long>(r), run.t[k], m.name, m.by_replica[r][k]);
    }
}

} // namespace detail

/// Runs one experiment, writes its CSV series and manifest.json into
/// config.out, and returns the record.
inline RunRecord run(const ExperimentConfig& config) {
    config.validate();
    if (config.m0 == InitialChoice::Gibbs && config.kind != ExperimentKind::EntropyDecay)
        throw ConfigError("m0 = gibbs is only supported by the entropy experiment");
    const ModelSpec model = config.model();
    const auto start = std::chrono::steady_clock::now();

    RunRecord rec;
    rec.config = config;
    rec.seed = config.seed;
    rec.out_dir = config.out;
    std::error_code ec;
    std::filesystem::create_directories(rec.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + config.out + ": " + ec.message());

    switch (config.kind) {
    case ExperimentKind::EntropyDecay: detail::run_entropy(rec, model); break;
    case ExperimentKind::ChaosScaling: detail::run_chaos(rec, model); break;
    case ExperimentKind::ConfidenceCurve: detail::run_confidence(rec, model); break;
    case ExperimentKind::CouplingGrowth: detail::run_coupling(rec, model); break;
    case ExperimentKind::EquilibriumMarginal: detail::run_equilibrium(rec, model); break;
    case ExperimentKind::RateCertificate: detail::run_rates(rec, model); break;
    case ExperimentKind::Simulate: detail::run_simulate(rec, model); break;
    }

    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream manifest(rec.path_of("manifest.json"));
    manifest << to_json(rec).dump(2) << '\n';
    if (!manifest) throw std::runtime_error("cannot write manifest.json");
    return rec;
}

} // namespace vfp::lab
