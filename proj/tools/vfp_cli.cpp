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

// vfp: experiment runner for the mean-field kinetic Langevin toolkit.
//
//   vfp <simulate|rates|equilibrium|chaos|entropy|confidence|coupling>
//       [--config FILE] [--seed U64] [--out DIR] [--threads N]
//
// Exit codes: 0 success, 2 configuration or model error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "vfp/errors.hpp"
#include "vfp/lab/config.hpp"
#include "vfp/lab/run.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct GlobalFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

int run_subcommand(vfp::lab::ExperimentKind kind, const GlobalFlags& flags) {
    vfp::lab::ExperimentConfig cfg;
    if (!flags.config.empty()) cfg = vfp::lab::load_config(flags.config);
    cfg.kind = kind;
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    if (flags.threads) cfg.threads = *flags.threads;

    const vfp::lab::RunRecord rec = vfp::lab::run(cfg);
    if (kind == vfp::lab::ExperimentKind::RateCertificate) {
        std::cout << rec.summary["report"].dump(2) << '\n';
        return 0;
    }
    nlohmann::json brief;
    brief["manifest"] = rec.path_of("manifest.json").string();
    for (const auto& [name, fit] : rec.fits) brief["fits"][name] = vfp::lab::to_json(fit);
    brief["summary"] = rec.summary;
    brief["wall_clock_seconds"] = rec.wall_clock_seconds;
    std::cout << brief.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field kinetic Langevin experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags flags;
    app.add_option("--config", flags.config, "experiment config (key = value lines or a JSON object)")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", flags.seed, "root seed, overrides the config");
    app.add_option("--out", flags.out, "output directory, overrides the config");
    app.add_option("--threads", flags.threads, "worker threads, overrides the config")->check(CLI::PositiveNumber);

    using vfp::lab::ExperimentKind;
    const std::vector<std::pair<ExperimentKind, const char*>> commands{
        {ExperimentKind::Simulate, "trajectory diagnostics of the N-particle system"},
        {ExperimentKind::RateCertificate, "explicit and spectral convergence rates as JSON"},
        {ExperimentKind::EquilibriumMarginal, "self-consistent equilibrium density and long-run marginals"},
        {ExperimentKind::ChaosScaling, "W2 between one particle and the nonlinear law against N"},
        {ExperimentKind::EntropyDecay, "relative entropy to the Gibbs law along the Gaussian flow"},
        {ExperimentKind::ConfidenceCurve, "exceedance frequencies of W2(empirical, equilibrium)"},
        {ExperimentKind::CouplingGrowth, "growth of the synchronous coupling distance in time"},
    };
    std::optional<ExperimentKind> chosen;
    for (const auto& [kind, help] : commands) {
        CLI::App* sub = app.add_subcommand(vfp::lab::to_string(kind), help);
        sub->callback([&chosen, kind = kind] { chosen = kind; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        return run_subcommand(*chosen, flags);
    } catch (const vfp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const vfp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const vfp::ModelError& e) {
        std::cerr << "model error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
