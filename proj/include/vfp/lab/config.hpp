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
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "vfp/dynamics.hpp"
#include "vfp/equilibrium.hpp"
#include "vfp/errors.hpp"
#include "vfp/lab/fit.hpp"
#include "vfp/model.hpp"

namespace vfp::lab {

enum class ExperimentKind {
    EntropyDecay,
    ChaosScaling,
    ConfidenceCurve,
    CouplingGrowth,
    EquilibriumMarginal,
    RateCertificate,
    Simulate, ///< plain trajectory diagnostics, backs the `simulate` subcommand
};

inline const char* to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::EntropyDecay: return "entropy";
    case ExperimentKind::ChaosScaling: return "chaos";
    case ExperimentKind::ConfidenceCurve: return "confidence";
    case ExperimentKind::CouplingGrowth: return "coupling";
    case ExperimentKind::EquilibriumMarginal: return "equilibrium";
    case ExperimentKind::RateCertificate: return "rates";
    case ExperimentKind::Simulate: return "simulate";
    }
    return "?";
}

inline ExperimentKind parse_kind(std::string_view s) {
    for (auto k : {ExperimentKind::EntropyDecay, ExperimentKind::ChaosScaling, ExperimentKind::ConfidenceCurve,
                   ExperimentKind::CouplingGrowth, ExperimentKind::EquilibriumMarginal,
                   ExperimentKind::RateCertificate, ExperimentKind::Simulate})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

enum class SurrogateChoice { Auto, Exact, Ensemble };

enum class InitialChoice { Product, Gibbs };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::RateCertificate;

    std::size_t d = 1;
    double gamma = 1.0;
    double sigma = 1.0;
    std::string V = "quadratic(1)";
    std::string W = "quadratic(0)";

    std::vector<std::size_t> N{64};
    double t_end = 1.0;
    double t_step = 0.1; ///< record interval
    double dt = 1e-3;
    std::size_t replicas = 16;
    Stepper stepper = Stepper::EulerMaruyama;

    SurrogateChoice surrogate = SurrogateChoice::Auto;
    std::size_t ensemble_factor = 16;

    std::vector<double> epsilon{0.5};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out = "out";

    InitialChoice m0 = InitialChoice::Product;
    InitialLaw m0_law;
    std::optional<FitWindow> fit_window; ///< default: last half of the t grid
    std::optional<double> lyapunov_epsilon;
    FixedPointOptions fixed_point;

    ModelSpec model() const;
    void validate() const;
};

/// Parses "quadratic(a)" or "coulomb(strength,mollifier)".
inline Potential parse_potential(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    const std::string_view s = trim(text);
    const auto open = s.find('(');
    if (open == std::string_view::npos || s.back() != ')')
        throw ConfigError("potential '" + std::string(s) + "' is not of the form name(args)");
    const std::string_view name = trim(s.substr(0, open));
    std::string_view rest = s.substr(open + 1, s.size() - open - 2);
    std::vector<double> args;
    while (true) {
        const auto comma = rest.find(',');
        const std::string_view tok = trim(rest.substr(0, comma));
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
            throw ConfigError("bad number '" + std::string(tok) + "' in potential '" + std::string(s) + "'");
        args.push_back(v);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    if (name == "quadratic") {
        if (args.size() != 1) throw ConfigError("quadratic takes one coefficient");
        return Potential::quadratic(args[0]);
    }
    if (name == "coulomb") {
        if (args.size() != 2) throw ConfigError("coulomb takes (strength, mollifier)");
        if (!(args[1] > 0.0)) throw ConfigError("coulomb mollifier must be > 0");
        return Potential::mollified_coulomb(args[0], args[1]);
    }
    throw ConfigError("unknown potential family '" + std::string(name) + "'");
}

inline ModelSpec ExperimentConfig::model() const {
    return build_model(d, gamma, sigma, parse_potential(V), parse_potential(W));
}

inline void ExperimentConfig::validate() const {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be a positive number");
    };
    if (d == 0) throw ConfigError("d must be >= 1");
    positive(gamma, "gamma");
    positive(sigma, "sigma");
    if (N.empty()) throw ConfigError("N list is empty");
    for (std::size_t k = 0; k < N.size(); ++k) {
        if (N[k] == 0) throw ConfigError("N entries must be >= 1");
        if (k > 0 && N[k] <= N[k - 1]) throw ConfigError("N list must be strictly ascending");
    }
    positive(t_end, "t_end");
    positive(t_step, "t_step");
    positive(dt, "dt");
    auto whole = [](double ratio) { return std::abs(ratio - std::round(ratio)) <= 1e-6 * std::max(1.0, ratio); };
    if (!whole(t_step / dt) || t_step < dt * (1 - 1e-9)) throw ConfigError("t_step must be a whole multiple of dt");
    if (!whole(t_end / t_step)) throw ConfigError("t_end must be a whole multiple of t_step");
    if (replicas == 0) throw ConfigError("replicas must be >= 1");
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (ensemble_factor == 0) throw ConfigError("ensemble_factor must be >= 1");
    if (epsilon.empty()) throw ConfigError("epsilon list is empty");
    for (double e : epsilon) positive(e, "epsilon entries");
    positive(m0_law.var_x, "m0_var_x");
    positive(m0_law.var_y, "m0_var_y");
    if (!std::isfinite(m0_law.mean_x) || !std::isfinite(m0_law.mean_y)) throw ConfigError("m0 means must be finite");
    if (fit_window && !(fit_window->lo < fit_window->hi)) throw ConfigError("fit_window needs lo < hi");
    if (lyapunov_epsilon) positive(*lyapunov_epsilon, "lyapunov_epsilon");
    if (fixed_point.points < 2) throw ConfigError("fp_points must be >= 2");
    if (fixed_point.half_width) positive(*fixed_point.half_width, "fp_half_width");
    positive(fixed_point.tol, "fp_tol");
    if (!(fixed_point.damping > 0.0 && fixed_point.damping <= 1.0)) throw ConfigError("fp_damping must lie in (0, 1]");
    if (fixed_point.max_iterations == 0) throw ConfigError("fp_max_iterations must be >= 1");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a number");
    return out;
}

inline std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("key '" + std::string(key) + "': '" + std::string(v) + "' is not a nonnegative integer");
    return out;
}

inline std::vector<std::string_view> split_list(std::string_view v) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = v.find(',');
        out.push_back(trim(v.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

inline void set_key(ExperimentConfig& c, std::string_view key, std::string_view v) {
    v = trim(v);
    if (key == "kind") c.kind = parse_kind(v);
    else if (key == "d") c.d = to_u64(key, v);
    else if (key == "gamma") c.gamma = to_double(key, v);
    else if (key == "sigma") c.sigma = to_double(key, v);
    else if (key == "V") c.V = std::string(v);
    else if (key == "W") c.W = std::string(v);
    else if (key == "N") {
        c.N.clear();
        for (auto tok : split_list(v)) c.N.push_back(to_u64(key, tok));
    } else if (key == "t_end") c.t_end = to_double(key, v);
    else if (key == "t_step") c.t_step = to_double(key, v);
    else if (key == "dt") c.dt = to_double(key, v);
    else if (key == "replicas") c.replicas = to_u64(key, v);
    else if (key == "stepper") {
        if (v == "euler") c.stepper = Stepper::EulerMaruyama;
        else if (v == "splitting") c.stepper = Stepper::Splitting;
        else throw ConfigError("stepper must be euler or splitting");
    } else if (key == "surrogate") {
        if (v == "auto") c.surrogate = SurrogateChoice::Auto;
        else if (v == "exact") c.surrogate = SurrogateChoice::Exact;
        else if (v == "ensemble") c.surrogate = SurrogateChoice::Ensemble;
        else throw ConfigError("surrogate must be auto, exact or ensemble");
    } else if (key == "ensemble_factor") c.ensemble_factor = to_u64(key, v);
    else if (key == "epsilon") {
        c.epsilon.clear();
        for (auto tok : split_list(v)) c.epsilon.push_back(to_double(key, tok));
    } else if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "threads") c.threads = to_u64(key, v);
    else if (key == "out") c.out = std::string(v);
    else if (key == "m0") {
        if (v == "product") c.m0 = InitialChoice::Product;
        else if (v == "gibbs") c.m0 = InitialChoice::Gibbs;
        else throw ConfigError("m0 must be product or gibbs");
    } else if (key == "m0_mean_x") c.m0_law.mean_x = to_double(key, v);
    else if (key == "m0_mean_y") c.m0_law.mean_y = to_double(key, v);
    else if (key == "m0_var_x") c.m0_law.var_x = to_double(key, v);
    else if (key == "m0_var_y") c.m0_law.var_y = to_double(key, v);
    else if (key == "fit_window") {
        const auto parts = split_list(v);
        if (parts.size() != 2) throw ConfigError("fit_window takes 'lo, hi'");
        c.fit_window = FitWindow{to_double(key, parts[0]), to_double(key, parts[1])};
    } else if (key == "lyapunov_epsilon") c.lyapunov_epsilon = to_double(key, v);
    else if (key == "fp_points") c.fixed_point.points = to_u64(key, v);
    else if (key == "fp_half_width") c.fixed_point.half_width = to_double(key, v);
    else if (key == "fp_tol") c.fixed_point.tol = to_double(key, v);
    else if (key == "fp_damping") c.fixed_point.damping = to_double(key, v);
    else if (key == "fp_max_iterations") c.fixed_point.max_iterations = to_u64(key, v);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// JSON scalars and arrays flattened to the key/value text form.
inline std::string json_value_text(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() || v.is_boolean()) return v.dump();
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) {
            if (e.is_array() || e.is_object()) throw ConfigError("key '" + key + "': nested arrays are not allowed");
            if (!s.empty()) s += ",";
            s += json_value_text(key, e);
        }
        return s;
    }
    throw ConfigError("key '" + key + "': unsupported JSON value");
}

} // namespace detail

/// Accepts either a JSON object or flat `key = value` lines ('#' starts a
/// comment). Unknown or repeated keys are errors.
inline ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig c;
    std::map<std::string, std::string> entries;
    const std::string_view body = detail::trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("JSON config must be an object");
        for (const auto& [k, v] : j.items()) entries[k] = detail::json_value_text(k, v);
    } else {
        std::size_t line_no = 0;
        std::istringstream in{std::string(text)};
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            std::string_view l = line;
            if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
            l = detail::trim(l);
            if (l.empty()) continue;
            const auto eq = l.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
            const std::string key(detail::trim(l.substr(0, eq)));
            if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            if (!entries.emplace(key, std::string(detail::trim(l.substr(eq + 1)))).second)
                throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' repeated");
        }
    }
    for (const auto& [k, v] : entries) detail::set_key(c, k, v);
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["kind"] = to_string(c.kind);
    j["d"] = c.d;
    j["gamma"] = c.gamma;
    j["sigma"] = c.sigma;
    j["V"] = c.V;
    j["W"] = c.W;
    j["N"] = c.N;
    j["t_end"] = c.t_end;
    j["t_step"] = c.t_step;
    j["dt"] = c.dt;
    j["replicas"] = c.replicas;
    j["stepper"] = to_string(c.stepper);
    j["surrogate"] = c.surrogate == SurrogateChoice::Auto ? "auto"
                     : c.surrogate == SurrogateChoice::Exact ? "exact"
                                                             : "ensemble";
    j["ensemble_factor"] = c.ensemble_factor;
    j["epsilon"] = c.epsilon;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["out"] = c.out;
    j["m0"] = c.m0 == InitialChoice::Product ? "product" : "gibbs";
    j["m0_mean_x"] = c.m0_law.mean_x;
    j["m0_mean_y"] = c.m0_law.mean_y;
    j["m0_var_x"] = c.m0_law.var_x;
    j["m0_var_y"] = c.m0_law.var_y;
    if (c.fit_window) j["fit_window"] = {c.fit_window->lo, c.fit_window->hi};
    if (c.lyapunov_epsilon) j["lyapunov_epsilon"] = *c.lyapunov_epsilon;
    j["fp_points"] = c.fixed_point.points;
    if (c.fixed_point.half_width) j["fp_half_width"] = *c.fixed_point.half_width;
    j["fp_tol"] = c.fixed_point.tol;
    j["fp_damping"] = c.fixed_point.damping;
    j["fp_max_iterations"] = c.fixed_point.max_iterations;
    return j;
}

} // namespace vfp::lab
