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
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "vfp/errors.hpp"
#include "vfp/model.hpp"

namespace vfp {

/// Constants of the abstract entropic hypocoercivity estimate.
struct HypocoercivityParams {
    unsigned Nc = 1;
    double lambda = 1.0;
    double Lambda = 1.0;
    double m = 0.0;
    double rho = 1.0;
    double eta = 1.0;

    void validate() const {
        if (Nc == 0) throw std::invalid_argument("Nc must be positive");
        if (!(lambda > 0.0) || !(Lambda > 0.0) || !(rho > 0.0) || !(eta > 0.0) || !(m >= 0.0))
            throw std::invalid_argument("hypocoercivity constants must be positive");
        if (lambda > Lambda) throw std::invalid_argument("lambda must not exceed Lambda");
    }
};

/// kappa = (rho/eta) ((100/lambda)(Nc^2 + Lambda^2/lambda + m))^(-20 Nc^2), in log space.
inline double kappa_thm10(const HypocoercivityParams& p) {
    p.validate();
    const double nc2 = static_cast<double>(p.Nc) * static_cast<double>(p.Nc);
    const double base = (100.0 / p.lambda) * (nc2 + p.Lambda * p.Lambda / p.lambda + p.m);
    return std::exp(std::log(p.rho) - std::log(p.eta) - 20.0 * nc2 * std::log(base));
}

/// Uniform log-Sobolev constant of the Gibbs laws: sigma^2 / (4 gamma min(c1 - 2 c2, 1)).
inline double lsi_eta(const ModelSpec& model) {
    return model.sigma * model.sigma / (4.0 * model.gamma * std::min(model.convexity(), 1.0));
}

/// Explicit (very rough) entropic rate from the hypocoercivity constants.
inline double chi_bound(const ModelSpec& model) {
    const double s2 = model.sigma * model.sigma;
    const double h = model.hessV_sup + 2.0 * model.hessW_sup;
    const double inner = 100.0 * (2.0 + 2.0 / s2 + model.gamma * model.gamma + h * h);
    return std::exp(std::log(2.0 * std::min(model.convexity(), 1.0)) - std::log(s2) - 20.0 * std::log(inner));
}

/// Constants used for the kinetic N-particle generator.
inline HypocoercivityParams kinetic_params(const ModelSpec& model) {
    const double h = model.hessV_sup + 2.0 * model.hessW_sup;
    HypocoercivityParams p;
    p.m = 2.0 / (model.sigma * model.sigma) + model.gamma * model.gamma + h * h;
    p.eta = lsi_eta(model);
    return p;
}

struct SpectrumEntry {
    std::complex<double> value;
    std::size_t multiplicity = 0;
};

struct SpectrumReport {
    std::vector<SpectrumEntry> spectrum;
    double gap = 0.0;
    double chi_exact = 0.0;
    bool critical = false; ///< gamma^2 = 4 min(a, a+b): a polynomial prefactor is missing
};

inline constexpr double kCriticalTolerance = 1e-12;

/// Eigenvalues of A = [[0, -I], [aI + b(I - pi), gamma I]] on R^{2dN}.
///
/// A stiffness eigenvalue l contributes gamma/2 +- sqrt(gamma^2/4 - l); l = a
/// has multiplicity d and l = a+b has multiplicity d(N-1). Equal eigenvalues
/// are merged.
inline SpectrumReport spectrum_quadratic(double a, double b, double gamma, std::size_t N, std::size_t d) {
    if (!(a > 0.0)) throw ModelError("spectrum needs a > 0");
    if (!(a + b > 0.0)) throw ModelError("spectrum needs a + b > 0");
    if (!(gamma > 0.0)) throw ModelError("spectrum needs gamma > 0");
    if (N == 0 || d == 0) throw ModelError("spectrum needs N >= 1 and d >= 1");

    SpectrumReport out;
    auto add = [&](std::complex<double> z, std::size_t mult) {
        for (auto& e : out.spectrum)
            if (e.value == z) {
                e.multiplicity += mult;
                return;
            }
        out.spectrum.push_back({z, mult});
    };
    const double half = 0.5 * gamma;
    for (const auto& [lam, mult] : {std::pair{a, d}, std::pair{a + b, d * (N - 1)}}) {
        if (mult == 0) continue;
        const std::complex<double> root = std::sqrt(std::complex<double>(half * half - lam, 0.0));
        add(half + root, mult);
        add(half - root, mult);
    }
    std::sort(out.spectrum.begin(), out.spectrum.end(), [](const SpectrumEntry& l, const SpectrumEntry& r) {
        return l.value.real() != r.value.real() ? l.value.real() < r.value.real() : l.value.imag() < r.value.imag();
    });
    out.gap = out.spectrum.front().value.real();

    const double lmin = std::min(a, a + b);
    const double disc = half * half - lmin;
    out.critical = std::abs(disc) <= kCriticalTolerance * std::max(half * half, lmin);
    out.chi_exact = disc < 0.0 ? half : half - std::sqrt(disc);
    return out;
}

struct RateReport {
    std::optional<double> chi_exact;
    double chi_bound = 0.0;
    double eta = 0.0;
    double kappa = 0.0;
    std::vector<SpectrumEntry> spectrum;
    std::optional<double> gap;
    bool critical = false;
};

/// Full certificate; the spectral part is filled for quadratic models only.
inline RateReport rate_report(const ModelSpec& model, std::size_t N) {
    RateReport r;
    r.chi_bound = chi_bound(model);
    r.eta = lsi_eta(model);
    r.kappa = kappa_thm10(kinetic_params(model));
    if (model.is_quadratic()) {
        const auto s = spectrum_quadratic(model.V.quadratic_coefficient(), model.W.quadratic_coefficient(),
                                          model.gamma, N, model.d);
        r.chi_exact = s.chi_exact;
        r.spectrum = s.spectrum;
        r.gap = s.gap;
        r.critical = s.critical;
    }
    return r;
}

inline nlohmann::json to_json(const RateReport& r) {
    nlohmann::json j;
    j["chi_exact"] = r.chi_exact ? nlohmann::json(*r.chi_exact) : nlohmann::json(nullptr);
    j["chi_bound"] = r.chi_bound;
    j["eta"] = r.eta;
    j["kappa"] = r.kappa;
    j["gap"] = r.gap ? nlohmann::json(*r.gap) : nlohmann::json(nullptr);
    j["critical"] = r.critical;
    j["spectrum"] = nlohmann::json::array();
    for (const auto& e : r.spectrum)
        j["spectrum"].push_back({{"re", e.value.real()}, {"im", e.value.imag()}, {"multiplicity", e.multiplicity}});
    return j;
}

} // namespace vfp
