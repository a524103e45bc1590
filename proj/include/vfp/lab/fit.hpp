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
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfp/errors.hpp"

namespace vfp::lab {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0; ///< 1 when the response is constant
};

struct ExponentialFit {
    double rate = 0.0;      ///< -slope of ln(value) against t
    double prefactor = 0.0; ///< exp(intercept)
    double r_squared = 1.0;
};

struct PowerLawFit {
    double slope = 0.0;
    double prefactor = 0.0;
    double r_squared = 1.0;
};

/// Closed interval of t used by a fit.
struct FitWindow {
    double lo = -INFINITY;
    double hi = INFINITY;
    bool contains(double t) const { return t >= lo && t <= hi; }
};

/// Ordinary least squares y = slope x + intercept.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
    if (x.size() < 2) throw std::invalid_argument("fit_line: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_line: abscissae are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    // relative threshold: a response flat to rounding counts as a perfect fit
    if (syy > 1e-24 * std::max(1.0, my * my) * n) f.r_squared = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    return f;
}

/// Least squares on (t, ln value) over the points with t in `window`.
inline ExponentialFit fit_exponential_rate(std::span<const double> t, std::span<const double> value,
                                           FitWindow window = {}) {
    if (t.size() != value.size()) throw std::invalid_argument("fit_exponential_rate: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!window.contains(t[k])) continue;
        if (!(value[k] > 0.0))
            throw NumericalError("fit_exponential_rate: nonpositive value " + std::to_string(value[k]) +
                                 " at t = " + std::to_string(t[k]));
        xs.push_back(t[k]);
        ys.push_back(std::log(value[k]));
    }
    if (xs.size() < 4) throw std::invalid_argument("fit_exponential_rate: need at least 4 points in the window");
    const LineFit line = fit_line(xs, ys);
    return {-line.slope, std::exp(line.intercept), line.r_squared};
}

/// Least squares on (ln N, ln value).
inline PowerLawFit fit_powerlaw(std::span<const double> n, std::span<const double> value) {
    if (n.size() != value.size()) throw std::invalid_argument("fit_powerlaw: size mismatch");
    if (std::set<double>(n.begin(), n.end()).size() < 3)
        throw std::invalid_argument("fit_powerlaw: need at least 3 distinct N");
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < n.size(); ++k) {
        if (!(n[k] > 0.0) || !(value[k] > 0.0))
            throw NumericalError("fit_powerlaw: nonpositive entry at index " + std::to_string(k));
        xs.push_back(std::log(n[k]));
        ys.push_back(std::log(value[k]));
    }
    const LineFit line = fit_line(xs, ys);
    return {line.slope, std::exp(line.intercept), line.r_squared};
}

} // namespace vfp::lab
