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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "vfp/lab/fit.hpp"

namespace {

using vfp::lab::FitWindow;

std::vector<double> grid(double lo, double hi, std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return t;
}

TEST(FitExponential, ExactSeries) {
    const auto t = grid(0, 10, 41);
    std::vector<double> v;
    for (double s : t) v.push_back(3.0 * std::exp(-0.5 * s));
    const auto f = vfp::lab::fit_exponential_rate(t, v);
    EXPECT_NEAR(f.rate, 0.5, 1e-10);
    EXPECT_NEAR(f.prefactor, 3.0, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-10);
}

TEST(FitExponential, ConstantSeriesHasZeroRate) {
    const auto t = grid(0, 4, 9);
    const std::vector<double> v(t.size(), 2.5);
    const auto f = vfp::lab::fit_exponential_rate(t, v);
    EXPECT_NEAR(f.rate, 0.0, 1e-14);
    EXPECT_NEAR(f.prefactor, 2.5, 1e-12);
}

TEST(FitExponential, NoisySeries) {
    std::mt19937_64 rng(20260117);
    std::uniform_real_distribution<double> delta(-0.01, 0.01);
    const auto t = grid(0, 10, 101);
    std::vector<double> v;
    for (double s : t) v.push_back(std::exp(-0.5 * s) * (1.0 + delta(rng)));
    const auto f = vfp::lab::fit_exponential_rate(t, v);
    EXPECT_GE(f.rate, 0.45);
    EXPECT_LE(f.rate, 0.55);
}

TEST(FitExponential, WindowSelectsPoints) {
    // a kink at t = 5: only the tail rate survives the window
    const auto t = grid(0, 10, 21);
    std::vector<double> v;
    for (double s : t) v.push_back(s < 5 ? std::exp(-2.0 * s) : std::exp(-10.0) * std::exp(-0.25 * (s - 5)));
    const auto f = vfp::lab::fit_exponential_rate(t, v, FitWindow{5, 10});
    EXPECT_NEAR(f.rate, 0.25, 1e-10);
}

TEST(FitExponential, Errors) {
    const auto t = grid(0, 1, 11);
    std::vector<double> v(t.size(), 1.0);
    v[2] = 0.0;
    EXPECT_THROW(vfp::lab::fit_exponential_rate(t, v), vfp::NumericalError);
    // the zero lies outside the window, so it is ignored
    EXPECT_NO_THROW(vfp::lab::fit_exponential_rate(t, v, FitWindow{0.5, 1.0}));
    EXPECT_THROW(vfp::lab::fit_exponential_rate(t, v, FitWindow{0.75, 1.0}), std::invalid_argument);
    EXPECT_THROW(vfp::lab::fit_exponential_rate(std::vector<double>{0, 1, 2}, std::vector<double>{1, 1, 1}),
                 std::invalid_argument);
}

TEST(FitPowerLaw, ExactInverseSquareRoot) {
    std::vector<double> n{64, 128, 256, 512, 1024}, v;
    for (double x : n) v.push_back(0.7 / std::sqrt(x));
    const auto f = vfp::lab::fit_powerlaw(n, v);
    EXPECT_NEAR(f.slope, -0.5, 1e-10);
    EXPECT_NEAR(f.prefactor, 0.7, 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(FitPowerLaw, ConstantHasZeroSlope) {
    const std::vector<double> n{2, 4, 8}, v{5, 5, 5};
    EXPECT_NEAR(vfp::lab::fit_powerlaw(n, v).slope, 0.0, 1e-14);
}

TEST(FitPowerLaw, Errors) {
    EXPECT_THROW(vfp::lab::fit_powerlaw(std::vector<double>{2, 2, 4}, std::vector<double>{1, 2, 3}),
                 std::invalid_argument);
    EXPECT_THROW(vfp::lab::fit_powerlaw(std::vector<double>{1, 2, 4}, std::vector<double>{1, -2, 3}),
                 vfp::NumericalError);
}

TEST(FitLine, RSquaredOfScatter) {
    // y = x plus alternating +-1: r^2 = sxy^2 / (sxx syy) computed by hand
    const std::vector<double> x{0, 1, 2, 3}, y{1, 0, 3, 2};
    const auto f = vfp::lab::fit_line(x, y);
    // mean 1.5 for both; sxx = 5, syy = 5, sxy = 3
    EXPECT_NEAR(f.slope, 0.6, 1e-15);
    EXPECT_NEAR(f.r_squared, 9.0 / 25.0, 1e-15);
}

} // namespace
