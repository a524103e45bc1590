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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "vfp/transport.hpp"

namespace {

using vfp::EmpiricalCloud;
using vfp::GaussianLaw;
using vfp::oracle::brute_force_w2;
using vfp::oracle::kl_quadrature_1d;

EmpiricalCloud random_cloud(std::mt19937_64& rng, std::size_t n, std::size_t dim, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    EmpiricalCloud cloud(n, dim);
    for (double& v : cloud.points) v = normal(rng);
    return cloud;
}

// Textbook O(n^3) Hungarian method with potentials, used as a second oracle
// for sizes where enumeration is impossible.
double hungarian_cost(const std::vector<double>& cost, std::size_t n) {
    const double inf = INFINITY;
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j)
                if (!used[j]) {
                    const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += cost[(p[j] - 1) * n + (j - 1)];
    return total;
}

GaussianLaw gaussian_1d(double mean, double var) {
    return GaussianLaw::make(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Constant(1, 1, var));
}

GaussianLaw random_gaussian(std::mt19937_64& rng, int k) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) a(i, j) = normal(rng);
    Eigen::VectorXd mean(k);
    for (int i = 0; i < k; ++i) mean[i] = normal(rng);
    return GaussianLaw::make(mean, a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(k, k));
}

TEST(Assignment, SinglePointCostIsSquaredDistance) {
    EmpiricalCloud a(1, 2, {1.0, 2.0}), b(1, 2, {4.0, -2.0});
    EXPECT_DOUBLE_EQ(vfp::w2_empirical(a, b).cost, 9.0 + 16.0);
}

TEST(Assignment, ShuffledCopyHasZeroCost) {
    std::mt19937_64 rng(3);
    const EmpiricalCloud a = random_cloud(rng, 200, 3);
    std::vector<std::size_t> perm(a.n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EmpiricalCloud b(a.n, a.dim);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t k = 0; k < a.dim; ++k) b.points[perm[i] * a.dim + k] = a.points[i * a.dim + k];
    const auto plan = vfp::w2_empirical(a, b);
    EXPECT_EQ(plan.cost, 0.0);
    for (std::size_t i = 0; i < a.n; ++i) EXPECT_EQ(plan.assignment[i], perm[i]);
}

TEST(Assignment, MatchesFactorialEnumerationForSmallClouds) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + trial % 6;
        const std::size_t dim = 1 + trial % 3;
        const EmpiricalCloud a = random_cloud(rng, n, dim), b = random_cloud(rng, n, dim, 1.5);
        EXPECT_NEAR(vfp::w2_empirical(a, b).cost, brute_force_w2(a, b), 1e-10) << "n=" << n;
    }
}

TEST(Assignment, HandlesTiesAndDegenerateCosts) {
    // all points equal: every permutation is optimal
    EmpiricalCloud a(5, 1, {1, 1, 1, 1, 1}), b(5, 1, {2, 2, 2, 2, 2});
    EXPECT_DOUBLE_EQ(vfp::w2_empirical(a, b).cost, 1.0);
    // integer lattice with many equal costs
    EmpiricalCloud c(6, 1, {0, 1, 2, 3, 4, 5}), e(6, 1, {5, 4, 3, 2, 1, 0});
    EXPECT_NEAR(vfp::w2_empirical(c, e).cost, brute_force_w2(c, e), 1e-12);
}

TEST(Assignment, AgreesWithHungarianOracleOnModerateSizes) {
    std::mt19937_64 rng(5);
    for (std::size_t n : {7u, 20u, 64u, 150u}) {
        for (int trial = 0; trial < 3; ++trial) {
            const EmpiricalCloud a = random_cloud(rng, n, 2), b = random_cloud(rng, n, 2, 0.7);
            std::vector<double> cost(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < 2; ++k) s += std::pow(a.points[i * 2 + k] - b.points[j * 2 + k], 2);
                    cost[i * n + j] = s;
                }
            const auto assignment = vfp::solve_assignment(cost, n);
            std::vector<std::size_t> sorted = assignment;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += cost[i * n + assignment[i]];
            EXPECT_NEAR(total, hungarian_cost(cost, n), 1e-9);
        }
    }
}

TEST(Assignment, LineFastPathMatchesGeneralSolver) {
    std::mt19937_64 rng(12);
    for (std::size_t n : {1u, 5u, 40u, 300u}) {
        EmpiricalCloud a = random_cloud(rng, n, 1), b = random_cloud(rng, n, 1, 2.0);
        if (n > 4) a.points[3] = a.points[1]; // a tie
        std::vector<double> cost(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::pow(a.points[i] - b.points[j], 2);
        const auto plan = vfp::w2_empirical(a, b);
        std::vector<std::size_t> sorted = plan.assignment;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(sorted[i], i);
        EXPECT_NEAR(plan.cost * static_cast<double>(n), hungarian_cost(cost, n), 1e-9) << n;
        const auto general = vfp::solve_assignment(cost, n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost[i * n + general[i]];
        EXPECT_NEAR(plan.cost * static_cast<double>(n), total, 1e-9) << n;
    }
}

TEST(Assignment, PlanCostMatchesAssignment) {
    std::mt19937_64 rng(8);
    const EmpiricalCloud a = random_cloud(rng, 50, 2), b = random_cloud(rng, 50, 2);
    const auto plan = vfp::w2_empirical(a, b);
    double total = 0.0;
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t k = 0; k < 2; ++k) total += std::pow(a.points[i * 2 + k] - b.points[plan.assignment[i] * 2 + k], 2);
    EXPECT_NEAR(plan.cost, total / 50.0, 1e-12);
}

TEST(Assignment, NeverWorseThanIdentityCoupling) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> size(1, 64);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = size(rng);
        const EmpiricalCloud a = random_cloud(rng, n, 2);
        EmpiricalCloud b = random_cloud(rng, n, 2, 0.3);
        for (std::size_t k = 0; k < b.points.size(); ++k) b.points[k] += a.points[k];
        EXPECT_LE(vfp::w2_empirical(a, b).cost, vfp::identity_coupling_cost(a, b));
    }
}

TEST(Assignment, MetricAxioms) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 10 + trial;
        const EmpiricalCloud a = random_cloud(rng, n, 2), b = random_cloud(rng, n, 2, 2.0),
                             c = random_cloud(rng, n, 2, 0.5);
        const double ab = std::sqrt(vfp::w2_empirical(a, b).cost);
        const double ba = std::sqrt(vfp::w2_empirical(b, a).cost);
        const double bc = std::sqrt(vfp::w2_empirical(b, c).cost);
        const double ac = std::sqrt(vfp::w2_empirical(a, c).cost);
        EXPECT_NEAR(ab, ba, 1e-12);
        EXPECT_LE(ac, ab + bc + 1e-9);
    }
}

TEST(Assignment, RejectsMismatchedClouds) {
    EmpiricalCloud a(3, 1, {0, 1, 2}), b(2, 1, {0, 1}), c(3, 2, {0, 1, 2, 3, 4, 5});
    EXPECT_THROW(vfp::w2_empirical(a, b), std::invalid_argument);
    EXPECT_THROW(vfp::w2_empirical(a, c), std::invalid_argument);
    EXPECT_THROW(EmpiricalCloud(1, 1, {NAN}), std::invalid_argument);
}

TEST(GaussianW2, IdenticalLawsAreAtZeroDistance) {
    std::mt19937_64 rng(2);
    const GaussianLaw g = random_gaussian(rng, 3);
    EXPECT_NEAR(vfp::w2_gaussian(g, g), 0.0, 1e-7);
}

TEST(GaussianW2, OneDimensionalFormula) {
    EXPECT_NEAR(vfp::w2_gaussian(gaussian_1d(0, 1), gaussian_1d(0, 4)), 1.0, 1e-12);
    EXPECT_NEAR(vfp::w2_gaussian(gaussian_1d(1, 1), gaussian_1d(-2, 9)), std::sqrt(9.0 + 4.0), 1e-12);
}

TEST(GaussianW2, CommutingCovariancesReduceToCoordinateWise) {
    const GaussianLaw g1 = GaussianLaw::make(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 4).asDiagonal().toDenseMatrix());
    const GaussianLaw g2 = GaussianLaw::make(Eigen::Vector2d(1, 0), Eigen::Vector2d(9, 1).asDiagonal().toDenseMatrix());
    EXPECT_NEAR(vfp::w2_gaussian(g1, g2), std::sqrt(1.0 + 4.0 + 1.0), 1e-12);
}

TEST(GaussianW2, RejectsNonPsdCovariance) {
    GaussianLaw bad{Eigen::VectorXd::Zero(2), Eigen::Matrix2d{{1, 2}, {2, 1}}};
    EXPECT_THROW(vfp::w2_gaussian(bad, GaussianLaw::standard(2)), vfp::NumericalError);
}

TEST(GaussianKL, ZeroForEqualLaws) {
    std::mt19937_64 rng(4);
    const GaussianLaw g = random_gaussian(rng, 4);
    EXPECT_NEAR(vfp::kl_gaussian(g, g), 0.0, 1e-10);
}

TEST(GaussianKL, MatchesQuadratureInOneDimension) {
    const double oracle = kl_quadrature_1d(0, 1, 0, 2);
    EXPECT_NEAR(oracle, 0.5 * (0.5 - 1.0 + std::log(2.0)), 1e-9);
    EXPECT_NEAR(vfp::kl_gaussian(gaussian_1d(0, 1), gaussian_1d(0, 2)), oracle, 1e-6);
    EXPECT_NEAR(vfp::kl_gaussian(gaussian_1d(0, 1), gaussian_1d(0, 2)), 0.0965735902799727, 1e-12);
    EXPECT_NEAR(vfp::kl_gaussian(gaussian_1d(0.7, 0.3), gaussian_1d(-1.0, 2.5)), kl_quadrature_1d(0.7, 0.3, -1.0, 2.5), 1e-6);
}

TEST(GaussianKL, TensorizesOverProducts) {
    std::mt19937_64 rng(6);
    const GaussianLaw g1 = random_gaussian(rng, 2), g2 = random_gaussian(rng, 2);
    const double single = vfp::kl_gaussian(g1, g2);
    GaussianLaw p1 = g1, p2 = g2;
    for (int n = 2; n <= 6; ++n) {
        p1 = vfp::product(p1, g1);
        p2 = vfp::product(p2, g2);
        EXPECT_NEAR(vfp::kl_gaussian(p1, p2), n * single, 1e-10 * std::max(1.0, n * single));
    }
}

TEST(GaussianKL, NonNegativeOnRandomPairs) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const GaussianLaw g1 = random_gaussian(rng, 3), g2 = random_gaussian(rng, 3);
        EXPECT_GT(vfp::kl_gaussian(g1, g2), 0.0);
    }
}

TEST(GaussianKL, RejectsSingularTarget) {
    GaussianLaw singular{Eigen::VectorXd::Zero(2), Eigen::Matrix2d{{1, 1}, {1, 1}}};
    EXPECT_THROW(vfp::kl_gaussian(GaussianLaw::standard(2), singular), vfp::NumericalError);
}

TEST(GaussianL1, SelfDistanceIsZero) {
    std::mt19937_64 rng(7);
    const GaussianLaw g = random_gaussian(rng, 2);
    EXPECT_NEAR(vfp::l1_gaussian_grid(g, g), 0.0, 1e-8);
    EXPECT_NEAR(vfp::l1_gaussian_grid(gaussian_1d(0.3, 2.0), gaussian_1d(0.3, 2.0)), 0.0, 1e-8);
}

TEST(GaussianL1, DisjointSupportsGiveTwo) {
    EXPECT_NEAR(vfp::l1_gaussian_grid(gaussian_1d(0, 1), gaussian_1d(20, 1)), 2.0, 1e-6);
}

TEST(GaussianL1, ShiftedUnitGaussiansMatchErfFormula) {
    // |N(0,1) - N(m,1)|_1 = 2 erf(m / (2 sqrt 2)); the midpoint rule loses
    // O(h^2) at the crossing point of the two densities.
    for (double m : {0.1, 0.5, 1.0, 3.0})
        EXPECT_NEAR(vfp::l1_gaussian_grid(gaussian_1d(0, 1), gaussian_1d(m, 1)), 2.0 * std::erf(m / (2.0 * std::sqrt(2.0))),
                    1e-5);
}

TEST(GaussianL1, PinskerHoldsOnRandomPairs) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> mean(-2, 2), var(0.2, 3.0);
    for (int trial = 0; trial < 100; ++trial) {
        const GaussianLaw g1 = gaussian_1d(mean(rng), var(rng)), g2 = gaussian_1d(mean(rng), var(rng));
        EXPECT_LE(vfp::l1_gaussian_grid(g1, g2), std::sqrt(2.0 * vfp::kl_gaussian(g1, g2)));
    }
}

TEST(GaussianL1, RejectsHighDimensions) {
    EXPECT_THROW(vfp::l1_gaussian_grid(GaussianLaw::standard(3), GaussianLaw::standard(3)), std::invalid_argument);
}

} // namespace
