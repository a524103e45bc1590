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
#include <numeric>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vfp/errors.hpp"
#include "vfp/gaussian.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

/// n equally weighted points in R^dim, row-major.
struct EmpiricalCloud {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> points;

    EmpiricalCloud() = default;
    EmpiricalCloud(std::size_t n_, std::size_t dim_) : n(n_), dim(dim_), points(n_ * dim_, 0.0) {}
    EmpiricalCloud(std::size_t n_, std::size_t dim_, std::vector<double> pts)
        : n(n_), dim(dim_), points(std::move(pts)) {
        validate();
    }

    std::span<double> point(std::size_t i) { return {points.data() + i * dim, dim}; }
    std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }

    void validate() const {
        if (n == 0) throw std::invalid_argument("empirical cloud must have at least one point");
        if (points.size() != n * dim) throw std::invalid_argument("cloud storage does not match n x dim");
        for (double v : points)
            if (!std::isfinite(v)) throw std::invalid_argument("cloud has non-finite coordinates");
    }
};

struct TransportPlanResult {
    double cost = 0.0;                   ///< squared W2 between the two empirical measures
    std::vector<std::size_t> assignment; ///< point i of the first cloud goes to assignment[i]
};

inline constexpr std::size_t kMaxAssignmentSize = 8192;

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
///
/// Jonker-Volgenant: column reduction and reduction transfer seed the dual
/// prices, then each free row is matched by a Dijkstra-type shortest
/// augmenting path. Augmenting row reduction is left out on purpose; on
/// Euclidean costs it cycles through tiny price decrements and dominates the
/// run time.
inline std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
    if (cost.size() != n * n) throw std::invalid_argument("cost matrix must be n x n");
    if (n == 0) return {};
    if (n == 1) return {0};

    using idx = std::ptrdiff_t;
    const idx dim = static_cast<idx>(n);
    auto c = [&](idx i, idx j) { return cost[static_cast<std::size_t>(i * dim + j)]; };
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<idx> rowsol(n, -1), colsol(n, -1), free_rows(n), pred(n), collist(n);
    std::vector<int> matches(n, 0);
    std::vector<double> v(n), dist(n);

    for (idx j = dim - 1; j >= 0; --j) {
        double min = c(0, j);
        idx imin = 0;
        for (idx i = 1; i < dim; ++i)
            if (c(i, j) < min) {
                min = c(i, j);
                imin = i;
            }
        v[j] = min;
        if (++matches[imin] == 1) {
            rowsol[imin] = j;
            colsol[j] = imin;
        } else if (v[j] < v[rowsol[imin]]) {
            const idx j1 = rowsol[imin];
            rowsol[imin] = j;
            colsol[j] = imin;
            colsol[j1] = -1;
        } else {
            colsol[j] = -1;
        }
    }

    idx numfree = 0;
    for (idx i = 0; i < dim; ++i) {
        if (matches[i] == 0) {
            free_rows[numfree++] = i;
        } else if (matches[i] == 1) {
            const idx j1 = rowsol[i];
            double min = inf;
            for (idx j = 0; j < dim; ++j)
                if (j != j1) min = std::min(min, c(i, j) - v[j]);
            v[j1] -= min;
        }
    }

    for (idx f = 0; f < numfree; ++f) {
        const idx freerow = free_rows[f];
        for (idx j = 0; j < dim; ++j) {
            dist[j] = c(freerow, j) - v[j];
            pred[j] = freerow;
            collist[j] = j;
        }
        idx low = 0, up = 0, last = 0, endofpath = -1;
        bool found = false;
        double min = 0.0;
        do {
            if (up == low) {
                last = low - 1;
                min = dist[collist[up++]];
                for (idx k = up; k < dim; ++k) {
                    const idx j = collist[k];
                    const double h = dist[j];
                    if (h <= min) {
                        if (h < min) {
                            up = low;
                            min = h;
                        }
                        collist[k] = collist[up];
                        collist[up++] = j;
                    }
                }
                for (idx k = low; k < up; ++k)
                    if (colsol[collist[k]] < 0) {
                        endofpath = collist[k];
                        found = true;
                        break;
                    }
            }
            if (!found) {
                const idx j1 = collist[low++];
                const idx i = colsol[j1];
                const double h = c(i, j1) - v[j1] - min;
                for (idx k = up; k < dim; ++k) {
                    const idx j = collist[k];
                    const double v2 = c(i, j) - v[j] - h;
                    if (v2 < dist[j]) {
                        pred[j] = i;
                        if (v2 == min) {
                            if (colsol[j] < 0) {
                                endofpath = j;
                                found = true;
                                break;
                            }
                            collist[k] = collist[up];
                            collist[up++] = j;
                        }
                        dist[j] = v2;
                    }
                }
            }
        } while (!found);

        for (idx k = 0; k <= last; ++k) {
            const idx j1 = collist[k];
            v[j1] += dist[j1] - min;
        }
        for (;;) {
            const idx i = pred[endofpath];
            colsol[endofpath] = i;
            const idx j1 = endofpath;
            endofpath = rowsol[i];
            rowsol[i] = j1;
            if (i == freerow) break;
        }
    }

    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::size_t>(rowsol[i]);
    return out;
}

/// Exact squared W2 between two equal-size empirical measures.
/// Costs are pre-scaled to [0, 1] for the solver; the reported cost is
/// recomputed in original units along the optimal assignment.
inline TransportPlanResult w2_empirical(const EmpiricalCloud& a, const EmpiricalCloud& b, std::size_t threads = 1) {
    a.validate();
    b.validate();
    if (a.n != b.n) throw std::invalid_argument("w2_empirical needs clouds of equal size");
    if (a.dim != b.dim) throw std::invalid_argument("w2_empirical needs clouds of equal dimension");
    if (a.n > kMaxAssignmentSize) throw std::invalid_argument("cloud size exceeds the assignment cap of 8192");
    const std::size_t n = a.n, dim = a.dim;

    auto sqdist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double diff = a.points[i * dim + k] - b.points[j * dim + k];
            s += diff * diff;
        }
        return s;
    };

    TransportPlanResult result;
    if (dim == 1) {
        // the monotone rearrangement is optimal for a convex cost on the line
        auto order = [n](const std::vector<double>& p) {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
            return idx;
        };
        const auto ia = order(a.points), ib = order(b.points);
        result.assignment.resize(n);
        for (std::size_t k = 0; k < n; ++k) result.assignment[ia[k]] = ib[k];
    } else {
        std::vector<double> cost(n * n);
        parallel_for(n, threads, [&](std::size_t i) {
            for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = sqdist(i, j);
        });
        const double max_cost = *std::max_element(cost.begin(), cost.end());
        if (max_cost > 0.0)
            for (double& v : cost) v /= max_cost;
        result.assignment = solve_assignment(cost, n);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += sqdist(i, result.assignment[i]);
    result.cost = total / static_cast<double>(n);
    return result;
}

/// Mean squared distance along the identity pairing a_i <-> b_i.
inline double identity_coupling_cost(const EmpiricalCloud& a, const EmpiricalCloud& b) {
    if (a.n != b.n || a.dim != b.dim) throw std::invalid_argument("clouds differ in shape");
    double total = 0.0;
    for (std::size_t i = 0; i < a.n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.dim; ++k) {
            const double diff = a.points[i * a.dim + k] - b.points[i * a.dim + k];
            s += diff * diff;
        }
        total += s;
    }
    return total / static_cast<double>(a.n);
}

namespace detail {

inline void require_psd(const GaussianLaw& g) { (void)GaussianLaw::make(g.mean, g.cov); }

} // namespace detail

/// Closed-form W2 between Gaussians (Bures-Wasserstein).
inline double w2_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
    if (g1.dim() != g2.dim()) throw std::invalid_argument("w2_gaussian needs equal dimensions");
    detail::require_psd(g1);
    detail::require_psd(g2);
    const Eigen::MatrixXd root2 = psd_sqrt(g2.cov);
    const Eigen::MatrixXd cross = psd_sqrt(root2 * g1.cov * root2);
    const double mean_term = (g1.mean - g2.mean).squaredNorm();
    const double cov_term = (g1.cov + g2.cov - 2.0 * cross).trace();
    return std::sqrt(std::max(0.0, mean_term + cov_term));
}

/// KL(g1 || g2) in nats.
inline double kl_gaussian(const GaussianLaw& g1, const GaussianLaw& g2) {
    if (g1.dim() != g2.dim()) throw std::invalid_argument("kl_gaussian needs equal dimensions");
    detail::require_psd(g1);
    const Eigen::Index k = g1.dim();
    if (k == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(0.5 * (g2.cov + g2.cov.transpose()), Eigen::EigenvaluesOnly);
    const double top = eig2.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig2.eigenvalues().minCoeff() > 1e-14 * top)) throw NumericalError("kl_gaussian: singular target covariance");
    Eigen::LLT<Eigen::MatrixXd> chol(g2.cov);
    if (chol.info() != Eigen::Success) throw NumericalError("kl_gaussian: target covariance not positive definite");

    // eigenvalues of L^-1 (S1 - S2) L^-T are e_i = mu_i - 1, with mu_i those of S2^-1 S1
    const Eigen::MatrixXd lower = chol.matrixL();
    Eigen::MatrixXd m = lower.triangularView<Eigen::Lower>().solve(g1.cov - g2.cov);
    m = lower.triangularView<Eigen::Lower>().solve(m.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    double trace_log = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double e = eig.eigenvalues()[i];
        if (e <= -1.0) return std::numeric_limits<double>::infinity();
        trace_log += e - std::log1p(e);
    }
    const Eigen::VectorXd delta = g2.mean - g1.mean;
    const double mahalanobis = delta.dot(chol.solve(delta));
    return 0.5 * (trace_log + mahalanobis);
}

struct GridSpec {
    double half_width_std = 8.0;
    std::size_t points = 2048;
};

/// L1 distance of the two densities, midpoint rule on a tensor grid spanning
/// +-half_width_std marginal standard deviations of both laws. Range [0, 2].
inline double l1_gaussian_grid(const GaussianLaw& g1, const GaussianLaw& g2, const GridSpec& grid = {}) {
    if (g1.dim() != g2.dim()) throw std::invalid_argument("l1_gaussian_grid needs equal dimensions");
    const Eigen::Index k = g1.dim();
    if (k < 1 || k > 2) throw std::invalid_argument("l1_gaussian_grid supports dimension 1 or 2");
    if (grid.points < 2) throw std::invalid_argument("grid needs at least 2 points per axis");

    struct Density {
        Eigen::VectorXd mean;
        Eigen::MatrixXd precision;
        double log_norm;
    };
    auto prepare = [&](const GaussianLaw& g) {
        Eigen::LLT<Eigen::MatrixXd> chol(g.cov);
        if (chol.info() != Eigen::Success) throw NumericalError("l1_gaussian_grid: covariance not positive definite");
        const Eigen::MatrixXd lower = chol.matrixL();
        const double log_det = 2.0 * lower.diagonal().array().log().sum();
        return Density{g.mean, chol.solve(Eigen::MatrixXd::Identity(k, k)),
                       -0.5 * (static_cast<double>(k) * std::log(2.0 * std::numbers::pi) + log_det)};
    };
    const Density p1 = prepare(g1), p2 = prepare(g2);

    std::vector<double> lo(k), step(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        const double s1 = std::sqrt(g1.cov(a, a)), s2 = std::sqrt(g2.cov(a, a));
        const double low = std::min(g1.mean[a] - grid.half_width_std * s1, g2.mean[a] - grid.half_width_std * s2);
        const double high = std::max(g1.mean[a] + grid.half_width_std * s1, g2.mean[a] + grid.half_width_std * s2);
        lo[a] = low;
        step[a] = (high - low) / static_cast<double>(grid.points);
    }
    auto density = [k](const Density& p, double z0, double z1) {
        const double a = z0 - p.mean[0];
        double q = p.precision(0, 0) * a * a;
        if (k == 2) {
            const double b = z1 - p.mean[1];
            q += 2.0 * p.precision(0, 1) * a * b + p.precision(1, 1) * b * b;
        }
        return std::exp(p.log_norm - 0.5 * q);
    };

    double total = 0.0;
    if (k == 1) {
        for (std::size_t i = 0; i < grid.points; ++i) {
            const double z0 = lo[0] + (static_cast<double>(i) + 0.5) * step[0];
            total += std::abs(density(p1, z0, 0.0) - density(p2, z0, 0.0));
        }
        return total * step[0];
    }
    for (std::size_t i = 0; i < grid.points; ++i) {
        const double z0 = lo[0] + (static_cast<double>(i) + 0.5) * step[0];
        for (std::size_t j = 0; j < grid.points; ++j) {
            const double z1 = lo[1] + (static_cast<double>(j) + 0.5) * step[1];
            total += std::abs(density(p1, z0, z1) - density(p2, z0, z1));
        }
    }
    return total * step[0] * step[1];
}

} // namespace vfp
