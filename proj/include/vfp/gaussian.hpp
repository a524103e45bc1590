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

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "vfp/errors.hpp"

namespace vfp {

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kNegativeEigenTolerance = 1e-10;

/// Gaussian law with mean and positive-semidefinite covariance.
struct GaussianLaw {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    Eigen::Index dim() const { return mean.size(); }

    /// Checks symmetry (relative 1e-12) and PSD-ness (eigenvalues >= -1e-10),
    /// then returns the law with its covariance symmetrized and clamped.
    static GaussianLaw make(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
        if (cov.rows() != mean.size() || cov.cols() != mean.size())
            throw std::invalid_argument("covariance shape does not match mean");
        if (!mean.allFinite() || !cov.allFinite()) throw NumericalError("gaussian law has non-finite entries");
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale)
            throw NumericalError("covariance is not symmetric");
        Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
        if (eig.eigenvalues().size() > 0 && eig.eigenvalues().minCoeff() < -kNegativeEigenTolerance * scale)
            throw NumericalError("covariance is not positive semidefinite");
        if (eig.eigenvalues().size() > 0 && eig.eigenvalues().minCoeff() < 0.0) {
            const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
            sym = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
            sym = 0.5 * (sym + sym.transpose());
        }
        return GaussianLaw{std::move(mean), std::move(sym)};
    }

    static GaussianLaw standard(Eigen::Index k) {
        return GaussianLaw{Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k, k)};
    }
};

/// Block-diagonal product law g1 (x) g2.
inline GaussianLaw product(const GaussianLaw& a, const GaussianLaw& b) {
    const Eigen::Index ka = a.dim(), kb = b.dim();
    GaussianLaw out{Eigen::VectorXd(ka + kb), Eigen::MatrixXd::Zero(ka + kb, ka + kb)};
    out.mean << a.mean, b.mean;
    out.cov.topLeftCorner(ka, ka) = a.cov;
    out.cov.bottomRightCorner(kb, kb) = b.cov;
    return out;
}

/// Symmetric PSD square root via eigendecomposition.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

} // namespace vfp
