// Copyright 2026 The Parallax Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "parallax/metrics/frechet.hpp"

#include <cmath>
#include <iostream>

#include "parallax/core/errors.hpp"

namespace parallax::metrics {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
    double s = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

void require_square_symmetric(const Eigen::MatrixXd& a, const char* what) {
    if (a.rows() != a.cols()) throw DimensionError(std::string(what) + " must be square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-6 * scale) {
        throw UsageError(std::string(what) + " is not symmetric");
    }
}

void require_psd(const Eigen::VectorXd& eigenvalues, double trace, const char* what) {
    const double floor = -1e-6 * std::abs(trace);
    const double smallest = eigenvalues.size() ? eigenvalues.minCoeff() : 0.0;
    if (smallest < floor) {
        throw NumericError(std::string(what) + " is not positive semidefinite (eigenvalue " + std::to_string(smallest) +
                           ", trace " + std::to_string(trace) + ")");
    }
}

}  // namespace

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
    if (input.rows() != input.cols()) throw DimensionError("jacobi_eigen needs a square matrix");
    const Eigen::Index n = input.rows();
    Eigen::MatrixXd a = input;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    const double target = tol * std::max(1.0, input.norm());

    SymmetricEigen result;
    for (int sweep = 0; sweep < max_sweeps && off_diagonal_norm(a) >= target; ++sweep) {
        result.sweeps = sweep + 1;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                // Rotation angle that zeroes a(p,q): t = tan(theta), smaller root.
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_diagonal_norm(a) >= target) throw NumericError("jacobi_eigen did not converge");
    result.values = a.diagonal();
    result.vectors = std::move(v);
    return result;
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
    const Eigen::Index n = features.rows();
    if (n < 2) throw UsageError("gaussian_stats needs at least 2 samples, got " + std::to_string(n));
    GaussianStats stats;
    stats.n = n;
    stats.mu = features.colwise().mean().transpose();
    const Eigen::MatrixXd centered = features.rowwise() - stats.mu.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    stats.sigma = 0.5 * (cov + cov.transpose());
    return stats;
}

double psd_sqrt_trace(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma2) {
    require_square_symmetric(sigma1, "sigma1");
    require_square_symmetric(sigma2, "sigma2");
    if (sigma1.rows() != sigma2.rows()) throw UsageError("covariance dimensions differ");

    const SymmetricEigen e1 = jacobi_eigen(sigma1);
    require_psd(e1.values, sigma1.trace(), "sigma1");
    require_psd(jacobi_eigen(sigma2).values, sigma2.trace(), "sigma2");

    const Eigen::VectorXd root = e1.values.cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd s1_half = e1.vectors * root.asDiagonal() * e1.vectors.transpose();
    Eigen::MatrixXd m = s1_half * sigma2 * s1_half;
    m = 0.5 * (m + m.transpose());

    const SymmetricEigen em = jacobi_eigen(m);
    require_psd(em.values, m.trace(), "sigma1^1/2 sigma2 sigma1^1/2");
    return em.values.cwiseMax(0.0).cwiseSqrt().sum();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.mu.size() != b.mu.size() || a.sigma.rows() != b.sigma.rows()) {
        throw UsageError("frechet_distance: feature dimensions differ (" + std::to_string(a.mu.size()) + " vs " +
                         std::to_string(b.mu.size()) + ")");
    }
    const double fd = (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() -
                      2.0 * psd_sqrt_trace(a.sigma, b.sigma);
    if (fd < 0) {
        if (fd < -1e-6) std::cerr << "warning: clamping negative Frechet distance " << fd << " to 0\n";
        return 0.0;
    }
    return fd;
}

double accuracy(const Tensor<float>& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw DimensionError("accuracy expects logits [B,C], got " + to_string(logits.shape()));
    const Index rows = logits.size(0), classes = logits.size(1);
    if (static_cast<Index>(labels.size()) != rows) throw DimensionError("accuracy: label count mismatch");
    if (rows == 0) return 0.0;
    Index correct = 0;
    for (Index r = 0; r < rows; ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= classes) throw UsageError("label " + std::to_string(label) + " out of range");
        Index best = 0;
        for (Index c = 1; c < classes; ++c) {
            if (logits.data()(r * classes + c) > logits.data()(r * classes + best)) best = c;
        }
        correct += best == label;
    }
    return static_cast<double>(correct) / static_cast<double>(rows);
}

}  // namespace parallax::metrics
