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

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>

#include "parallax/core/tensor.hpp"

namespace parallax::metrics {

/// Result of a symmetric eigendecomposition: A = vectors * diag(values) * vectors^T.
struct SymmetricEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // orthonormal columns
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// tol * max(1, ||A||_F). Only the upper triangle drives the rotations; the
/// input is assumed symmetric.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-10, int max_sweeps = 100);

struct GaussianStats {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    std::int64_t n = 0;
};

// Rows are samples. Covariance uses 1/(n-1) and is symmetrized.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

/// Tr((S1 S2)^{1/2}) evaluated through the symmetric form S1^{1/2} S2 S1^{1/2}.
/// Throws NumericError when an eigenvalue is below -1e-6 * trace.
double psd_sqrt_trace(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma2);

/// ||mu1 - mu2||^2 + Tr(S1) + Tr(S2) - 2 Tr((S1 S2)^{1/2}), clamped at zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Tensor<float>& logits, std::span<const int> labels);

}  // namespace parallax::metrics
