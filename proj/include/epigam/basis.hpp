/*
* Copyright (C) 2026 The epigam Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*/
#ifndef EPIGAM_BASIS_HPP
#define EPIGAM_BASIS_HPP

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epigam
{

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/**
 * Clamped B-spline (P-spline) basis with equidistant interior knots.
 * The penalty is the squared `penalty_order`-th difference of adjacent
 * coefficients.
 */
struct BSplineSpec {
    int degree        = 3;
    int num_basis     = 10;
    Interval domain   = {0.0, 1.0};
    int penalty_order = 2;

    void validate() const;
    bool degenerate() const
    {
        return !(domain.hi > domain.lo);
    }
    /// Full knot vector of length num_basis + degree + 1.
    std::vector<double> knots() const;
};

/// Columns t and (t - spacing*l)_+ for l = 1..L with spacing*L < horizon.
struct TruncatedLinearSpec {
    int knot_spacing = 28;
    int horizon      = 1; ///< T; the domain is [1, T]

    void validate() const;
    int num_hinges() const;
    int num_columns() const
    {
        return num_hinges() + 1;
    }
};

struct ThinPlateSpec {
    std::vector<std::array<double, 2>> centers;
    int rank = 30;
};

struct RandomInterceptSpec {
    std::vector<std::string> levels;
};

/**
 * Low-rank thin-plate regression spline in two dimensions.
 *
 * Radial part r^2 log r at the distinct centers, truncated to the leading
 * eigenvectors of the radial matrix and constrained orthogonal to the affine
 * polynomials. The last three columns are the affine null space (1, x, y),
 * which the penalty leaves free.
 */
class ThinPlateBasis
{
public:
    explicit ThinPlateBasis(const ThinPlateSpec& spec);

    Eigen::Index num_columns() const
    {
        return m_radial_transform.cols() + 3;
    }
    Eigen::MatrixXd evaluate(const Eigen::MatrixX2d& points) const;
    const Eigen::MatrixXd& penalty() const
    {
        return m_penalty;
    }
    const Eigen::MatrixX2d& centers() const
    {
        return m_centers;
    }

private:
    Eigen::MatrixX2d m_centers;
    Eigen::MatrixXd m_radial_transform; ///< n_centers x (rank - 3)
    Eigen::MatrixXd m_penalty;
};

Eigen::MatrixXd evaluate_basis(const BSplineSpec& spec, std::span<const double> x);
Eigen::MatrixXd evaluate_basis(const TruncatedLinearSpec& spec, std::span<const double> x);
Eigen::MatrixXd evaluate_basis(const ThinPlateSpec& spec, const Eigen::MatrixX2d& points);
Eigen::MatrixXd evaluate_basis(const RandomInterceptSpec& spec, std::span<const std::string> x);

Eigen::MatrixXd penalty_matrix(const BSplineSpec& spec);
Eigen::MatrixXd penalty_matrix(const TruncatedLinearSpec& spec);
Eigen::MatrixXd penalty_matrix(const ThinPlateSpec& spec);
Eigen::MatrixXd penalty_matrix(const RandomInterceptSpec& spec);

/// Difference matrix of the given order for k coefficients ((k - order) x k).
Eigen::MatrixXd difference_matrix(int k, int order);

struct CenteredBasis {
    Eigen::MatrixXd basis;
    Eigen::MatrixXd penalty;
    /// k x (k - 1) map from reduced to original coefficients.
    Eigen::MatrixXd transform;
};

/**
 * Absorbs the sum-to-zero constraint 1'B beta = 0 into the basis by a
 * Householder reparametrisation. The reduced columns each sum to zero.
 */
CenteredBasis apply_centering_constraint(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty);

/// Same reparametrisation as apply_centering_constraint, for reuse on new data.
Eigen::MatrixXd centering_transform(const Eigen::VectorXd& column_sums);

} // namespace epigam

#endif // EPIGAM_BASIS_HPP
