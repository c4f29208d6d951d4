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
#ifndef EPIGAM_SMOOTHING_HPP
#define EPIGAM_SMOOTHING_HPP

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epigam/design.hpp"

namespace epigam
{

/// Smoothing parameters: fixed per-block values, one value for all blocks, or GCV selection.
struct LambdaSpec {
    enum class Mode { select, fixed, uniform };
    Mode mode = Mode::select;
    Eigen::VectorXd values;
    double uniform_value = 1.0;

    static LambdaSpec selected()
    {
        return {};
    }
    static LambdaSpec fixed(Eigen::VectorXd v)
    {
        return {Mode::fixed, std::move(v), 1.0};
    }
    static LambdaSpec fixed_all(double v)
    {
        return {Mode::uniform, {}, v};
    }
    bool select() const
    {
        return mode == Mode::select;
    }
    /// One value per block; the starting point (all ones) under selection.
    Eigen::VectorXd resolve(std::size_t num_blocks) const;
};

/// Sum of lambda_k S_k embedded in a p x p matrix.
Eigen::MatrixXd assemble_penalty(const std::vector<PenaltyBlock>& blocks, const Eigen::VectorXd& lambda,
                                 Eigen::Index p);

/// Square root R with R'R = sum lambda_k S_k (rows for each block's range).
Eigen::MatrixXd penalty_root(const std::vector<PenaltyBlock>& blocks, const Eigen::VectorXd& lambda,
                             Eigen::Index p);

/// Sum over each block's columns of the diagonal of F = (H + S)^-1 H.
Eigen::VectorXd block_edf(const Eigen::VectorXd& f_diag, const std::vector<PenaltyBlock>& blocks);

/**
 * Coordinate-wise grid search for the smoothing parameters minimising
 * `score`. Each block is swept over 10^-4 .. 10^4 (9 decades), then a
 * refinement pass tries half-decade neighbours of the current value.
 * Ties keep the smallest lambda.
 */
Eigen::VectorXd gcv_grid_search(const Eigen::VectorXd& start,
                                const std::function<double(const Eigen::VectorXd&)>& score);

/**
 * Indices of columns of M (n x p, augmented with the penalty root rows) that
 * are linearly dependent on the others: the columns dropped by a pivoted QR
 * plus every column they load on.
 */
std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& M, double tol = 1e-9);

/// Throws RankDeficientError naming the columns if [X; root(S)] is rank deficient.
void check_identifiable(const Eigen::MatrixXd& X, const std::vector<PenaltyBlock>& blocks,
                        const Eigen::VectorXd& lambda, const std::vector<std::string>& names);

} // namespace epigam

#endif // EPIGAM_SMOOTHING_HPP
