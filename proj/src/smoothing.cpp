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
#include "epigam/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <string>

#include <fmt/format.h>

#include "epigam/errors.hpp"
#include "epigam/parallel.hpp"

namespace epigam
{

std::size_t worker_count()
{
    if (const char* env = std::getenv("EPIGAM_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) {
                return static_cast<std::size_t>(v);
            }
        }
        catch (const std::exception&) {
        }
    }
    return 1;
}

Eigen::VectorXd LambdaSpec::resolve(std::size_t num_blocks) const
{
    const auto k = static_cast<Eigen::Index>(num_blocks);
    switch (mode) {
    case Mode::select:
        return Eigen::VectorXd::Ones(k);
    case Mode::uniform:
        return Eigen::VectorXd::Constant(k, uniform_value);
    case Mode::fixed:
        if (values.size() != k) {
            throw ConfigError(fmt::format("{} smoothing parameters given for {} penalty blocks", values.size(), k));
        }
        if ((values.array() < 0.0).any()) {
            throw ConfigError("smoothing parameters must be non-negative");
        }
        return values;
    }
    return Eigen::VectorXd::Ones(k);
}

Eigen::MatrixXd assemble_penalty(const std::vector<PenaltyBlock>& blocks, const Eigen::VectorXd& lambda,
                                 Eigen::Index p)
{
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        S.block(b.start, b.start, b.size, b.size) += lambda(static_cast<Eigen::Index>(k)) * b.S;
    }
    return S;
}

Eigen::MatrixXd penalty_root(const std::vector<PenaltyBlock>& blocks, const Eigen::VectorXd& lambda,
                             Eigen::Index p)
{
    Eigen::Index rows = 0;
    for (const auto& b : blocks) {
        rows += b.size;
    }
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(rows, p);
    Eigen::Index r    = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b.S);
        const Eigen::VectorXd root = (eig.eigenvalues().cwiseMax(0.0) * lambda(static_cast<Eigen::Index>(k))).cwiseSqrt();
        R.block(r, b.start, b.size, b.size) = root.asDiagonal() * eig.eigenvectors().transpose();
        r += b.size;
    }
    return R;
}

Eigen::VectorXd block_edf(const Eigen::VectorXd& f_diag, const std::vector<PenaltyBlock>& blocks)
{
    Eigen::VectorXd edf(static_cast<Eigen::Index>(blocks.size()));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        edf(static_cast<Eigen::Index>(k)) = f_diag.segment(blocks[k].start, blocks[k].size).sum();
    }
    return edf;
}

Eigen::VectorXd gcv_grid_search(const Eigen::VectorXd& start,
                                const std::function<double(const Eigen::VectorXd&)>& score)
{
    Eigen::VectorXd lambda = start;
    std::vector<double> grid;
    for (int e = -4; e <= 4; ++e) {
        grid.push_back(std::pow(10.0, e));
    }

    auto sweep = [&](Eigen::Index k, const std::vector<double>& candidates) {
        std::vector<double> scores(candidates.size());
        parallel_for(candidates.size(), [&](std::size_t i) {
            Eigen::VectorXd trial = lambda;
            trial(k)              = candidates[i];
            scores[i]             = score(trial);
        });
        // candidates are ascending; strict comparison keeps the smallest lambda on ties
        std::size_t best = 0;
        for (std::size_t i = 1; i < candidates.size(); ++i) {
            if (scores[i] < scores[best]) {
                best = i;
            }
        }
        if (std::isfinite(scores[best])) {
            lambda(k) = candidates[best];
        }
    };

    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        sweep(k, grid);
    }
    const double half = std::sqrt(10.0);
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        sweep(k, {lambda(k) / half, lambda(k), lambda(k) * half});
    }
    return lambda;
}

std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& M, double tol)
{
    const Eigen::Index p = M.cols();
    std::set<Eigen::Index> out;
    Eigen::VectorXd norms = M.colwise().norm().transpose();
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (norms(j) == 0.0) {
            out.insert(j);
        }
        else {
            live.push_back(j);
        }
    }
    if (live.empty()) {
        return {out.begin(), out.end()};
    }
    Eigen::MatrixXd A(M.rows(), static_cast<Eigen::Index>(live.size()));
    for (std::size_t i = 0; i < live.size(); ++i) {
        A.col(static_cast<Eigen::Index>(i)) = M.col(live[i]) / norms(live[i]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(tol);
    const Eigen::Index rank = qr.rank();
    const Eigen::Index q    = A.cols();
    if (rank < q) {
        const auto& perm    = qr.colsPermutation().indices();
        const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(rank, q).template triangularView<Eigen::Upper>();
        const Eigen::MatrixXd R11 = R.leftCols(rank);
        for (Eigen::Index j = rank; j < q; ++j) {
            out.insert(live[static_cast<std::size_t>(perm(j))]);
            const Eigen::VectorXd coef =
                R11.template triangularView<Eigen::Upper>().solve(R.col(j));
            for (Eigen::Index i = 0; i < rank; ++i) {
                if (std::abs(coef(i)) > 1e-6) {
                    out.insert(live[static_cast<std::size_t>(perm(i))]);
                }
            }
        }
    }
    return {out.begin(), out.end()};
}

void check_identifiable(const Eigen::MatrixXd& X, const std::vector<PenaltyBlock>& blocks,
                        const Eigen::VectorXd& lambda, const std::vector<std::string>& names)
{
    const Eigen::MatrixXd R = penalty_root(blocks, lambda, X.cols());
    Eigen::MatrixXd M(X.rows() + R.rows(), X.cols());
    M.topRows(X.rows())    = X;
    M.bottomRows(R.rows()) = R;
    const auto bad         = dependent_columns(M);
    if (bad.empty()) {
        return;
    }
    std::vector<std::string> cols;
    std::string list;
    for (auto j : bad) {
        cols.push_back(names.at(static_cast<std::size_t>(j)));
        list += (list.empty() ? "" : ", ") + cols.back();
    }
    throw RankDeficientError(fmt::format("rank-deficient design: columns [{}] are not identifiable", list),
                             std::move(cols));
}

} // namespace epigam
