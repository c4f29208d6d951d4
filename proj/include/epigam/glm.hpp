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
#ifndef EPIGAM_GLM_HPP
#define EPIGAM_GLM_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "epigam/design.hpp"
#include "epigam/family.hpp"
#include "epigam/smoothing.hpp"

namespace epigam
{

struct PirlsOptions {
    int max_iterations       = 200;
    double tolerance         = 1e-8; ///< relative change of the penalized deviance
    int max_step_halvings    = 30;
    int max_selection_rounds = 8;
    /// Sandwich grouping unit per observation; empty means one unit per row.
    std::vector<std::string> groups;
    /// Warm start for lambda selection (one value per block).
    std::optional<Eigen::VectorXd> lambda_start;
};

/**
 * Result of a penalized GLM fit.
 *
 * `hessian` is the penalized negative Hessian A of the log-likelihood at
 * beta (observed information). `cov_model` is dispersion * (X'WX + S)^-1 with
 * Fisher weights W; `cov_sandwich` is A^-1 B A^-1 with B the outer product of
 * per-unit scores. For a random-intercept block the variance component is
 * tau^2 = dispersion / (lambda * block scale).
 */
struct FitResult {
    Family family;
    std::vector<std::string> coefficient_names;
    Eigen::VectorXd beta;
    std::vector<std::string> block_names;
    Eigen::VectorXd lambda;
    Eigen::VectorXd edf;
    double edf_total          = 0.0;
    double deviance           = 0.0;
    double penalized_deviance = 0.0;
    double dispersion         = 1.0;
    double gcv                = 0.0;
    std::optional<double> nb_theta;
    bool poisson_like = false;
    Eigen::MatrixXd cov_model;
    Eigen::MatrixXd cov_sandwich;
    Eigen::MatrixXd hessian;
    Eigen::VectorXd eta; ///< linear predictor including the offset
    Eigen::VectorXd mu;
    bool converged = false;
    int iterations = 0;
    std::string message;

    Eigen::VectorXd se_model() const
    {
        return cov_model.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    Eigen::VectorXd se_sandwich() const
    {
        return cov_sandwich.diagonal().cwiseMax(0.0).cwiseSqrt();
    }
    std::optional<Eigen::Index> index_of(const std::string& name) const;
    double coefficient(const std::string& name) const;
};

/**
 * Penalized iteratively reweighted least squares.
 *
 * Maximizes loglik(beta) - 1/2 sum_k lambda_k beta' S_k beta with step
 * halving on penalized-deviance increase. Under LambdaSpec::selected() the
 * smoothing parameters are chosen by GCV = n D / (n - edf)^2: at each
 * converged working model the grid search scores candidates by the deviance
 * of the corresponding one-step update, and PIRLS is rerun until lambda is
 * stable.
 *
 * Throws RankDeficientError when the penalized problem is not identifiable.
 * Non-convergence is reported through `converged` and `message`.
 */
FitResult fit_pirls(const Design& design, const Eigen::VectorXd& y, const Family& family,
                    const LambdaSpec& lambda = LambdaSpec::selected(), const PirlsOptions& options = {});

struct ThetaEstimate {
    double theta      = 0.0;
    bool poisson_like = false;
};

inline constexpr double nb_theta_cap = 1e7;

/// Maximizes the NB profile log-likelihood in theta for fixed means.
ThetaEstimate profile_nb_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& mu);

struct NbThetaResult {
    double theta      = 0.0;
    bool poisson_like = false;
    int rounds        = 0;
    FitResult fit; ///< jointly converged fit at theta
};

/// Alternates theta profiling with fit_pirls from an initial (Poisson or NB) fit.
NbThetaResult estimate_nb_theta(const Design& design, const Eigen::VectorXd& y, const FitResult& initial,
                                const LambdaSpec& lambda = LambdaSpec::selected(),
                                const PirlsOptions& options = {});

/// Poisson pilot followed by estimate_nb_theta; the returned fit carries nb_theta.
FitResult fit_negative_binomial(const Design& design, const Eigen::VectorXd& y,
                                const LambdaSpec& lambda = LambdaSpec::selected(),
                                const PirlsOptions& options = {});

/// Per-unit score sums (units ordered by first appearance), G x p.
Eigen::MatrixXd score_contributions(const Design& design, const Eigen::VectorXd& y, const FitResult& fit,
                                    const std::vector<std::string>& groups);

/// A^-1 B A^-1 with A = fit.hessian and B = sum_g u_g u_g'.
Eigen::MatrixXd sandwich_covariance(const FitResult& fit, const Eigen::MatrixXd& unit_scores);

enum class PredictType { link, response };

Eigen::VectorXd predict(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& offset,
                        PredictType type);
Eigen::VectorXd predict(const FitResult& fit, const Design& design, const Frame& newdata, PredictType type);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json to_json(const FitResult& fit);

} // namespace epigam

#endif // EPIGAM_GLM_HPP
