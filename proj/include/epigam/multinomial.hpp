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
#ifndef EPIGAM_MULTINOMIAL_HPP
#define EPIGAM_MULTINOMIAL_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "epigam/design.hpp"
#include "epigam/smoothing.hpp"

namespace epigam
{

struct MultinomialOptions {
    /// 0-based index of the reference category.
    Eigen::Index reference = 1;
    /// Category labels; defaults to "cat1", "cat2", ...
    std::vector<std::string> categories;
    int max_iterations       = 200;
    double tolerance         = 1e-10;
    int max_step_halvings    = 30;
    int max_selection_rounds = 8;
    double separation_bound  = 30.0;
    /// Sandwich grouping unit per row; empty means one unit per row.
    std::vector<std::string> groups;
    std::optional<Eigen::VectorXd> lambda_start;
};

/**
 * Fitted multinomial logit model with K - 1 logits log(pi_j / pi_ref) = X beta_j.
 *
 * beta stacks the per-logit coefficient vectors in category order with the
 * reference skipped. Penalty blocks are replicated per logit and carry their
 * own smoothing parameter.
 */
struct MultinomialFit {
    std::vector<std::string> categories;
    Eigen::Index reference = 0;
    std::vector<Eigen::Index> logit_categories; ///< category index of each logit
    std::vector<std::string> base_names;        ///< design column names
    std::vector<std::string> coefficient_names; ///< "<category>:<column>"
    Eigen::VectorXd beta;
    Eigen::MatrixXd probs; ///< n x K
    std::vector<std::string> block_names;
    Eigen::VectorXd lambda;
    Eigen::VectorXd edf;
    double edf_total     = 0.0;
    double deviance      = 0.0;
    double loglik        = 0.0; ///< full log-likelihood including multinomial coefficients
    Eigen::MatrixXd cov_model;
    Eigen::MatrixXd cov_sandwich;
    Eigen::MatrixXd hessian; ///< penalized negative Hessian
    bool converged  = false;
    bool separation = false;
    int iterations  = 0;
    std::string message;

    Eigen::Index num_categories() const
    {
        return static_cast<Eigen::Index>(categories.size());
    }
    Eigen::Index num_columns() const
    {
        return static_cast<Eigen::Index>(base_names.size());
    }
    /// Coefficient vector of logit l (0-based, over non-reference categories).
    Eigen::VectorXd logit_beta(Eigen::Index l) const
    {
        return beta.segment(l * num_columns(), num_columns());
    }
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

MultinomialFit fit_multinomial(const Design& design, const Eigen::MatrixXd& counts,
                               const LambdaSpec& lambda = LambdaSpec::selected(),
                               const MultinomialOptions& options = {});

/// Softmax probabilities (n x K) for stacked coefficients with a zero reference logit.
Eigen::MatrixXd multinomial_probs(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, Eigen::Index K,
                                  Eigen::Index reference);

Eigen::MatrixXd predict_multinomial(const MultinomialFit& fit, const Eigen::MatrixXd& X);

/// Full multinomial log-likelihood (with coefficients) at beta.
double multinomial_loglik(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts, const Eigen::VectorXd& beta,
                          Eigen::Index reference);

/// Gradient of multinomial_loglik with respect to the stacked beta.
Eigen::VectorXd multinomial_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts,
                                     const Eigen::VectorXd& beta, Eigen::Index reference);

/// log P(z | Multinomial(sum z, pi)); -inf when a positive count meets pi = 0.
double multinomial_log_pmf(const Eigen::VectorXd& z, const Eigen::VectorXd& pi);

struct LogScore {
    Eigen::VectorXd scores; ///< negative log pmf per row, lower is better
    std::vector<Eigen::Index> impossible_rows;
    double total() const
    {
        return scores.sum();
    }
};

/// Row-wise logarithmic score. Throws DataError when a row of pi does not sum to one.
LogScore log_score(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& counts);

/// Per-unit score sums (units by first appearance), G x (K-1)p.
Eigen::MatrixXd multinomial_score_contributions(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts,
                                                const MultinomialFit& fit, const std::vector<std::string>& groups);

Eigen::MatrixXd multinomial_sandwich(const MultinomialFit& fit, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& counts, const std::vector<std::string>& groups);

nlohmann::json to_json(const MultinomialFit& fit);

} // namespace epigam

#endif // EPIGAM_MULTINOMIAL_HPP
