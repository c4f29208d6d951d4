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
#ifndef EPIGAM_FAMILY_HPP
#define EPIGAM_FAMILY_HPP

#include <limits>
#include <string>

namespace epigam
{

enum class FamilyKind { gaussian, poisson, binomial, negative_binomial };
enum class Link { identity, log, logit };

/**
 * Exponential-family response with its canonical link.
 *
 * All per-observation quantities take the linear predictor eta (offset
 * included) and the number of trials (binomial; ignored otherwise). The
 * binomial response is the success count. The negative binomial uses
 * variance mu + mu^2 / theta; sigma^2 = 1 / theta is the reported dispersion.
 */
struct Family {
    FamilyKind kind = FamilyKind::gaussian;
    Link link       = Link::identity;
    double nb_theta = std::numeric_limits<double>::infinity();

    static Family gaussian();
    static Family poisson();
    static Family binomial();
    static Family negative_binomial(double theta);

    void validate() const;
    std::string name() const;
    bool is_count() const
    {
        return kind == FamilyKind::poisson || kind == FamilyKind::negative_binomial;
    }

    /// Inverse link: mean per trial.
    double linkinv(double eta) const;
    /// Expected response, trials * linkinv(eta) for the binomial.
    double mean(double eta, double trials = 1.0) const;
    /// d loglik / d eta.
    double score(double y, double eta, double trials = 1.0) const;
    /// Expected information E[-d^2 loglik / d eta^2].
    double fisher_weight(double eta, double trials = 1.0) const;
    /// Observed information -d^2 loglik / d eta^2.
    double observed_weight(double y, double eta, double trials = 1.0) const;
    /// Full log-likelihood (normalising constants included), unit scale for the gaussian.
    double log_likelihood(double y, double eta, double trials = 1.0) const;
    /// Unit deviance 2 (l_saturated - l).
    double unit_deviance(double y, double mu, double trials = 1.0) const;
    /// Starting mean from the response.
    double initial_mean(double y, double trials = 1.0) const;
    /// Link applied to a mean (per-trial scale for the binomial).
    double linkfun(double mu, double trials = 1.0) const;
};

/// log Gamma(y + theta) - log Gamma(theta), stable for very large theta.
double lgamma_ratio(double y, double theta);

/// NB log-likelihood for one observation at mean mu (mu > 0 or y == 0).
double nb_log_likelihood(double y, double mu, double theta);

} // namespace epigam

#endif // EPIGAM_FAMILY_HPP
