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
#include "epigam/family.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "epigam/errors.hpp"

namespace epigam
{

Family Family::gaussian()
{
    return {FamilyKind::gaussian, Link::identity};
}

Family Family::poisson()
{
    return {FamilyKind::poisson, Link::log};
}

Family Family::binomial()
{
    return {FamilyKind::binomial, Link::logit};
}

Family Family::negative_binomial(double theta)
{
    return {FamilyKind::negative_binomial, Link::log, theta};
}

void Family::validate() const
{
    const bool ok = (kind == FamilyKind::gaussian && link == Link::identity) ||
                    (kind == FamilyKind::poisson && link == Link::log) ||
                    (kind == FamilyKind::negative_binomial && link == Link::log) ||
                    (kind == FamilyKind::binomial && link == Link::logit);
    if (!ok) {
        throw ConfigError(fmt::format("family {} does not support the requested link", name()));
    }
    if (kind == FamilyKind::negative_binomial && !(nb_theta > 0.0)) {
        throw ConfigError(fmt::format("negative binomial theta must be positive, got {}", nb_theta));
    }
}

std::string Family::name() const
{
    switch (kind) {
    case FamilyKind::gaussian:
        return "gaussian";
    case FamilyKind::poisson:
        return "poisson";
    case FamilyKind::binomial:
        return "binomial";
    case FamilyKind::negative_binomial:
        return "negative_binomial";
    }
    return "unknown";
}

namespace
{

double expit(double eta)
{
    if (eta >= 0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta))
double softplus(double eta)
{
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double xlogy(double x, double y)
{
    return x == 0.0 ? 0.0 : x * std::log(y);
}

} // namespace

double Family::linkinv(double eta) const
{
    switch (link) {
    case Link::identity:
        return eta;
    case Link::log:
        return std::exp(eta);
    case Link::logit:
        return expit(eta);
    }
    return eta;
}

double Family::linkfun(double mu, double trials) const
{
    switch (link) {
    case Link::identity:
        return mu;
    case Link::log:
        return std::log(mu);
    case Link::logit: {
        const double p = mu / trials;
        return std::log(p / (1.0 - p));
    }
    }
    return mu;
}

double Family::mean(double eta, double trials) const
{
    return kind == FamilyKind::binomial ? trials * linkinv(eta) : linkinv(eta);
}

double Family::initial_mean(double y, double trials) const
{
    switch (kind) {
    case FamilyKind::gaussian:
        return y;
    case FamilyKind::poisson:
    case FamilyKind::negative_binomial:
        return y + 0.5;
    case FamilyKind::binomial:
        return trials * (y + 0.5) / (trials + 1.0);
    }
    return y;
}

double Family::score(double y, double eta, double trials) const
{
    switch (kind) {
    case FamilyKind::gaussian:
        return y - eta;
    case FamilyKind::poisson:
        return y - std::exp(eta);
    case FamilyKind::binomial:
        return y - trials * expit(eta);
    case FamilyKind::negative_binomial: {
        const double mu = std::exp(eta);
        if (!std::isfinite(nb_theta)) {
            return y - mu;
        }
        return nb_theta * (y - mu) / (mu + nb_theta);
    }
    }
    return 0.0;
}

double Family::fisher_weight(double eta, double trials) const
{
    switch (kind) {
    case FamilyKind::gaussian:
        return 1.0;
    case FamilyKind::poisson:
        return std::exp(eta);
    case FamilyKind::binomial: {
        const double p = expit(eta);
        return trials * p * (1.0 - p);
    }
    case FamilyKind::negative_binomial: {
        const double mu = std::exp(eta);
        if (!std::isfinite(nb_theta)) {
            return mu;
        }
        return mu * nb_theta / (mu + nb_theta);
    }
    }
    return 1.0;
}

double Family::observed_weight(double y, double eta, double trials) const
{
    if (kind != FamilyKind::negative_binomial || !std::isfinite(nb_theta)) {
        return fisher_weight(eta, trials);
    }
    const double mu = std::exp(eta);
    const double d  = mu + nb_theta;
    return nb_theta * mu * (nb_theta + y) / (d * d);
}

double lgamma_ratio(double y, double theta)
{
    if (y == 0.0) {
        return 0.0;
    }
    if (y == std::floor(y) && y < 20.0) {
        double s = 0.0;
        for (int j = 0; j < static_cast<int>(y); ++j) {
            s += std::log(theta + j);
        }
        return s;
    }
    return std::lgamma(y + theta) - std::lgamma(theta);
}

double nb_log_likelihood(double y, double mu, double theta)
{
    const double lf = std::lgamma(y + 1.0);
    if (!std::isfinite(theta)) {
        return xlogy(y, mu) - mu - lf;
    }
    // theta log(theta/(mu+theta)) + y log(mu/(mu+theta))
    return lgamma_ratio(y, theta) - lf - theta * std::log1p(mu / theta) + xlogy(y, mu / (mu + theta));
}

double Family::log_likelihood(double y, double eta, double trials) const
{
    switch (kind) {
    case FamilyKind::gaussian: {
        const double r = y - eta;
        return -0.5 * r * r - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    case FamilyKind::poisson:
        return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    case FamilyKind::binomial:
        return std::lgamma(trials + 1.0) - std::lgamma(y + 1.0) - std::lgamma(trials - y + 1.0) + y * eta -
               trials * softplus(eta);
    case FamilyKind::negative_binomial:
        return nb_log_likelihood(y, std::exp(eta), nb_theta);
    }
    return 0.0;
}

double Family::unit_deviance(double y, double mu, double trials) const
{
    switch (kind) {
    case FamilyKind::gaussian:
        return (y - mu) * (y - mu);
    case FamilyKind::poisson:
        return 2.0 * (xlogy(y, y / mu) - (y - mu));
    case FamilyKind::binomial:
        return 2.0 * (xlogy(y, y / mu) + xlogy(trials - y, (trials - y) / (trials - mu)));
    case FamilyKind::negative_binomial:
        if (!std::isfinite(nb_theta)) {
            return 2.0 * (xlogy(y, y / mu) - (y - mu));
        }
        return 2.0 * (xlogy(y, y / mu) - (y + nb_theta) * std::log((y + nb_theta) / (mu + nb_theta)));
    }
    return 0.0;
}

} // namespace epigam
