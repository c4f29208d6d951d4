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
#include "epigam/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/errors.hpp"

namespace epigam
{

std::optional<Eigen::Index> FitResult::index_of(const std::string& name) const
{
    const auto it = std::find(coefficient_names.begin(), coefficient_names.end(), name);
    if (it == coefficient_names.end()) {
        return std::nullopt;
    }
    return static_cast<Eigen::Index>(it - coefficient_names.begin());
}

double FitResult::coefficient(const std::string& name) const
{
    const auto idx = index_of(name);
    if (!idx) {
        throw ConfigError(fmt::format("fit has no coefficient '{}'", name));
    }
    return beta(*idx);
}

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

void validate_response(const Eigen::VectorXd& y, const Eigen::VectorXd& trials, const Family& family,
                       Eigen::Index n)
{
    if (n == 0) {
        throw DataError("cannot fit a model with no observations");
    }
    if (y.size() != n) {
        throw DataError(fmt::format("response has {} values, design has {} rows", y.size(), n));
    }
    if (!y.allFinite()) {
        throw DataError("response contains non-finite values");
    }
    if (family.kind == FamilyKind::binomial) {
        if (trials.size() != n) {
            throw DataError("binomial family needs a trials column of the same length as the response");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (y(i) < 0 || trials(i) < 0 || y(i) > trials(i)) {
                throw DataError(fmt::format("row {}: binomial response {} outside [0, {}]", i, y(i), trials(i)));
            }
        }
    }
    else if (family.is_count() && (y.array() < 0.0).any()) {
        throw DataError("count response must be non-negative");
    }
}

struct Problem {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    const Eigen::VectorXd& offset;
    Eigen::VectorXd trials;
    const Family& family;
};

struct InnerState {
    Eigen::VectorXd beta;
    Eigen::VectorXd eta;
    double deviance = 0.0;
    double penalized = 0.0;
    bool converged  = false;
    int iterations  = 0;
    std::string message;
};

double deviance_at(const Problem& pr, const Eigen::VectorXd& eta)
{
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double mu = pr.family.mean(eta(i), pr.trials(i));
        dev += pr.family.unit_deviance(pr.y(i), mu, pr.trials(i));
    }
    return std::isfinite(dev) ? dev : inf;
}

void working_model(const Problem& pr, const Eigen::VectorXd& eta, Eigen::VectorXd& w, Eigen::VectorXd& z)
{
    const Eigen::Index n = eta.size();
    w.resize(n);
    z.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double wi = pr.family.fisher_weight(eta(i), pr.trials(i));
        const double si = pr.family.score(pr.y(i), eta(i), pr.trials(i));
        if (wi > 1e-300) {
            w(i) = wi;
            z(i) = eta(i) - pr.offset(i) + si / wi;
        }
        else {
            w(i) = 0.0;
            z(i) = eta(i) - pr.offset(i);
        }
    }
}

Eigen::MatrixXd weighted_crossprod(const Eigen::MatrixXd& X, const Eigen::VectorXd& w)
{
    const Eigen::MatrixXd Xw = X.array().colwise() * w.array();
    Eigen::MatrixXd H        = X.transpose() * Xw;
    return 0.5 * (H + H.transpose());
}

[[noreturn]] void diagnose_singular(const Problem& pr, const std::vector<PenaltyBlock>& blocks,
                                    const Eigen::VectorXd& lambda, const std::vector<std::string>& names)
{
    check_identifiable(pr.X, blocks, lambda, names);
    std::string which = "unpenalized columns";
    if (!blocks.empty()) {
        which = "penalty blocks";
        for (const auto& b : blocks) {
            which += " '" + b.name + "'";
        }
    }
    throw NumericError(fmt::format("penalized Hessian is numerically singular (involving {})", which));
}

InnerState pirls_inner(const Problem& pr, const Eigen::MatrixXd& S, const std::vector<PenaltyBlock>& blocks,
                       const Eigen::VectorXd& lambda, const std::vector<std::string>& names,
                       const Eigen::VectorXd* beta_start, const PirlsOptions& opt)
{
    const Eigen::Index n = pr.X.rows();
    InnerState st;
    Eigen::VectorXd eta(n);
    bool have_beta = false;
    double pen_old = inf;
    if (beta_start != nullptr) {
        st.beta   = *beta_start;
        eta       = pr.X * st.beta + pr.offset;
        pen_old   = deviance_at(pr, eta) + st.beta.dot(S * st.beta);
        have_beta = std::isfinite(pen_old);
    }
    if (!have_beta) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu0 = pr.family.initial_mean(pr.y(i), pr.trials(i));
            eta(i)           = pr.family.kind == FamilyKind::binomial && pr.trials(i) <= 0.0
                                   ? pr.offset(i)
                                   : pr.family.linkfun(mu0, pr.trials(i));
        }
    }

    Eigen::VectorXd w, z;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        st.iterations = it;
        working_model(pr, eta, w, z);
        const Eigen::MatrixXd H = weighted_crossprod(pr.X, w);
        const Eigen::VectorXd b = pr.X.transpose() * (w.array() * z.array()).matrix();
        Eigen::LLT<Eigen::MatrixXd> llt(H + S);
        if (llt.info() != Eigen::Success) {
            diagnose_singular(pr, blocks, lambda, names);
        }
        Eigen::VectorXd beta_new = llt.solve(b);
        if (!beta_new.allFinite()) {
            diagnose_singular(pr, blocks, lambda, names);
        }
        Eigen::VectorXd eta_new = pr.X * beta_new + pr.offset;
        double dev_new          = deviance_at(pr, eta_new);
        double pen_new          = dev_new + beta_new.dot(S * beta_new);

        if (have_beta && !(pen_new <= pen_old + 1e-12 * std::abs(pen_old))) {
            const Eigen::VectorXd step = beta_new - st.beta;
            bool improved              = false;
            double frac                = 1.0;
            for (int h = 0; h < opt.max_step_halvings; ++h) {
                frac *= 0.5;
                beta_new = st.beta + frac * step;
                eta_new  = pr.X * beta_new + pr.offset;
                dev_new  = deviance_at(pr, eta_new);
                pen_new  = dev_new + beta_new.dot(S * beta_new);
                if (pen_new <= pen_old + 1e-12 * std::abs(pen_old)) {
                    improved = true;
                    break;
                }
            }
            if (!improved) {
                // no descent direction left: we are at the optimum up to round-off
                st.converged = std::abs(pen_new - pen_old) <= 1e-6 * (std::abs(pen_old) + 0.1);
                st.message   = st.converged ? "" : "step halving failed to reduce the penalized deviance";
                st.deviance  = deviance_at(pr, eta);
                st.penalized = pen_old;
                st.eta       = eta;
                return st;
            }
        }

        const bool small_change = have_beta && std::abs(pen_new - pen_old) < opt.tolerance * (std::abs(pen_new) + 0.1);
        st.beta      = std::move(beta_new);
        eta          = std::move(eta_new);
        st.deviance  = dev_new;
        st.penalized = pen_new;
        pen_old      = pen_new;
        have_beta    = true;
        if (small_change) {
            st.converged = true;
            break;
        }
    }
    if (!st.converged) {
        st.message = fmt::format("PIRLS did not converge in {} iterations", opt.max_iterations);
    }
    st.eta = eta;
    return st;
}

} // namespace

FitResult fit_pirls(const Design& design, const Eigen::VectorXd& y, const Family& family, const LambdaSpec& lambda_spec,
                    const PirlsOptions& options)
{
    family.validate();
    const Eigen::MatrixXd& X = design.X();
    const Eigen::Index n     = X.rows();
    const Eigen::Index p     = X.cols();
    Eigen::VectorXd trials   = design.trials().size() == n ? design.trials() : Eigen::VectorXd::Ones(n);
    validate_response(y, design.trials(), family, n);
    if (!options.groups.empty() && static_cast<Eigen::Index>(options.groups.size()) != n) {
        throw DataError(fmt::format("{} sandwich groups given for {} rows", options.groups.size(), n));
    }
    const Problem pr{X, y, design.offset(), trials, family};
    const auto& blocks = design.blocks();

    Eigen::VectorXd lambda = lambda_spec.resolve(blocks.size());
    if (lambda_spec.select() && options.lambda_start && options.lambda_start->size() == lambda.size()) {
        lambda = *options.lambda_start;
    }
    check_identifiable(X, blocks, lambda, design.column_names());

    Eigen::MatrixXd S = assemble_penalty(blocks, lambda, p);
    InnerState st     = pirls_inner(pr, S, blocks, lambda, design.column_names(), nullptr, options);

    if (lambda_spec.select() && !blocks.empty()) {
        for (int round = 0; round < options.max_selection_rounds; ++round) {
            Eigen::VectorXd w, z;
            working_model(pr, st.eta, w, z);
            const Eigen::MatrixXd H = weighted_crossprod(X, w);
            const Eigen::VectorXd b = X.transpose() * (w.array() * z.array()).matrix();
            const double nd         = static_cast<double>(n);
            auto gcv = [&](const Eigen::VectorXd& lam) {
                const Eigen::MatrixXd Sl = assemble_penalty(blocks, lam, p);
                Eigen::LLT<Eigen::MatrixXd> llt(H + Sl);
                if (llt.info() != Eigen::Success) {
                    return inf;
                }
                const Eigen::VectorXd beta = llt.solve(b);
                const double dev           = deviance_at(pr, X * beta + pr.offset);
                const double edf           = llt.solve(H).trace();
                const double denom         = nd - edf;
                if (!(denom > 0.0) || !std::isfinite(dev)) {
                    return inf;
                }
                return nd * dev / (denom * denom);
            };
            const Eigen::VectorXd next = gcv_grid_search(lambda, gcv);
            if (next.isApprox(lambda, 0.0) || (next - lambda).cwiseAbs().maxCoeff() == 0.0) {
                break;
            }
            lambda = next;
            S      = assemble_penalty(blocks, lambda, p);
            st     = pirls_inner(pr, S, blocks, lambda, design.column_names(), &st.beta, options);
        }
    }

    FitResult fit;
    fit.family            = family;
    fit.coefficient_names = design.column_names();
    fit.beta              = st.beta;
    fit.lambda            = lambda;
    for (const auto& b : blocks) {
        fit.block_names.push_back(b.name);
    }
    fit.eta        = st.eta;
    fit.mu         = Eigen::VectorXd(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        fit.mu(i) = family.mean(st.eta(i), trials(i));
    }
    fit.deviance           = st.deviance;
    fit.penalized_deviance = st.penalized;
    fit.converged          = st.converged;
    fit.iterations         = st.iterations;
    fit.message            = st.message;
    if (family.kind == FamilyKind::negative_binomial) {
        fit.nb_theta = family.nb_theta;
    }

    Eigen::VectorXd w(n), wobs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i)    = family.fisher_weight(st.eta(i), trials(i));
        wobs(i) = family.observed_weight(y(i), st.eta(i), trials(i));
    }
    const Eigen::MatrixXd H = weighted_crossprod(X, w);
    Eigen::LLT<Eigen::MatrixXd> llt(H + S);
    if (llt.info() != Eigen::Success) {
        diagnose_singular(pr, blocks, lambda, design.column_names());
    }
    const Eigen::MatrixXd Vinv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::VectorXd fdiag = (Vinv * H).diagonal();
    fit.edf                     = block_edf(fdiag, blocks);
    fit.edf_total               = fdiag.sum();

    const double nd = static_cast<double>(n);
    if (family.kind == FamilyKind::gaussian) {
        const double rss = (y - fit.mu).squaredNorm();
        fit.dispersion   = nd > fit.edf_total ? rss / (nd - fit.edf_total) : rss / nd;
        if (!(fit.dispersion > 0.0)) {
            fit.dispersion = std::numeric_limits<double>::min();
        }
    }
    fit.gcv       = nd > fit.edf_total ? nd * fit.deviance / ((nd - fit.edf_total) * (nd - fit.edf_total)) : inf;
    fit.cov_model = fit.dispersion * 0.5 * (Vinv + Vinv.transpose());
    fit.hessian   = (weighted_crossprod(X, wobs) + S) / fit.dispersion;

    std::vector<std::string> groups = options.groups;
    if (groups.empty()) {
        groups.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            groups.push_back(std::to_string(i));
        }
    }
    fit.cov_sandwich = sandwich_covariance(fit, score_contributions(design, y, fit, groups));
    return fit;
}

Eigen::MatrixXd score_contributions(const Design& design, const Eigen::VectorXd& y, const FitResult& fit,
                                    const std::vector<std::string>& groups)
{
    const Eigen::MatrixXd& X = design.X();
    const Eigen::Index n     = X.rows();
    if (static_cast<Eigen::Index>(groups.size()) != n || y.size() != n || fit.eta.size() != n) {
        throw DataError("score contributions need one group label and one response per design row");
    }
    const Eigen::VectorXd trials = design.trials().size() == n ? design.trials() : Eigen::VectorXd::Ones(n);
    std::unordered_map<std::string, Eigen::Index> index;
    std::vector<Eigen::Index> unit(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted]               = index.emplace(groups[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(index.size()));
        unit[static_cast<std::size_t>(i)] = it->second;
    }
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(index.size()), X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = fit.family.score(y(i), fit.eta(i), trials(i)) / fit.dispersion;
        U.row(unit[static_cast<std::size_t>(i)]) += s * X.row(i);
    }
    return U;
}

Eigen::MatrixXd sandwich_covariance(const FitResult& fit, const Eigen::MatrixXd& unit_scores)
{
    const Eigen::Index p = fit.hessian.rows();
    if (unit_scores.cols() != p) {
        throw DataError(fmt::format("unit scores have {} columns, model has {} coefficients", unit_scores.cols(), p));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
    if (llt.info() != Eigen::Success) {
        throw NumericError("sandwich covariance: penalized Hessian A is singular");
    }
    const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd B    = unit_scores.transpose() * unit_scores;
    Eigen::MatrixXd V          = Ainv * B * Ainv;
    return 0.5 * (V + V.transpose());
}

ThetaEstimate profile_nb_theta(const Eigen::VectorXd& y, const Eigen::VectorXd& mu)
{
    if (y.size() != mu.size() || y.size() == 0) {
        throw DataError("theta profiling needs equally sized, non-empty response and mean vectors");
    }
    auto negll = [&](double log_theta) {
        const double theta = std::exp(log_theta);
        double ll          = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            ll += nb_log_likelihood(y(i), mu(i), theta);
        }
        return -ll;
    };
    const double lo = std::log(1e-4);
    const double hi = std::log(nb_theta_cap);
    boost::uintmax_t max_iter = 500;
    const auto [x, fx] = boost::math::tools::brent_find_minima(negll, lo, hi, 40, max_iter);
    // the profile may be monotone up to the cap (no overdispersion)
    if (hi - x < 1e-2 || negll(hi) <= fx) {
        return {nb_theta_cap, true};
    }
    return {std::exp(x), false};
}

NbThetaResult estimate_nb_theta(const Design& design, const Eigen::VectorXd& y, const FitResult& initial,
                                const LambdaSpec& lambda, const PirlsOptions& options)
{
    NbThetaResult out;
    out.fit              = initial;
    double theta_old     = initial.nb_theta.value_or(std::numeric_limits<double>::quiet_NaN());
    PirlsOptions opt     = options;
    constexpr int rounds = 30;
    for (int r = 1; r <= rounds; ++r) {
        out.rounds       = r;
        const auto est   = profile_nb_theta(y, out.fit.mu);
        out.theta        = est.theta;
        out.poisson_like = est.poisson_like;
        if (lambda.select() && out.fit.lambda.size() > 0) {
            opt.lambda_start = out.fit.lambda;
        }
        out.fit = fit_pirls(design, y, Family::negative_binomial(est.theta), lambda, opt);
        if (std::isfinite(theta_old) && std::abs(std::log(est.theta) - std::log(theta_old)) < 1e-6) {
            break;
        }
        theta_old = est.theta;
    }
    out.fit.poisson_like = out.poisson_like;
    if (out.poisson_like) {
        spdlog::info("negative binomial theta reached the cap {:g}; data look Poisson-like", nb_theta_cap);
    }
    return out;
}

FitResult fit_negative_binomial(const Design& design, const Eigen::VectorXd& y, const LambdaSpec& lambda,
                                const PirlsOptions& options)
{
    const FitResult pilot = fit_pirls(design, y, Family::poisson(), lambda, options);
    return estimate_nb_theta(design, y, pilot, lambda, options).fit;
}

Eigen::VectorXd predict(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& offset,
                        PredictType type)
{
    if (X.cols() != fit.beta.size()) {
        throw DataError(fmt::format("new design has {} columns, fit has {} coefficients", X.cols(), fit.beta.size()));
    }
    Eigen::VectorXd eta = X * fit.beta + offset;
    if (type == PredictType::response) {
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            eta(i) = fit.family.linkinv(eta(i));
        }
    }
    return eta;
}

Eigen::VectorXd predict(const FitResult& fit, const Design& design, const Frame& newdata, PredictType type)
{
    return predict(fit, design.model_matrix(newdata), design.offset_of(newdata), type);
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

nlohmann::json to_json(const FitResult& fit)
{
    nlohmann::json j;
    j["family"]  = fit.family.name();
    j["link"]    = fit.family.link == Link::identity ? "identity" : fit.family.link == Link::log ? "log" : "logit";
    auto& coefs  = j["coefficients"];
    coefs        = nlohmann::json::array();
    for (std::size_t i = 0; i < fit.coefficient_names.size(); ++i) {
        coefs.push_back({{"name", fit.coefficient_names[i]}, {"estimate", fit.beta(static_cast<Eigen::Index>(i))}});
    }
    auto& blocks = j["smoothing"];
    blocks       = nlohmann::json::array();
    for (std::size_t k = 0; k < fit.block_names.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        blocks.push_back({{"block", fit.block_names[k]}, {"lambda", fit.lambda(kk)}, {"edf", fit.edf(kk)}});
    }
    j["edf_total"]  = fit.edf_total;
    j["deviance"]   = fit.deviance;
    j["dispersion"] = fit.dispersion;
    j["gcv"]        = std::isfinite(fit.gcv) ? nlohmann::json(fit.gcv) : nlohmann::json(nullptr);
    if (fit.nb_theta) {
        j["nb_theta"] = *fit.nb_theta;
        j["sigma2"]   = 1.0 / *fit.nb_theta;
    }
    else {
        j["nb_theta"] = nullptr;
        j["sigma2"]   = nullptr;
    }
    j["poisson_like"] = fit.poisson_like;
    j["cov_model"]    = matrix_to_json(fit.cov_model);
    j["cov_sandwich"] = matrix_to_json(fit.cov_sandwich);
    j["convergence"]  = {{"converged", fit.converged}, {"iterations", fit.iterations}, {"message", fit.message}};
    j["n"]            = fit.eta.size();
    return j;
}

} // namespace epigam
