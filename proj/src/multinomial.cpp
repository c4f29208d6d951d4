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
#include "epigam/multinomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "epigam/errors.hpp"
#include "epigam/glm.hpp"

namespace epigam
{

std::optional<Eigen::Index> MultinomialFit::index_of(const std::string& name) const
{
    const auto it = std::find(coefficient_names.begin(), coefficient_names.end(), name);
    if (it == coefficient_names.end()) {
        return std::nullopt;
    }
    return static_cast<Eigen::Index>(it - coefficient_names.begin());
}

double MultinomialFit::coefficient(const std::string& name) const
{
    const auto idx = index_of(name);
    if (!idx) {
        throw ConfigError(fmt::format("multinomial fit has no coefficient '{}'", name));
    }
    return beta(*idx);
}

namespace
{

constexpr double inf = std::numeric_limits<double>::infinity();

std::vector<Eigen::Index> logit_order(Eigen::Index K, Eigen::Index reference)
{
    std::vector<Eigen::Index> out;
    for (Eigen::Index k = 0; k < K; ++k) {
        if (k != reference) {
            out.push_back(k);
        }
    }
    return out;
}

Eigen::MatrixXd logits(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, Eigen::Index L)
{
    const Eigen::Index p = X.cols();
    Eigen::MatrixXd eta(X.rows(), L);
    for (Eigen::Index l = 0; l < L; ++l) {
        eta.col(l) = X * beta.segment(l * p, p);
    }
    return eta;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& eta, Eigen::Index K, Eigen::Index reference)
{
    const auto order = logit_order(K, reference);
    Eigen::MatrixXd pi(eta.rows(), K);
    for (Eigen::Index i = 0; i < eta.rows(); ++i) {
        const double m = std::max(0.0, eta.row(i).maxCoeff());
        double total   = std::exp(-m);
        pi(i, reference) = total;
        for (std::size_t l = 0; l < order.size(); ++l) {
            const double e  = std::exp(eta(i, static_cast<Eigen::Index>(l)) - m);
            pi(i, order[l]) = e;
            total += e;
        }
        pi.row(i) /= total;
    }
    return pi;
}

double deviance(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& pi)
{
    double dev = 0.0;
    for (Eigen::Index i = 0; i < counts.rows(); ++i) {
        const double n = counts.row(i).sum();
        for (Eigen::Index k = 0; k < counts.cols(); ++k) {
            const double z = counts(i, k);
            if (z > 0.0) {
                if (!(pi(i, k) > 0.0)) {
                    return inf;
                }
                dev += 2.0 * z * std::log(z / (n * pi(i, k)));
            }
        }
    }
    return dev;
}

Eigen::VectorXd gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts, const Eigen::MatrixXd& pi,
                         const std::vector<Eigen::Index>& order)
{
    const Eigen::Index p  = X.cols();
    const Eigen::VectorXd n = counts.rowwise().sum();
    Eigen::VectorXd g(p * static_cast<Eigen::Index>(order.size()));
    for (std::size_t l = 0; l < order.size(); ++l) {
        const Eigen::VectorXd r = counts.col(order[l]) - n.cwiseProduct(pi.col(order[l]));
        g.segment(static_cast<Eigen::Index>(l) * p, p) = X.transpose() * r;
    }
    return g;
}

/// Expected (= observed, canonical link) information matrix.
Eigen::MatrixXd information(const Eigen::MatrixXd& X, const Eigen::VectorXd& n, const Eigen::MatrixXd& pi,
                            const std::vector<Eigen::Index>& order)
{
    const Eigen::Index p = X.cols();
    const auto L         = static_cast<Eigen::Index>(order.size());
    Eigen::MatrixXd H(L * p, L * p);
    for (Eigen::Index a = 0; a < L; ++a) {
        for (Eigen::Index b = a; b < L; ++b) {
            const Eigen::ArrayXd pa = pi.col(order[static_cast<std::size_t>(a)]).array();
            const Eigen::ArrayXd pb = pi.col(order[static_cast<std::size_t>(b)]).array();
            Eigen::ArrayXd w        = -n.array() * pa * pb;
            if (a == b) {
                w += n.array() * pa;
            }
            const Eigen::MatrixXd Xw  = X.array().colwise() * w;
            const Eigen::MatrixXd blk = X.transpose() * Xw;
            H.block(a * p, b * p, p, p) = blk;
            if (a != b) {
                H.block(b * p, a * p, p, p) = blk.transpose();
            }
        }
    }
    return 0.5 * (H + H.transpose());
}

std::vector<PenaltyBlock> replicate_blocks(const std::vector<PenaltyBlock>& blocks, Eigen::Index p,
                                           const std::vector<std::string>& logit_names)
{
    std::vector<PenaltyBlock> out;
    for (std::size_t l = 0; l < logit_names.size(); ++l) {
        for (const auto& b : blocks) {
            PenaltyBlock c = b;
            c.name         = logit_names[l] + ":" + b.name;
            c.start        = b.start + static_cast<Eigen::Index>(l) * p;
            out.push_back(std::move(c));
        }
    }
    return out;
}

void validate_counts(const Eigen::MatrixXd& counts, Eigen::Index rows)
{
    if (counts.rows() != rows) {
        throw DataError(fmt::format("count matrix has {} rows, design has {}", counts.rows(), rows));
    }
    if (counts.cols() < 2) {
        throw DataError("multinomial model needs at least two categories");
    }
    if (!counts.allFinite() || (counts.array() < 0.0).any()) {
        throw DataError("multinomial counts must be finite and non-negative");
    }
}

} // namespace

Eigen::MatrixXd multinomial_probs(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta, Eigen::Index K,
                                  Eigen::Index reference)
{
    const Eigen::Index L = K - 1;
    if (beta.size() != L * X.cols()) {
        throw DataError(fmt::format("stacked beta has {} entries, expected {}", beta.size(), L * X.cols()));
    }
    return softmax(logits(X, beta, L), K, reference);
}

Eigen::MatrixXd predict_multinomial(const MultinomialFit& fit, const Eigen::MatrixXd& X)
{
    return multinomial_probs(X, fit.beta, fit.num_categories(), fit.reference);
}

double multinomial_log_pmf(const Eigen::VectorXd& z, const Eigen::VectorXd& pi)
{
    double out = std::lgamma(z.sum() + 1.0);
    for (Eigen::Index k = 0; k < z.size(); ++k) {
        out -= std::lgamma(z(k) + 1.0);
        if (z(k) > 0.0) {
            if (!(pi(k) > 0.0)) {
                return -inf;
            }
            out += z(k) * std::log(pi(k));
        }
    }
    return out;
}

double multinomial_loglik(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts, const Eigen::VectorXd& beta,
                          Eigen::Index reference)
{
    const Eigen::MatrixXd pi = multinomial_probs(X, beta, counts.cols(), reference);
    double ll                = 0.0;
    for (Eigen::Index i = 0; i < counts.rows(); ++i) {
        ll += multinomial_log_pmf(counts.row(i).transpose(), pi.row(i).transpose());
    }
    return ll;
}

Eigen::VectorXd multinomial_gradient(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts,
                                     const Eigen::VectorXd& beta, Eigen::Index reference)
{
    const Eigen::MatrixXd pi = multinomial_probs(X, beta, counts.cols(), reference);
    return gradient(X, counts, pi, logit_order(counts.cols(), reference));
}

LogScore log_score(const Eigen::MatrixXd& pi, const Eigen::MatrixXd& counts)
{
    if (pi.rows() != counts.rows() || pi.cols() != counts.cols()) {
        throw DataError("log score: probability and count matrices differ in shape");
    }
    LogScore out;
    out.scores.resize(pi.rows());
    for (Eigen::Index i = 0; i < pi.rows(); ++i) {
        if (std::abs(pi.row(i).sum() - 1.0) > 1e-8 || (pi.row(i).array() < 0.0).any()) {
            throw DataError(fmt::format("log score: probabilities in row {} do not form a distribution", i));
        }
        const double lp = multinomial_log_pmf(counts.row(i).transpose(), pi.row(i).transpose());
        out.scores(i)   = -lp;
        if (!std::isfinite(lp)) {
            out.impossible_rows.push_back(i);
        }
    }
    return out;
}

MultinomialFit fit_multinomial(const Design& design, const Eigen::MatrixXd& counts, const LambdaSpec& lambda_spec,
                               const MultinomialOptions& options)
{
    const Eigen::MatrixXd& X = design.X();
    const Eigen::Index n     = X.rows();
    const Eigen::Index p     = X.cols();
    validate_counts(counts, n);
    const Eigen::Index K = counts.cols();
    if (options.reference < 0 || options.reference >= K) {
        throw ConfigError(fmt::format("reference category {} outside 0..{}", options.reference, K - 1));
    }
    if (design.offset().size() == n && design.offset().cwiseAbs().maxCoeff() > 0.0) {
        throw ConfigError("offsets are not supported in the multinomial model");
    }
    const Eigen::VectorXd totals = counts.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < K; ++k) {
        if (!(totals(k) > 0.0)) {
            throw DataError(fmt::format("category {} has no positive counts", k));
        }
    }
    if (!options.groups.empty() && static_cast<Eigen::Index>(options.groups.size()) != n) {
        throw DataError(fmt::format("{} sandwich groups given for {} rows", options.groups.size(), n));
    }

    MultinomialFit fit;
    fit.categories = options.categories;
    if (fit.categories.empty()) {
        for (Eigen::Index k = 0; k < K; ++k) {
            fit.categories.push_back(fmt::format("cat{}", k + 1));
        }
    }
    if (static_cast<Eigen::Index>(fit.categories.size()) != K) {
        throw ConfigError(fmt::format("{} category names for {} categories", fit.categories.size(), K));
    }
    fit.reference        = options.reference;
    fit.logit_categories = logit_order(K, options.reference);
    fit.base_names       = design.column_names();
    const auto L         = static_cast<Eigen::Index>(fit.logit_categories.size());
    std::vector<std::string> logit_names;
    for (auto k : fit.logit_categories) {
        logit_names.push_back(fit.categories[static_cast<std::size_t>(k)]);
        for (const auto& c : fit.base_names) {
            fit.coefficient_names.push_back(logit_names.back() + ":" + c);
        }
    }
    const auto blocks = replicate_blocks(design.blocks(), p, logit_names);
    for (const auto& b : blocks) {
        fit.block_names.push_back(b.name);
    }

    Eigen::VectorXd lambda = lambda_spec.resolve(blocks.size());
    if (lambda_spec.select() && options.lambda_start && options.lambda_start->size() == lambda.size()) {
        lambda = *options.lambda_start;
    }
    {
        // identifiability is a property of the shared design; use the weakest penalty per block
        const auto nb = static_cast<Eigen::Index>(design.blocks().size());
        Eigen::VectorXd weakest(nb);
        for (Eigen::Index b = 0; b < nb; ++b) {
            weakest(b) = lambda(b);
            for (Eigen::Index l = 1; l < L; ++l) {
                weakest(b) = std::min(weakest(b), lambda(l * nb + b));
            }
        }
        check_identifiable(X, design.blocks(), weakest, design.column_names());
    }

    const Eigen::VectorXd n_i = counts.rowwise().sum();
    const Eigen::Index P      = L * p;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(P);
    const auto icpt      = std::find(fit.base_names.begin(), fit.base_names.end(), "(Intercept)");
    if (icpt != fit.base_names.end()) {
        const auto j = static_cast<Eigen::Index>(icpt - fit.base_names.begin());
        for (Eigen::Index l = 0; l < L; ++l) {
            beta(l * p + j) = std::log(totals(fit.logit_categories[static_cast<std::size_t>(l)]) / totals(options.reference));
        }
    }

    auto penalized = [&](const Eigen::VectorXd& b, const Eigen::MatrixXd& S) {
        const double d = deviance(counts, softmax(logits(X, b, L), K, options.reference));
        return d + b.dot(S * b);
    };

    auto newton = [&](const Eigen::MatrixXd& S) {
        double pen = penalized(beta, S);
        fit.converged  = false;
        fit.separation = false;
        fit.message.clear();
        for (int it = 1; it <= options.max_iterations; ++it) {
            fit.iterations          = it;
            const Eigen::MatrixXd pi = softmax(logits(X, beta, L), K, options.reference);
            const Eigen::VectorXd g  = gradient(X, counts, pi, fit.logit_categories) - S * beta;
            const Eigen::MatrixXd H  = information(X, n_i, pi, fit.logit_categories);
            Eigen::LLT<Eigen::MatrixXd> llt(H + S);
            if (llt.info() != Eigen::Success) {
                check_identifiable(X, design.blocks(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.blocks().size())),
                                   design.column_names());
                throw NumericError("multinomial Newton system is numerically singular");
            }
            const Eigen::VectorXd step = llt.solve(g);
            double frac                = 1.0;
            Eigen::VectorXd trial      = beta + step;
            double pen_new             = penalized(trial, S);
            int h                      = 0;
            while (!(pen_new <= pen + 1e-12 * std::abs(pen)) && h < options.max_step_halvings) {
                frac *= 0.5;
                trial   = beta + frac * step;
                pen_new = penalized(trial, S);
                ++h;
            }
            if (!(pen_new <= pen + 1e-12 * std::abs(pen))) {
                fit.converged = std::abs(pen_new - pen) <= 1e-6 * (std::abs(pen) + 0.1);
                if (!fit.converged) {
                    fit.message = "step halving failed to reduce the penalized deviance";
                }
                return;
            }
            const double change = std::abs(pen_new - pen);
            beta                = trial;
            pen                 = pen_new;
            const double max_eta = logits(X, beta, L).cwiseAbs().maxCoeff();
            if (max_eta > options.separation_bound) {
                fit.separation = true;
                fit.message    = fmt::format("separation: a logit diverges (|eta| = {:.3g} > {:g})", max_eta,
                                             options.separation_bound);
                return;
            }
            if (change < options.tolerance * (std::abs(pen) + 0.1)) {
                fit.converged = true;
                return;
            }
        }
        fit.message = fmt::format("Newton iteration did not converge in {} iterations", options.max_iterations);
    };

    Eigen::MatrixXd S = assemble_penalty(blocks, lambda, P);
    newton(S);

    if (lambda_spec.select() && !blocks.empty() && !fit.separation) {
        Eigen::Index live_rows = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            live_rows += n_i(i) > 0.0 ? 1 : 0;
        }
        const double n_eff = static_cast<double>(live_rows * L);
        for (int round = 0; round < options.max_selection_rounds; ++round) {
            const Eigen::MatrixXd pi = softmax(logits(X, beta, L), K, options.reference);
            const Eigen::MatrixXd H  = information(X, n_i, pi, fit.logit_categories);
            const Eigen::VectorXd b  = H * beta + gradient(X, counts, pi, fit.logit_categories);
            auto gcv = [&](const Eigen::VectorXd& lam) {
                Eigen::LLT<Eigen::MatrixXd> llt(H + assemble_penalty(blocks, lam, P));
                if (llt.info() != Eigen::Success) {
                    return inf;
                }
                const Eigen::VectorXd bl = llt.solve(b);
                const double dev         = deviance(counts, softmax(logits(X, bl, L), K, options.reference));
                const double denom       = n_eff - llt.solve(H).trace();
                if (!(denom > 0.0) || !std::isfinite(dev)) {
                    return inf;
                }
                return n_eff * dev / (denom * denom);
            };
            const Eigen::VectorXd next = gcv_grid_search(lambda, gcv);
            if ((next - lambda).cwiseAbs().maxCoeff() == 0.0) {
                break;
            }
            lambda = next;
            S      = assemble_penalty(blocks, lambda, P);
            newton(S);
            if (fit.separation) {
                break;
            }
        }
    }

    fit.beta   = beta;
    fit.lambda = lambda;
    fit.probs  = softmax(logits(X, beta, L), K, options.reference);
    fit.deviance = deviance(counts, fit.probs);
    fit.loglik   = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        fit.loglik += multinomial_log_pmf(counts.row(i).transpose(), fit.probs.row(i).transpose());
    }

    const Eigen::MatrixXd H = information(X, n_i, fit.probs, fit.logit_categories);
    fit.hessian             = H + S;
    Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
    if (llt.info() != Eigen::Success) {
        // happens under separation where the information degenerates
        fit.cov_model    = Eigen::MatrixXd::Constant(P, P, std::numeric_limits<double>::quiet_NaN());
        fit.cov_sandwich = fit.cov_model;
        fit.edf          = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(blocks.size()),
                                                     std::numeric_limits<double>::quiet_NaN());
        fit.edf_total    = std::numeric_limits<double>::quiet_NaN();
        fit.converged    = false;
        if (fit.message.empty()) {
            fit.message = "information matrix is singular at the estimate";
        }
        return fit;
    }
    const Eigen::MatrixXd Vinv = llt.solve(Eigen::MatrixXd::Identity(P, P));
    fit.cov_model              = 0.5 * (Vinv + Vinv.transpose());
    const Eigen::VectorXd fdiag = (Vinv * H).diagonal();
    fit.edf                     = block_edf(fdiag, blocks);
    fit.edf_total               = fdiag.sum();

    std::vector<std::string> groups = options.groups;
    if (groups.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) {
            groups.push_back(std::to_string(i));
        }
    }
    fit.cov_sandwich = multinomial_sandwich(fit, X, counts, groups);
    return fit;
}

Eigen::MatrixXd multinomial_score_contributions(const Eigen::MatrixXd& X, const Eigen::MatrixXd& counts,
                                                const MultinomialFit& fit, const std::vector<std::string>& groups)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (static_cast<Eigen::Index>(groups.size()) != n || counts.rows() != n) {
        throw DataError("score contributions need one group label and one count row per design row");
    }
    const Eigen::MatrixXd pi = multinomial_probs(X, fit.beta, fit.num_categories(), fit.reference);
    std::unordered_map<std::string, Eigen::Index> index;
    std::vector<Eigen::Index> unit(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = index.emplace(groups[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(index.size()));
        unit[static_cast<std::size_t>(i)] = it->second;
    }
    const auto L = static_cast<Eigen::Index>(fit.logit_categories.size());
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(index.size()), L * p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ni = counts.row(i).sum();
        for (Eigen::Index l = 0; l < L; ++l) {
            const Eigen::Index k = fit.logit_categories[static_cast<std::size_t>(l)];
            U.row(unit[static_cast<std::size_t>(i)]).segment(l * p, p) += (counts(i, k) - ni * pi(i, k)) * X.row(i);
        }
    }
    return U;
}

Eigen::MatrixXd multinomial_sandwich(const MultinomialFit& fit, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& counts, const std::vector<std::string>& groups)
{
    const Eigen::MatrixXd U = multinomial_score_contributions(X, counts, fit, groups);
    const Eigen::Index P    = fit.hessian.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(fit.hessian);
    if (llt.info() != Eigen::Success) {
        throw NumericError("multinomial sandwich: penalized Hessian is singular");
    }
    const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(P, P));
    const Eigen::MatrixXd V    = Ainv * (U.transpose() * U) * Ainv;
    return 0.5 * (V + V.transpose());
}

nlohmann::json to_json(const MultinomialFit& fit)
{
    nlohmann::json j;
    j["family"]     = "multinomial";
    j["link"]       = "logit";
    j["categories"] = fit.categories;
    j["reference"]  = fit.categories[static_cast<std::size_t>(fit.reference)];
    auto& coefs     = j["coefficients"];
    coefs           = nlohmann::json::array();
    const Eigen::Index p = fit.num_columns();
    for (std::size_t l = 0; l < fit.logit_categories.size(); ++l) {
        const auto& cat = fit.categories[static_cast<std::size_t>(fit.logit_categories[l])];
        for (Eigen::Index c = 0; c < p; ++c) {
            const Eigen::Index idx = static_cast<Eigen::Index>(l) * p + c;
            coefs.push_back({{"logit", cat},
                             {"name", fit.base_names[static_cast<std::size_t>(c)]},
                             {"estimate", fit.beta(idx)}});
        }
    }
    auto& blocks = j["smoothing"];
    blocks       = nlohmann::json::array();
    for (std::size_t k = 0; k < fit.block_names.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        blocks.push_back({{"block", fit.block_names[k]}, {"lambda", fit.lambda(kk)}, {"edf", fit.edf(kk)}});
    }
    j["edf_total"]    = fit.edf_total;
    j["deviance"]     = fit.deviance;
    j["loglik"]       = fit.loglik;
    j["cov_model"]    = matrix_to_json(fit.cov_model);
    j["cov_sandwich"] = matrix_to_json(fit.cov_sandwich);
    j["convergence"]  = {{"converged", fit.converged},
                        {"iterations", fit.iterations},
                        {"separation", fit.separation},
                        {"message", fit.message}};
    j["n"]            = fit.probs.rows();
    return j;
}

} // namespace epigam
