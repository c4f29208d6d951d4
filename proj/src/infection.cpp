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
#include "epigam/infection.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/csv.hpp"
#include "epigam/dates.hpp"
#include "epigam/errors.hpp"
#include "epigam/parallel.hpp"
#include "epigam/rng.hpp"

namespace epigam
{

WeeklyPanel::WeeklyPanel(std::vector<std::string> w, std::vector<std::string> r, std::vector<std::string> a)
    : weeks(std::move(w))
    , districts(std::move(r))
    , age_groups(std::move(a))
    , counts(weeks.size() * districts.size() * age_groups.size(), 0.0)
{
}

void WeeklyPanel::validate() const
{
    if (districts.empty() || age_groups.empty()) {
        throw DataError("weekly panel has no districts or no age groups");
    }
    if (weeks.size() < 2) {
        throw DataError(fmt::format("weekly panel needs at least 2 weeks, has {}", weeks.size()));
    }
    if (counts.size() != weeks.size() * districts.size() * age_groups.size()) {
        throw DataError("weekly panel count array does not match its dimensions");
    }
    for (double c : counts) {
        if (!(c >= 0.0) || !std::isfinite(c)) {
            throw DataError(fmt::format("weekly panel contains an invalid count {}", c));
        }
    }
}

void PopulationTable::validate() const
{
    if (pop.rows() != static_cast<Eigen::Index>(districts.size()) ||
        pop.cols() != static_cast<Eigen::Index>(age_groups.size())) {
        throw DataError("population table does not match its labels");
    }
    for (Eigen::Index r = 0; r < pop.rows(); ++r) {
        for (Eigen::Index a = 0; a < pop.cols(); ++a) {
            if (!(pop(r, a) > 0.0) || !std::isfinite(pop(r, a))) {
                throw DataError(fmt::format("population of district '{}', age group '{}' must be positive",
                                            districts[static_cast<std::size_t>(r)],
                                            age_groups[static_cast<std::size_t>(a)]));
            }
        }
    }
}

std::string lag_column(const std::string& age_group)
{
    return fmt::format("lag({})", age_group);
}

std::string week_column(const std::string& week)
{
    return fmt::format("week[{}]", week);
}

namespace
{

void check_alignment(const WeeklyPanel& panel, const PopulationTable& pop)
{
    panel.validate();
    pop.validate();
    if (pop.districts != panel.districts || pop.age_groups != panel.age_groups) {
        throw DataError("population table districts/age groups do not match the panel");
    }
}

} // namespace

InfectionModelData build_infection_design(const WeeklyPanel& panel, const PopulationTable& pop, std::size_t target,
                                          double delta)
{
    if (panel.districts.empty() || panel.age_groups.empty()) {
        throw DataError("empty design: the panel has no districts or no age groups");
    }
    check_alignment(panel, pop);
    if (!(delta > 0.0)) {
        throw ConfigError(fmt::format("delta must be positive, got {}", delta));
    }
    const std::size_t W = panel.num_weeks(), R = panel.num_districts(), A = panel.num_ages();
    if (target >= A) {
        throw ConfigError(fmt::format("target age index {} outside 0..{}", target, A - 1));
    }
    const std::size_t n = (W - 1) * R;
    std::vector<std::string> week(n), district(n);
    std::vector<std::vector<double>> lags(A, std::vector<double>(n));
    std::vector<double> offset(n);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    std::size_t i = 0;
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t w = 1; w < W; ++w, ++i) {
            week[i]     = panel.weeks[w];
            district[i] = panel.districts[r];
            for (std::size_t k = 0; k < A; ++k) {
                lags[k][i] = std::log(panel.at(w - 1, r, k) + delta);
            }
            offset[i]                       = std::log(pop.pop(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(target)));
            y(static_cast<Eigen::Index>(i)) = panel.at(w, r, target);
        }
    }
    Frame frame;
    frame.add("week", week).add("offset", offset);
    DesignSpec spec;
    spec.intercept = false;
    spec.offset    = "offset";
    spec.terms.push_back(FactorTerm{"week", {panel.weeks.begin() + 1, panel.weeks.end()}, false});
    InfectionModelData out{{}, std::move(y), std::move(district), {}};
    for (std::size_t k = 0; k < A; ++k) {
        const auto name = lag_column(panel.age_groups[k]);
        frame.add(name, lags[k]);
        spec.terms.push_back(LinearTerm{name});
        out.lag_columns.push_back(name);
    }
    out.design = Design::build(spec, frame);
    return out;
}

std::vector<InfectionFit> fit_infection_model(const WeeklyPanel& panel, const PopulationTable& pop, double delta)
{
    check_alignment(panel, pop);
    const std::size_t A = panel.num_ages();
    std::vector<InfectionFit> fits(A);
    parallel_for(A, [&](std::size_t a) {
        auto data = build_infection_design(panel, pop, a, delta);
        PirlsOptions opt;
        opt.groups = data.groups;
        fits[a]    = {panel.age_groups[a], fit_negative_binomial(data.design, data.response, LambdaSpec::selected(), opt),
                      data.lag_columns};
        if (!fits[a].fit.converged) {
            spdlog::warn("infection model for age group {} did not converge: {}", panel.age_groups[a],
                         fits[a].fit.message);
        }
    });
    return fits;
}

WeeklyPanel simulate_infection_panel(const InfectionTruth& truth, const PopulationTable& pop,
                                     const std::vector<std::string>& weeks, std::uint64_t seed)
{
    pop.validate();
    const std::size_t W = weeks.size(), R = pop.districts.size(), A = pop.age_groups.size();
    if (W < 2) {
        throw ConfigError("simulation needs at least 2 weeks");
    }
    if (truth.week_intercepts.size() != static_cast<Eigen::Index>(W) || truth.lag.rows() != static_cast<Eigen::Index>(A) ||
        truth.lag.cols() != static_cast<Eigen::Index>(A) || truth.initial.rows() != static_cast<Eigen::Index>(R) ||
        truth.initial.cols() != static_cast<Eigen::Index>(A)) {
        throw ConfigError("infection truth dimensions do not match weeks/districts/age groups");
    }
    if (!(truth.nb_theta > 0.0) || !(truth.delta > 0.0)) {
        throw ConfigError("infection truth needs positive nb_theta and delta");
    }
    WeeklyPanel panel(weeks, pop.districts, pop.age_groups);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t a = 0; a < A; ++a) {
            panel.at(0, r, a) = truth.initial(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a));
        }
    }
    const Rng master(seed);
    Eigen::VectorXd loglag(static_cast<Eigen::Index>(A));
    for (std::size_t w = 1; w < W; ++w) {
        Rng rng = master.split(w);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t k = 0; k < A; ++k) {
                loglag(static_cast<Eigen::Index>(k)) = std::log(panel.at(w - 1, r, k) + truth.delta);
            }
            for (std::size_t a = 0; a < A; ++a) {
                const auto ai   = static_cast<Eigen::Index>(a);
                const double mu = std::exp(std::log(pop.pop(static_cast<Eigen::Index>(r), ai)) +
                                           truth.week_intercepts(static_cast<Eigen::Index>(w)) + truth.lag.row(ai).dot(loglag));
                if (!(mu <= 1e9)) {
                    throw NumericError(fmt::format("explosive dynamics: mean {:.3g} in week {} district {} age {}", mu,
                                                   weeks[w], pop.districts[r], pop.age_groups[a]));
                }
                panel.at(w, r, a) = static_cast<double>(rng.negative_binomial(mu, truth.nb_theta));
            }
        }
    }
    return panel;
}

void CdrConfig::validate(std::size_t W, std::size_t A) const
{
    if (mean_cdr.rows() != static_cast<Eigen::Index>(W) || mean_cdr.cols() != static_cast<Eigen::Index>(A)) {
        throw ConfigError(fmt::format("mean CDR must be {} x {}, got {} x {}", W, A, mean_cdr.rows(), mean_cdr.cols()));
    }
    if (!((mean_cdr.array() > 0.0).all() && (mean_cdr.array() <= 1.0).all())) {
        throw ConfigError("mean CDR values must lie in (0, 1]");
    }
    if (!(concentration > 0.0)) {
        throw ConfigError("CDR concentration must be positive");
    }
    if (elasticity.size() != 0 && elasticity.size() != static_cast<Eigen::Index>(A)) {
        throw ConfigError("CDR elasticity needs one value per age group");
    }
    if (elasticity.size() != 0 && (elasticity.array() < 0.0).any()) {
        throw ConfigError("CDR elasticity must be non-negative");
    }
}

WeeklyPanel apply_cdr_thinning(const WeeklyPanel& panel, const CdrConfig& cdr)
{
    panel.validate();
    const std::size_t W = panel.num_weeks(), R = panel.num_districts(), A = panel.num_ages();
    cdr.validate(W, A);
    std::vector<double> max_count(A, 0.0);
    for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t a = 0; a < A; ++a) {
                max_count[a] = std::max(max_count[a], panel.at(w, r, a));
            }
        }
    }
    WeeklyPanel out = panel;
    const Rng master(cdr.seed);
    const int saved_round = std::fegetround();
    std::fesetround(FE_TONEAREST);
    for (std::size_t w = 0; w < W; ++w) {
        Rng rng = master.split(w);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t a = 0; a < A; ++a) {
                const double pi = cdr.mean_cdr(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(a));
                double ratio    = pi;
                if (pi < 1.0 && std::isfinite(cdr.concentration)) {
                    ratio = rng.beta(pi * cdr.concentration, (1.0 - pi) * cdr.concentration);
                }
                if (cdr.elasticity.size() != 0) {
                    ratio *= std::pow((panel.at(w, r, a) + 1.0) / (max_count[a] + 1.0),
                                      cdr.elasticity(static_cast<Eigen::Index>(a)));
                }
                out.at(w, r, a) = std::nearbyint(ratio * panel.at(w, r, a));
            }
        }
    }
    std::fesetround(saved_round);
    return out;
}

double CdrReport::max_abs_standardized() const
{
    double m = 0.0;
    for (const auto& row : lags) {
        m = std::max(m, std::abs(row.standardized));
    }
    return m;
}

double CdrReport::fraction_within(double bound) const
{
    if (lags.empty()) {
        return 1.0;
    }
    std::size_t inside = 0;
    for (const auto& row : lags) {
        inside += std::abs(row.standardized) <= bound ? 1 : 0;
    }
    return static_cast<double>(inside) / static_cast<double>(lags.size());
}

CdrReport cdr_invariance_report(const WeeklyPanel& truth_panel, const WeeklyPanel& thinned, const PopulationTable& pop,
                                double delta)
{
    if (truth_panel.weeks != thinned.weeks || truth_panel.districts != thinned.districts ||
        truth_panel.age_groups != thinned.age_groups) {
        throw DataError("true and thinned panels differ in shape or labels");
    }
    const auto fits_true = fit_infection_model(truth_panel, pop, delta);
    const auto fits_thin = fit_infection_model(thinned, pop, delta);
    CdrReport report;
    for (std::size_t a = 0; a < fits_true.size(); ++a) {
        const auto& ft = fits_true[a].fit;
        const auto& fh = fits_thin[a].fit;
        const Eigen::VectorXd se = ft.se_sandwich();
        for (std::size_t k = 0; k < fits_true[a].lag_columns.size(); ++k) {
            const auto idx = *ft.index_of(fits_true[a].lag_columns[k]);
            CdrComparisonRow row;
            row.model_age_group     = fits_true[a].age_group;
            row.covariate_age_group = truth_panel.age_groups[k];
            row.estimate_true       = ft.beta(idx);
            row.estimate_thinned    = fh.beta(idx);
            row.difference          = row.estimate_true - row.estimate_thinned;
            row.se_true             = se(idx);
            row.standardized        = row.se_true > 0.0 ? row.difference / row.se_true
                                                        : (row.difference == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
            report.lags.push_back(row);
        }
        for (std::size_t w = 1; w < truth_panel.num_weeks(); ++w) {
            const auto idx = *ft.index_of(week_column(truth_panel.weeks[w]));
            report.week_shifts.push_back({fits_true[a].age_group, truth_panel.weeks[w], fh.beta(idx) - ft.beta(idx)});
        }
    }
    return report;
}

void write_infection_coefficients(const std::vector<InfectionFit>& fits, const std::string& path)
{
    CsvWriter out(path, {"model_age_group", "covariate_age_group", "estimate", "se_model", "se_sandwich", "ci_lo", "ci_hi"});
    for (const auto& f : fits) {
        const Eigen::VectorXd sm = f.fit.se_model();
        const Eigen::VectorXd ss = f.fit.se_sandwich();
        for (const auto& col : f.lag_columns) {
            const auto idx = *f.fit.index_of(col);
            const double b = f.fit.beta(idx);
            // "lag(<age>)" -> "<age>"
            const std::string covariate = col.substr(4, col.size() - 5);
            out.row({f.age_group, covariate, format_number(b), format_number(sm(idx)), format_number(ss(idx)),
                     format_number(b - 1.959963984540054 * ss(idx)), format_number(b + 1.959963984540054 * ss(idx))});
        }
    }
}

void write_week_intercepts(const std::vector<InfectionFit>& fits, const std::string& path)
{
    CsvWriter out(path, {"model_age_group", "week", "estimate", "se_sandwich", "note"});
    for (const auto& f : fits) {
        const Eigen::VectorXd ss = f.fit.se_sandwich();
        for (std::size_t j = 0; j < f.fit.coefficient_names.size(); ++j) {
            const auto& name = f.fit.coefficient_names[j];
            if (name.rfind("week[", 0) != 0) {
                continue;
            }
            const auto idx = static_cast<Eigen::Index>(j);
            out.row({f.age_group, name.substr(5, name.size() - 6), format_number(f.fit.beta(idx)),
                     format_number(ss(idx)), "not CDR-invariant"});
        }
    }
}

PopulationTable synthetic_population(std::size_t districts, std::size_t ages, std::uint64_t seed)
{
    static const std::vector<std::string> three = {"0-14", "15-59", "60+"};
    static const std::vector<std::string> six   = {"0-4", "5-11", "12-20", "21-39", "40-65", "65+"};
    PopulationTable pop;
    for (std::size_t r = 0; r < districts; ++r) {
        pop.districts.push_back(fmt::format("D{:03d}", r + 1));
    }
    for (std::size_t a = 0; a < ages; ++a) {
        pop.age_groups.push_back(ages == 3 ? three[a] : ages == 6 ? six[a] : fmt::format("age{}", a + 1));
    }
    Rng rng = Rng(seed).split("population");
    pop.pop.resize(static_cast<Eigen::Index>(districts), static_cast<Eigen::Index>(ages));
    for (Eigen::Index r = 0; r < pop.pop.rows(); ++r) {
        for (Eigen::Index a = 0; a < pop.pop.cols(); ++a) {
            pop.pop(r, a) = std::round(rng.uniform(8e4, 1.2e5));
        }
    }
    return pop;
}

std::vector<std::string> synthetic_weeks(std::size_t n)
{
    std::vector<std::string> out;
    const Date start = parse_iso_week("2021-W01");
    for (std::size_t w = 0; w < n; ++w) {
        out.push_back(iso_week_label(start + std::chrono::days{7 * static_cast<long>(w)}));
    }
    return out;
}

InfectionTruth default_infection_truth(const PopulationTable& pop, std::size_t weeks, std::uint64_t seed)
{
    const auto A = static_cast<Eigen::Index>(pop.age_groups.size());
    const auto R = static_cast<Eigen::Index>(pop.districts.size());
    InfectionTruth t;
    // rows sum to 0.6, so log counts settle at (log pop + theta_w) / 0.4
    t.lag = Eigen::MatrixXd::Constant(A, A, A > 1 ? 0.2 / static_cast<double>(A - 1) : 0.0);
    t.lag.diagonal().setConstant(0.4);
    const double target_log = 4.5;
    const double row_sum    = t.lag.row(0).sum();
    const double mean_logpop = pop.pop.array().log().mean();
    t.week_intercepts.resize(static_cast<Eigen::Index>(weeks));
    for (Eigen::Index w = 0; w < t.week_intercepts.size(); ++w) {
        t.week_intercepts(w) = (1.0 - row_sum) * target_log - mean_logpop + 0.1 * std::sin(0.7 * static_cast<double>(w));
    }
    t.nb_theta = 10.0;
    Rng rng    = Rng(seed).split("initial");
    t.initial.resize(R, A);
    for (Eigen::Index r = 0; r < R; ++r) {
        for (Eigen::Index a = 0; a < A; ++a) {
            t.initial(r, a) = static_cast<double>(rng.poisson(std::exp(target_log)));
        }
    }
    return t;
}

CdrStudyResult run_cdr_study(const CdrStudyConfig& config)
{
    if (config.replicates == 0) {
        throw ConfigError("CDR study needs at least one replicate");
    }
    const Rng master(config.seed);
    CdrStudyResult result;
    result.replicates.resize(config.replicates);
    const auto weeks = synthetic_weeks(config.weeks);
    std::vector<std::pair<std::size_t, std::size_t>> counts(config.replicates);
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        const Rng rr       = master.split(rep);
        const auto pop     = synthetic_population(config.districts, config.ages, rr.split("pop").key());
        const auto truth   = default_infection_truth(pop, config.weeks, rr.split("truth").key());
        const auto panel   = simulate_infection_panel(truth, pop, weeks, rr.split("panel").key());
        CdrConfig cdr;
        cdr.mean_cdr      = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(config.weeks),
                                                      static_cast<Eigen::Index>(config.ages), config.mean_cdr);
        cdr.concentration = config.concentration;
        cdr.seed          = rr.split("thinning").key();
        cdr.elasticity    = config.elasticity;
        const auto report = cdr_invariance_report(panel, apply_cdr_thinning(panel, cdr), pop, truth.delta);
        auto& out                = result.replicates[rep];
        out.replicate            = rep;
        out.fraction_within      = report.fraction_within(3.0);
        out.max_abs_standardized = report.max_abs_standardized();
        out.any_outside          = out.max_abs_standardized > 3.0;
        counts[rep] = {static_cast<std::size_t>(std::lround(out.fraction_within * static_cast<double>(report.lags.size()))),
                       report.lags.size()};
    }
    std::size_t inside = 0, total = 0, outside_reps = 0;
    for (std::size_t rep = 0; rep < config.replicates; ++rep) {
        inside += counts[rep].first;
        total += counts[rep].second;
        outside_reps += result.replicates[rep].any_outside ? 1 : 0;
    }
    result.pooled_fraction_within = total > 0 ? static_cast<double>(inside) / static_cast<double>(total) : 1.0;
    result.fraction_with_outside  = static_cast<double>(outside_reps) / static_cast<double>(config.replicates);
    return result;
}

} // namespace epigam
