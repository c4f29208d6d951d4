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
#include <cmath>
#include <limits>

#include "doctest.h"

#include "epigam/errors.hpp"
#include "epigam/infection.hpp"

using namespace epigam;

namespace
{

WeeklyPanel constant_panel(std::size_t W, std::size_t R, std::size_t A, double value)
{
    std::vector<std::string> a;
    for (std::size_t k = 0; k < A; ++k) {
        a.push_back("a" + std::to_string(k));
    }
    std::vector<std::string> r;
    for (std::size_t k = 0; k < R; ++k) {
        r.push_back("r" + std::to_string(k));
    }
    WeeklyPanel p(synthetic_weeks(W), r, a);
    std::fill(p.counts.begin(), p.counts.end(), value);
    return p;
}

InfectionTruth zero_lag_truth(const PopulationTable& pop, std::size_t W, double c, double theta)
{
    InfectionTruth t;
    const auto A      = static_cast<Eigen::Index>(pop.age_groups.size());
    t.lag             = Eigen::MatrixXd::Zero(A, A);
    t.week_intercepts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(W), c);
    t.nb_theta        = theta;
    t.initial         = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(pop.districts.size()), A, 10.0);
    return t;
}

} // namespace

TEST_CASE("infection design layout")
{
    const auto pop = synthetic_population(4, 3, 1);
    auto panel     = constant_panel(3, 4, 3, 0.0);
    panel.districts = pop.districts;
    panel.age_groups = pop.age_groups;
    const auto data = build_infection_design(panel, pop, 0, 1.0);
    CHECK(data.design.rows() == 8);
    CHECK(data.design.cols() == 2 + 3);
    for (const auto& name : data.lag_columns) {
        const auto j = data.design.find_column(name);
        REQUIRE(j.has_value());
        CHECK(data.design.X().col(*j).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(data.design.offset()(0) == doctest::Approx(std::log(pop.pop(0, 0))));

    const auto pop6  = synthetic_population(2, 6, 1);
    auto panel6      = constant_panel(4, 2, 6, 3.0);
    panel6.districts = pop6.districts;
    panel6.age_groups = pop6.age_groups;
    CHECK(build_infection_design(panel6, pop6, 2).lag_columns.size() == 6);
    CHECK(pop6.age_groups.front() == "0-4");

    CHECK_THROWS(build_infection_design(constant_panel(1, 4, 3, 0.0), pop, 0));
    CHECK_THROWS_AS(build_infection_design(panel, pop, 0, 0.0), ConfigError);
}

TEST_CASE("zero-count panel leaves the lag coefficients unidentified")
{
    const auto pop   = synthetic_population(5, 2, 1);
    auto panel       = constant_panel(4, 5, 2, 0.0);
    panel.districts  = pop.districts;
    panel.age_groups = pop.age_groups;
    CHECK_THROWS_AS(fit_infection_model(panel, pop), RankDeficientError);
}

TEST_CASE("simulation: analytic means, Poisson limit and determinism")
{
    const auto pop       = synthetic_population(300, 1, 2);
    const auto weeks     = synthetic_weeks(6);
    const double c       = -8.0;
    const auto truth     = zero_lag_truth(pop, 6, c, 5.0);
    const auto panel     = simulate_infection_panel(truth, pop, weeks, 9);
    // standardized mean of (Y - mu) / sd over weeks 2..W
    double z = 0.0, n = 0.0;
    for (std::size_t w = 1; w < 6; ++w) {
        for (std::size_t r = 0; r < 300; ++r) {
            const double mu = pop.pop(static_cast<Eigen::Index>(r), 0) * std::exp(c);
            z += (panel.at(w, r, 0) - mu) / std::sqrt(mu + mu * mu / 5.0);
            n += 1.0;
        }
    }
    CHECK(std::abs(z / std::sqrt(n)) < 3.0);

    const auto poisson = simulate_infection_panel(zero_lag_truth(pop, 6, c, std::numeric_limits<double>::infinity()),
                                                  pop, weeks, 10);
    double ratio = 0.0;
    for (std::size_t w = 1; w < 6; ++w) {
        for (std::size_t r = 0; r < 300; ++r) {
            const double mu = pop.pop(static_cast<Eigen::Index>(r), 0) * std::exp(c);
            ratio += (poisson.at(w, r, 0) - mu) * (poisson.at(w, r, 0) - mu) / mu;
        }
    }
    CHECK(ratio / 1500.0 == doctest::Approx(1.0).epsilon(0.12));

    CHECK(simulate_infection_panel(truth, pop, weeks, 9).counts == panel.counts);

    auto boom = truth;
    boom.lag  = Eigen::MatrixXd::Constant(1, 1, 3.0);
    boom.week_intercepts = Eigen::VectorXd::Zero(10);
    CHECK_THROWS_AS(simulate_infection_panel(boom, pop, synthetic_weeks(10), 1), NumericError);
}

TEST_CASE("single age group matches a hand-built NB regression")
{
    // one district would be saturated by the week intercepts, so use 30
    const auto pop   = synthetic_population(30, 1, 3);
    const auto weeks = synthetic_weeks(8);
    InfectionTruth t;
    t.lag             = Eigen::MatrixXd::Constant(1, 1, 0.5);
    t.week_intercepts = Eigen::VectorXd::Constant(8, 0.5 * 4.0 - pop.pop.array().log().mean());
    t.initial         = Eigen::MatrixXd::Constant(30, 1, 50.0);
    const auto panel  = simulate_infection_panel(t, pop, weeks, 4);

    std::vector<std::string> week, district;
    std::vector<double> lag, off, y;
    for (std::size_t r = 0; r < 30; ++r) {
        for (std::size_t w = 1; w < 8; ++w) {
            week.push_back(weeks[w]);
            district.push_back(pop.districts[r]);
            lag.push_back(std::log(panel.at(w - 1, r, 0) + 1.0));
            off.push_back(std::log(pop.pop(static_cast<Eigen::Index>(r), 0)));
            y.push_back(panel.at(w, r, 0));
        }
    }
    Frame f;
    f.add("week", week).add("lag", lag).add("off", off);
    DesignSpec spec;
    spec.intercept = false;
    spec.offset    = "off";
    spec.terms.push_back(FactorTerm{"week", {weeks.begin() + 1, weeks.end()}, false});
    spec.terms.push_back(LinearTerm{"lag"});
    const auto design = Design::build(spec, f);
    const Eigen::VectorXd response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    const auto direct = fit_negative_binomial(design, response, LambdaSpec::selected(), {});

    const auto fits = fit_infection_model(panel, pop);
    REQUIRE(fits.size() == 1);
    const auto& fit = fits[0].fit;
    CHECK(fit.coefficient(lag_column(pop.age_groups[0])) == doctest::Approx(direct.coefficient("lag")).epsilon(1e-8));
    CHECK(fit.coefficient(lag_column(pop.age_groups[0])) == doctest::Approx(0.5).epsilon(0.2));
    CHECK((fit.mu - fit.eta.array().exp().matrix()).cwiseAbs().maxCoeff() < 1e-10 * fit.mu.maxCoeff());
}

TEST_CASE("CDR thinning")
{
    const auto pop   = synthetic_population(100, 3, 5);
    const auto weeks = synthetic_weeks(8);
    const auto truth = default_infection_truth(pop, 8, 6);
    auto panel       = simulate_infection_panel(truth, pop, weeks, 7);
    panel.at(3, 4, 1) = 0.0;

    CdrConfig one;
    one.mean_cdr      = Eigen::MatrixXd::Ones(8, 3);
    one.concentration = std::numeric_limits<double>::infinity();
    CHECK(apply_cdr_thinning(panel, one).counts == panel.counts);

    CdrConfig half;
    half.mean_cdr      = Eigen::MatrixXd::Constant(8, 3, 0.5);
    half.concentration = 50.0;
    half.seed          = 11;
    const auto thin    = apply_cdr_thinning(panel, half);
    double a = 0, b = 0;
    for (std::size_t i = 0; i < panel.counts.size(); ++i) {
        a += thin.counts[i];
        b += panel.counts[i];
    }
    CHECK(a / b >= 0.48);
    CHECK(a / b <= 0.52);
    CHECK(thin.at(3, 4, 1) == 0.0);
    CHECK(apply_cdr_thinning(panel, half).counts == thin.counts);

    CdrConfig bad = half;
    bad.mean_cdr(0, 0) = 0.0;
    CHECK_THROWS_AS(apply_cdr_thinning(panel, bad), ConfigError);
}

TEST_CASE("invariance report")
{
    const auto pop   = synthetic_population(120, 3, 8);
    const auto weeks = synthetic_weeks(10);
    const auto truth = default_infection_truth(pop, 10, 9);
    const auto panel = simulate_infection_panel(truth, pop, weeks, 10);

    SUBCASE("identity thinning")
    {
        CdrConfig one;
        one.mean_cdr      = Eigen::MatrixXd::Ones(10, 3);
        one.concentration = std::numeric_limits<double>::infinity();
        const auto rep    = cdr_invariance_report(panel, apply_cdr_thinning(panel, one), pop);
        CHECK(rep.lags.size() == 9);
        for (const auto& row : rep.lags) {
            CHECK(std::abs(row.difference) < 1e-8);
        }
    }
    SUBCASE("constant mean CDR shifts week intercepts, keeps lags")
    {
        CdrConfig c;
        c.mean_cdr      = Eigen::MatrixXd::Constant(10, 3, 0.4);
        c.concentration = 200.0;
        c.seed          = 3;
        const auto rep  = cdr_invariance_report(panel, apply_cdr_thinning(panel, c), pop);
        CHECK(rep.fraction_within(3.0) >= 0.75);
        double shift = 0.0;
        for (const auto& w : rep.week_shifts) {
            shift += w.shift;
        }
        shift /= static_cast<double>(rep.week_shifts.size());
        // log(0.4) * (1 - sum of lags) is about -0.37 with row sums 0.6
        CHECK(shift < -0.2);
        CHECK(shift > -0.6);
    }
}
