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

#include "doctest.h"

#include "epigam/errors.hpp"
#include "epigam/nowcast.hpp"
#include "epigam/rng.hpp"

using namespace epigam;

namespace
{

HospRecord record(Date admission, int delay, const std::string& age)
{
    HospRecord r;
    r.case_id         = "c";
    r.admission       = admission;
    r.registry_report = admission + std::chrono::days{delay};
    r.age_group       = age;
    r.gender          = "female";
    r.district        = "d";
    return r;
}

} // namespace

TEST_CASE("sequential hazards give a cdf and a pmf")
{
    Eigen::VectorXd p(4);
    p << 0.0, 1.0, 0.25, 0.5;
    const Eigen::VectorXd F = delay_cdf_from_hazards(p);
    CHECK(F(1) == doctest::Approx(0.375));
    CHECK(F(2) == doctest::Approx(0.5));
    CHECK(F(3) == 1.0);
    const Eigen::VectorXd pmf = delay_pmf_from_hazards(p);
    CHECK(pmf(1) == doctest::Approx(0.375));
    CHECK(pmf(2) == doctest::Approx(0.125));
    CHECK(pmf(3) == doctest::Approx(0.5));

    SUBCASE("zero hazards put all mass at the first day")
    {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(6);
        const Eigen::VectorXd Fz = delay_cdf_from_hazards(z);
        CHECK((Fz.tail(5).array() == 1.0).all());
    }
    SUBCASE("random hazards")
    {
        Rng rng(11);
        for (int rep = 0; rep < 200; ++rep) {
            const int d_max = 2 + static_cast<int>(rng.uniform() * 40.0);
            Eigen::VectorXd h(d_max + 1);
            for (int k = 0; k <= d_max; ++k) {
                h(k) = rng.uniform();
            }
            const Eigen::VectorXd f = delay_cdf_from_hazards(h);
            const Eigen::VectorXd q = delay_pmf_from_hazards(h);
            CHECK(std::abs(q.sum() - 1.0) < 1e-10);
            CHECK(f(d_max) == 1.0);
            for (int d = 1; d < d_max; ++d) {
                CHECK(f(d) <= f(d + 1));
            }
        }
    }
}

TEST_CASE("reporting triangle counts")
{
    const Date s = parse_date("2021-01-01");
    LineList list;
    list.records = {record(s, 1, "0-14"), record(s, 0, "15-34"), record(s, 3, "35-59"),
                    record(s + std::chrono::days{1}, 2, "0-59")};
    const auto tri = build_triangle(list, s + std::chrono::days{3}, 3, AgeMap::default_map(), s);
    CHECK(tri.T == 4);
    CHECK(tri.N[0](0, 0) == 2.0);
    CHECK(tri.N[0](0, 1) == 0.0);
    CHECK(tri.N[0](0, 2) == 1.0);
    CHECK(tri.cumulative(0, 1, 3) == 3.0);
    CHECK(tri.cumulative(0, 2, 2) == 1.0);
    CHECK(tri.reported(0, 2) == 1.0);
    CHECK(tri.N[1].sum() == 0.0);

    SUBCASE("empty list")
    {
        const auto e = build_triangle(LineList{}, s + std::chrono::days{9}, 5, AgeMap::default_map(), s);
        CHECK(e.N[0].sum() == 0.0);
        CHECK(e.T == 10);
    }
    SUBCASE("exclusions are counted")
    {
        LineList l;
        l.records = {record(s, 7, "80+"), record(s, -1, "80+"), record(s + std::chrono::days{2}, 2, "80+")};
        const auto t = build_triangle(l, s + std::chrono::days{3}, 3, AgeMap::default_map(), s);
        CHECK(t.excluded_beyond_dmax == 1);
        CHECK(t.rejected_negative == 1);
        CHECK(t.not_yet_observable == 1);
        CHECK(t.N[1].sum() == 0.0);
    }
    SUBCASE("unknown age label")
    {
        LineList l;
        l.records = {record(s, 1, "elderly")};
        CHECK_THROWS_AS(build_triangle(l, s + std::chrono::days{3}, 3, AgeMap::default_map(), s), ConfigError);
    }
}

TEST_CASE("admission dates are imputed from infection reports")
{
    const Date s = parse_date("2021-10-01");
    LineList list;
    list.records = {record(s, 2, "60-79"), record(s, 2, "60-79"), record(s, 2, "60-79")};
    list.records[1].admission.reset();
    list.records[1].infection_report = s;
    list.records[2].admission.reset();
    ImputationReport report;
    const auto out = impute_admission_dates(list, &report);
    CHECK(out.records.size() == 2);
    CHECK(report.imputed == 1);
    CHECK(report.dropped == 1);
    CHECK(*out.records[1].admission == s);

    ImputationReport none;
    const auto same = impute_admission_dates(LineList{{list.records[0]}}, &none);
    CHECK(same.records.size() == 1);
    CHECK(none.imputed == 0);
}

TEST_CASE("delay model on simulated line lists")
{
    DelaySimulationConfig config;
    config.start = parse_date("2021-08-01");
    config.days  = 90;
    const auto sim  = simulate_line_list(config, 5);
    const auto list = impute_admission_dates(sim.list);
    const auto tri  = build_triangle(list, config.start + std::chrono::days{config.days - 1}, config.d_max,
                                     AgeMap::default_map(), config.start);
    const auto fit  = fit_delay_model(tri);
    REQUIRE(fit.fit.converged);

    for (std::size_t g = 0; g < 2; ++g) {
        CHECK(delay_cdf(fit, tri.T, g, tri.d_max) == 1.0);
        for (int d = 1; d < tri.d_max; ++d) {
            CHECK(delay_cdf(fit, tri.T - 1, g, d) <= delay_cdf(fit, tri.T - 1, g, d + 1));
        }
        // the estimated cdf tracks the true one at short delays
        double true_F = 0.0;
        for (int d = 0; d < 7; ++d) {
            true_F += sim.pmf(d, static_cast<Eigen::Index>(g));
        }
        CHECK(std::abs(delay_cdf(fit, tri.T - 7, g, 7) - true_F) < 0.1);
    }

    auto res = nowcast_point(tri, fit);
    bootstrap_ci(res, tri, fit, 200, 3);
    CHECK(res.replicates == 200);
    for (const auto& c : res.cells) {
        CHECK(c.nowcast >= c.reported - 1e-9);
        CHECK(c.ci_lo <= c.nowcast + 1e-9);
        CHECK(c.nowcast <= c.ci_hi + 1e-9);
        if (c.t <= tri.T - tri.d_max) {
            CHECK(c.F_hat == 1.0);
            CHECK(c.nowcast == c.reported);
        }
    }
    for (int t = 1; t < tri.T; ++t) {
        CHECK(res.cell(2, t).nowcast == doctest::Approx(res.cell(0, t).nowcast + res.cell(1, t).nowcast));
    }

    SUBCASE("bootstrap is deterministic under the seed")
    {
        auto again = nowcast_point(tri, fit);
        bootstrap_ci(again, tri, fit, 200, 3);
        for (std::size_t i = 0; i < res.cells.size(); ++i) {
            CHECK(again.cells[i].ci_lo == res.cells[i].ci_lo);
            CHECK(again.cells[i].ci_hi == res.cells[i].ci_hi);
        }
    }
    SUBCASE("zero covariance collapses the parameter interval")
    {
        auto frozen = fit;
        frozen.fit.cov_model.setZero();
        auto r = nowcast_point(tri, frozen);
        bootstrap_ci(r, tri, frozen, 200, 3, BootstrapMode::parameter);
        for (const auto& c : r.cells) {
            CHECK(c.ci_lo == doctest::Approx(c.nowcast));
            CHECK(c.ci_hi == doctest::Approx(c.nowcast));
        }
    }
}

TEST_CASE("delay model needs informative cells")
{
    const Date s = parse_date("2021-01-01");
    const auto tri = build_triangle(LineList{}, s + std::chrono::days{20}, 5, AgeMap::default_map(), s);
    CHECK_THROWS_AS(fit_delay_model(tri), DataError);
}

TEST_CASE("type 7 quantiles")
{
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({5.0}, 0.975) == 5.0);
    CHECK(quantile({3.0, 1.0, 2.0}, 0.0) == 1.0);
}
