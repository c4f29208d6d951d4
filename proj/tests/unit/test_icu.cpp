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
#include "epigam/icu.hpp"

using namespace epigam;

namespace
{

IcuPanel tiny_panel()
{
    IcuPanel p;
    p.weeks      = {"2020-W50", "2020-W51", "2020-W52"};
    p.districts  = {"A", "B"};
    p.age_groups = {"60-79"};
    p.beds.resize(6, 3);
    p.beds << 10, 5, 5,
              20, 20, 0,
              6, 2, 2,
              5, 10, 5,
              7, 7, 7,
              1, 2, 3;
    p.incidence.resize(6, 1);
    p.incidence << 10, 30, 20, 50, 40, 5;
    p.coords = {{"A", {11.0, 48.0}}, {"B", {12.0, 49.0}}};
    return p;
}

IcuSimulation small_simulation(std::uint64_t seed)
{
    IcuSimulationConfig c;
    c.districts = 30;
    c.weeks     = 14;
    return simulate_icu(c, seed);
}

} // namespace

TEST_CASE("normalization")
{
    NormalizationStats s;
    const auto z = normalize({1.0, 2.0, 3.0}, &s);
    CHECK(z[0] == doctest::Approx(-1.224745).epsilon(1e-6));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.224745).epsilon(1e-6));
    CHECK(s.mean == 2.0);
    CHECK(s.apply(3.0) == doctest::Approx(z[2]));
    CHECK_THROWS_AS(normalize({4.0, 4.0, 4.0}), NumericError);
    CHECK_THROWS_AS(normalize({4.0}), NumericError);
}

TEST_CASE("half to even rounding")
{
    CHECK(round_half_even(2.5) == 2.0);
    CHECK(round_half_even(3.5) == 4.0);
    CHECK(round_half_even(2.4) == 2.0);
    CHECK(round_half_even(0.5) == 0.0);
}

TEST_CASE("ICU design rows and covariates")
{
    const auto panel = tiny_panel();
    panel.validate();
    const auto data = build_icu_design(panel, 1, 2, IcuConfig{});
    CHECK(data.counts.rows() == 4);
    CHECK(data.counts.row(0) == panel.beds.row(2));
    CHECK(data.weeks == std::vector<std::size_t>{1, 1, 2, 2});
    CHECK(data.groups == std::vector<std::string>{"A", "B", "A", "B"});
    // lagged shares: (10,5,5) -> free 0.5, covid 0.25
    CHECK(data.stats.at("ar_free").mean == doctest::Approx((0.5 + 0.5 + 0.6 + 0.25) / 4.0));
    CHECK(data.stats.at("ar_covid").mean == doctest::Approx((0.25 + 0.5 + 0.2 + 0.5) / 4.0));
    const auto& x = data.frame.numeric("ar_free");
    CHECK(data.stats.at("ar_free").sd * x[0] + data.stats.at("ar_free").mean == doctest::Approx(0.5));
    const auto& inc = data.frame.numeric(incidence_column("60-79"));
    const auto& s   = data.stats.at(incidence_column("60-79"));
    CHECK(s.sd * inc[1] + s.mean == doctest::Approx(std::log(31.0)));
    CHECK_FALSE(data.spatial);
    CHECK_THROWS_AS(build_icu_design(panel, 0, 1, IcuConfig{}), ConfigError);
    CHECK_THROWS_AS(build_icu_design(panel, 1, 3, IcuConfig{}), ConfigError);
}

TEST_CASE("ICU panel validation")
{
    SUBCASE("week gap")
    {
        auto p  = tiny_panel();
        p.weeks = {"2020-W50", "2020-W52", "2020-W53"};
        try {
            p.validate();
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("2020-W51") != std::string::npos);
        }
    }
    SUBCASE("fractional counts")
    {
        auto p       = tiny_panel();
        p.beds(1, 1) = 2.5;
        CHECK_THROWS_AS(p.validate(), DataError);
    }
    SUBCASE("missing coordinates")
    {
        auto p = tiny_panel();
        p.coords.erase("B");
        CHECK_THROWS_AS(p.validate(), DataError);
    }
}

TEST_CASE("sign-flip permutation test")
{
    const std::vector<double> zero(3, 1.0);
    const auto deg = permutation_test(zero, zero, 9999, 1);
    CHECK(deg.degenerate);
    CHECK(deg.p_value == 1.0);

    const std::vector<double> full(5, 1.0);
    const std::vector<double> alt(5, 2.0);
    const auto ex = permutation_test(full, alt, 9999, 1);
    CHECK(ex.exhaustive);
    CHECK(ex.permutations == 32);
    CHECK(ex.p_value == doctest::Approx(0.0625));
    CHECK(ex.statistic == doctest::Approx(1.0));

    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < 20; ++i) {
        a[i] = static_cast<double>(i);
        b[i] = a[i] + (i % 3 == 0 ? -0.5 : 1.0);
    }
    const auto mc  = permutation_test(a, b, 999, 5);
    const auto mc2 = permutation_test(a, b, 999, 5);
    CHECK_FALSE(mc.exhaustive);
    CHECK(mc.permutations == 1000);
    CHECK(mc.p_value == mc2.p_value);
    CHECK(mc.p_value >= 1.0 / 1000.0);
    CHECK(mc.p_value < 0.05);
    CHECK_THROWS_AS(permutation_test({1.0}, {2.0}, 9, 1), ConfigError);
}

TEST_CASE("ICU model fits and nested scores")
{
    const auto sim = small_simulation(3);
    IcuConfig config;
    config.spatial_rank = 10;
    const auto full = build_icu_design(sim.panel, 1, 8, config);
    const auto fit  = fit_icu_model(full);
    REQUIRE(fit.converged);
    CHECK(fit.categories[static_cast<std::size_t>(fit.reference)] == "covid");
    CHECK((fit.probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);

    const auto tiny = LambdaSpec::fixed_all(1e-6);
    double last = std::numeric_limits<double>::infinity();
    for (auto v : {IcuVariant::intercept_only, IcuVariant::linear, IcuVariant::full}) {
        const auto d = build_icu_design(sim.panel, 1, 8, config, v);
        const auto f = fit_icu_model(d, tiny);
        const double score = log_score(f.probs, d.counts).total();
        CHECK(score <= last + 1e-6);
        last = score;
    }
}

TEST_CASE("rolling forecasts")
{
    const auto sim = small_simulation(4);
    IcuConfig config;
    config.spatial_rank = 10;
    config.window       = 4;
    const std::vector<IcuVariant> variants = {IcuVariant::full, IcuVariant::intercept_only};
    const auto recs = rolling_forecast(sim.panel, config, variants);
    CHECK(recs.size() == 2 * (14 - 5));
    for (const auto& r : recs) {
        REQUIRE(r.score.has_value());
        CHECK(std::isfinite(*r.score));
        CHECK((r.probs.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
    }
    CHECK(recs.front().week == 5);
    const auto again = rolling_forecast(sim.panel, config, variants);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(*again[i].score == *recs[i].score);
    }
    const auto rows = score_table(recs, 99, 2);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].test.has_value());
    REQUIRE(rows[1].test.has_value());
    CHECK(rows[1].weeks == 9);
    CHECK(rows[0].average_score < rows[1].average_score);

    config.window = 14;
    CHECK_THROWS_AS(rolling_forecast(sim.panel, config, variants), ConfigError);
}
