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
#include <filesystem>

#include "doctest.h"

#include "epigam/errors.hpp"
#include "epigam/hosp.hpp"

using namespace epigam;

namespace
{

HospSimulation small_simulation(std::uint64_t seed)
{
    HospSimulationConfig c;
    c.start     = parse_date("2021-10-01");
    c.days      = 45;
    c.districts = 20;
    c.intercept = -8.0;
    return simulate_hosp(c, seed);
}

} // namespace

TEST_CASE("delay cdf table lookups")
{
    DelayCdfTable t;
    t.as_of = parse_date("2021-11-01");
    t.d_max = 3;
    t.F["60+"][parse_date("2021-10-31")] = 0.4;
    t.F["60+"][parse_date("2021-10-30")] = 0.8;
    CHECK(t.at("60+", parse_date("2021-10-31")) == 0.4);
    CHECK(t.at("60+", parse_date("2021-10-30")) == 0.8);
    CHECK(t.at("60+", parse_date("2021-10-29")) == 1.0);
    CHECK(t.at("60+", parse_date("2021-01-01")) == 1.0);
    CHECK_THROWS_AS(t.at("60+", parse_date("2021-11-01")), DataError);
    CHECK_THROWS_AS(t.at("0-59", parse_date("2021-10-31")), ConfigError);

    const auto j    = nlohmann::json::parse(R"({"as_of": "2021-11-01", "d_max": 3,
        "cdf": {"60+": [{"date": "2021-10-31", "F": 0.4}]}})");
    const auto back = DelayCdfTable::from_json(j);
    CHECK(back.at("60+", parse_date("2021-10-31")) == 0.4);
    CHECK_THROWS_AS(DelayCdfTable::from_json(nlohmann::json::parse(R"({"as_of": 3})")), DataError);
}

TEST_CASE("hospitalisation design checks its inputs")
{
    const auto sim = small_simulation(1);
    const auto data = build_hosp_design(sim.panel, sim.population, sim.coords, sim.cdf);
    const std::size_t cells = 44 * 20 * 5 * 2;
    CHECK(static_cast<std::size_t>(data.response.size()) == cells);
    CHECK(data.spatial);
    CHECK(data.age_levels.front() == "15-34");
    CHECK(data.gender_levels.front() == "male");

    SUBCASE("missing coordinates name the district")
    {
        auto coords = sim.coords;
        const auto name = coords.begin()->first;
        coords.erase(coords.begin());
        try {
            build_hosp_design(sim.panel, sim.population, coords, sim.cdf);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(name) != std::string::npos);
        }
    }
    SUBCASE("duplicate cells")
    {
        auto panel = sim.panel;
        panel.cells.push_back(panel.cells.front());
        CHECK_THROWS_AS(build_hosp_design(panel, sim.population, sim.coords, sim.cdf), DataError);
    }
    SUBCASE("negative counts")
    {
        auto panel = sim.panel;
        panel.cells.front().reported = -1.0;
        CHECK_THROWS_AS(build_hosp_design(panel, sim.population, sim.coords, sim.cdf), DataError);
    }
    SUBCASE("missing population")
    {
        auto pop = sim.population;
        pop.erase(pop.begin());
        CHECK_THROWS_AS(build_hosp_design(sim.panel, pop, sim.coords, sim.cdf), DataError);
    }
    SUBCASE("offset without delay correction is log population")
    {
        HospConfig c;
        c.delay_offset = false;
        const auto plain = build_hosp_design(sim.panel, sim.population, sim.coords, sim.cdf, c);
        const Eigen::VectorXd diff = data.design.offset() - plain.design.offset();
        CHECK(diff.maxCoeff() <= 1e-12);
        CHECK(diff.minCoeff() < -0.1);
    }
}

TEST_CASE("hospitalisation fit recovers age and weekday effects")
{
    const auto sim  = small_simulation(2);
    const auto data = build_hosp_design(sim.panel, sim.population, sim.coords, sim.cdf);
    const auto fit  = fit_hosp_model(data);
    REQUIRE(fit.converged);
    REQUIRE(fit.nb_theta.has_value());
    CHECK(fit.coefficient("age[80+]") == doctest::Approx(2.5).epsilon(0.04));
    CHECK(fit.coefficient("age[0-14]") == doctest::Approx(-1.5).epsilon(0.1));
    CHECK(fit.coefficient("gender[female]") == doctest::Approx(-0.2).epsilon(0.5));

    const auto ts = time_smooth(fit, data);
    CHECK(ts.size() == 44);
    CHECK(std::abs(ts.mean()) < 1e-8);
    double se = 0.0;
    for (Eigen::Index i = 0; i < ts.size(); ++i) {
        se += std::pow(ts(i) - sim.time_trend(i), 2);
    }
    CHECK(std::sqrt(se / static_cast<double>(ts.size())) < 0.1);

    const auto dir = std::filesystem::temp_directory_path() / "epigam_hosp_grids";
    std::filesystem::create_directories(dir);
    emit_effect_grids(fit, data, sim.coords, dir.string());
    for (const char* f : {"age_gender_effects.csv", "weekday_effects.csv", "time_smooth.csv", "spatial_surface.csv",
                          "district_random_effects.csv"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("spatial term is dropped for very few districts")
{
    HospSimulationConfig c;
    c.start     = parse_date("2021-10-01");
    c.days      = 30;
    c.districts = 3;
    c.intercept = -7.0;
    const auto sim  = simulate_hosp(c, 4);
    const auto data = build_hosp_design(sim.panel, sim.population, sim.coords, sim.cdf);
    CHECK_FALSE(data.spatial);
}

TEST_CASE("hospitalisation simulation is seed deterministic")
{
    const auto a = small_simulation(9);
    const auto b = small_simulation(9);
    REQUIRE(a.panel.cells.size() == b.panel.cells.size());
    for (std::size_t i = 0; i < a.panel.cells.size(); ++i) {
        CHECK(a.panel.cells[i].reported == b.panel.cells[i].reported);
    }
    CHECK(a.final_counts == b.final_counts);
}
