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
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "epigam/dataset.hpp"
#include "epigam/errors.hpp"
#include "epigam/synthetic.hpp"

using namespace epigam;
namespace fs = std::filesystem;

namespace
{

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("epigam_test_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir()
    {
        fs::remove_all(path);
    }
    std::string str() const
    {
        return path.string();
    }
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void replace_line(const fs::path& p, std::size_t line, const std::string& text)
{
    std::istringstream in(slurp(p));
    std::ostringstream out;
    std::string l;
    for (std::size_t i = 1; std::getline(in, l); ++i) {
        out << (i == line ? text : l) << '\n';
    }
    std::ofstream(p, std::ios::binary) << out.str();
}

void append_line(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary | std::ios::app) << text << '\n';
}

ValidationReport expect_invalid(const std::string& dir, Schema s)
{
    try {
        validate_and_load(dir, s);
    } catch (const ValidationError& e) {
        return e.report();
    }
    FAIL("expected ValidationError");
    return {};
}

const nlohmann::json small_infection = {{"districts", 6}, {"weeks", 5}};
const nlohmann::json small_nowcast   = {{"days", 70}, {"districts", 4}};
const nlohmann::json small_icu       = {{"districts", 8}, {"weeks", 6}};

} // namespace

TEST_CASE("generated bundles validate")
{
    TempDir dir("roundtrip");
    for (auto [schema, params] : {std::pair{Schema::infection, small_infection}, std::pair{Schema::nowcast, small_nowcast},
                                  std::pair{Schema::icu, small_icu}}) {
        CAPTURE(schema_name(schema));
        const auto sub = dir.path / schema_name(schema);
        const auto out = generate_synthetic(schema, params, 3, sub.string());
        CHECK(fs::path(out.files.back()).filename() == "truth.json");
        CHECK(out.truth.at("seed") == 3);
        const auto bundle = validate_and_load(sub.string(), schema);
        CHECK(bundle.paths.size() == schema_files(schema).size());
        if (schema == Schema::nowcast) {
            CHECK_NOTHROW(validate_and_load(sub.string(), Schema::hosp));
        }
    }
    CHECK_THROWS_AS(generate_synthetic(Schema::hosp, {}, 1, (dir.path / "hosp").string()), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(Schema::icu, {{"bogus", 1}}, 1, (dir.path / "bad").string()), ConfigError);
}

TEST_CASE("same seed gives identical files")
{
    TempDir a("seed_a");
    TempDir b("seed_b");
    for (auto [schema, params] : {std::pair{Schema::infection, small_infection}, std::pair{Schema::nowcast, small_nowcast},
                                  std::pair{Schema::icu, small_icu}}) {
        const auto fa = generate_synthetic(schema, params, 42, (a.path / schema_name(schema)).string());
        const auto fb = generate_synthetic(schema, params, 42, (b.path / schema_name(schema)).string());
        REQUIRE(fa.files.size() == fb.files.size());
        for (std::size_t i = 0; i < fa.files.size(); ++i) {
            CHECK(slurp(fa.files[i]) == slurp(fb.files[i]));
        }
    }
    const auto other = generate_synthetic(Schema::icu, small_icu, 43, (a.path / "other").string());
    CHECK(slurp(a.path / "icu" / files::icu_panel) != slurp(a.path / "other" / files::icu_panel));
}

TEST_CASE("validation reports row-level problems")
{
    TempDir dir("invalid");
    SUBCASE("negative count names the row")
    {
        generate_synthetic(Schema::infection, small_infection, 1, dir.str());
        replace_line(dir.path / files::infection_panel, 5, "2021-W01,D002,0-14,-3");
        const auto report = expect_invalid(dir.str(), Schema::infection);
        REQUIRE_FALSE(report.ok());
        bool found = false;
        for (const auto& i : report.issues) {
            found = found || (i.row == 5 && i.file == files::infection_panel);
        }
        CHECK(found);
        CHECK(report.summary().find(":5:") != std::string::npos);
    }
    SUBCASE("unknown district names the key")
    {
        generate_synthetic(Schema::infection, small_infection, 1, dir.str());
        replace_line(dir.path / files::infection_panel, 2, "2021-W01,D999,0-14,3");
        const auto report = expect_invalid(dir.str(), Schema::infection);
        CHECK(report.summary().find("D999") != std::string::npos);
    }
    SUBCASE("duplicate key")
    {
        generate_synthetic(Schema::icu, small_icu, 1, dir.str());
        append_line(dir.path / files::icu_panel, "2020-W40,D001,1,2,3");
        const auto report = expect_invalid(dir.str(), Schema::icu);
        CHECK(report.summary().find("duplicate") != std::string::npos);
    }
    SUBCASE("missing file")
    {
        generate_synthetic(Schema::icu, small_icu, 1, dir.str());
        fs::remove(dir.path / files::coords);
        const auto report = expect_invalid(dir.str(), Schema::icu);
        CHECK(report.issues.front().file == files::coords);
    }
    SUBCASE("report date before admission is counted, not fatal")
    {
        generate_synthetic(Schema::nowcast, small_nowcast, 1, dir.str());
        // loads, but the triangle rejects the record with a diagnostic count
        replace_line(dir.path / files::line_list, 2, "x1,2021-08-05,2021-08-05,2021-08-01,35-59,male,D001");
        const auto b   = validate_and_load(dir.str(), Schema::nowcast);
        const auto tri = build_triangle(impute_admission_dates(*b.line_list), parse_date("2021-10-09"), 40,
                                        AgeMap::default_map(), parse_date("2021-08-01"));
        CHECK(tri.rejected_negative == 1);
    }
    SUBCASE("report serializes to json")
    {
        ValidationReport r;
        r.add("a.csv", 3, "count", "negative");
        const auto j = r.to_json();
        CHECK(j.size() == 1);
        CHECK(j.at(0).at("row") == 3);
    }
}

TEST_CASE("ICU ingestion rounds half to even")
{
    TempDir dir("icu_round");
    generate_synthetic(Schema::icu, small_icu, 1, dir.str());
    replace_line(dir.path / files::icu_panel, 2, "2020-W40,D001,10.5,11.5,2");
    const auto bundle = validate_and_load(dir.str(), Schema::icu);
    CHECK(bundle.icu_panel->beds(0, 0) == 10.0);
    CHECK(bundle.icu_panel->beds(0, 1) == 12.0);
}

TEST_CASE("zero-lag infection bundle matches its analytic mean")
{
    TempDir dir("zero_lag");
    const nlohmann::json params = {{"districts", 200}, {"weeks", 6}, {"ages", 2},
                                   {"lag", {{0.0, 0.0}, {0.0, 0.0}}}, {"nb_theta", 50.0}};
    const auto out = generate_synthetic(Schema::infection, params, 8, dir.str());
    const auto b   = validate_and_load(dir.str(), Schema::infection);
    const auto& panel = *b.infection_panel;
    const auto& pop   = *b.population;
    const auto c      = out.truth.at("week_intercepts").get<std::vector<double>>();
    for (std::size_t w = 1; w < panel.num_weeks(); ++w) {
        double observed = 0.0;
        double expected = 0.0;
        for (std::size_t r = 0; r < panel.num_districts(); ++r) {
            for (std::size_t a = 0; a < panel.num_ages(); ++a) {
                observed += panel.at(w, r, a);
                expected += pop.pop(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) * std::exp(c[w]);
            }
        }
        CHECK(observed / expected == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("nowcast bundle reproduces the simulated triangle")
{
    TempDir dir("triangle");
    const auto out    = generate_synthetic(Schema::nowcast, small_nowcast, 5, dir.str());
    const auto bundle = validate_and_load(dir.str(), Schema::nowcast);
    const auto list   = impute_admission_dates(*bundle.line_list);
    const auto start  = parse_date(out.truth.at("start").get<std::string>());
    const auto as_of  = parse_date(out.truth.at("as_of").get<std::string>());
    const auto tri    = build_triangle(list, as_of, out.truth.at("d_max").get<int>(), AgeMap::default_map(), start);
    REQUIRE(tri.N.size() == out.triangle.size());
    for (std::size_t g = 0; g < tri.N.size(); ++g) {
        CHECK(tri.N[g] == out.triangle[g]);
    }
    CHECK(validate_and_load(dir.str(), Schema::hosp).hosp_panel->as_of == as_of);
}
