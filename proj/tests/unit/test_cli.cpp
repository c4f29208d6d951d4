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
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "epigam/cli.hpp"
#include "epigam/csv.hpp"

using namespace epigam;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("epigam_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(std::vector<std::string> args)
{
    args.insert(args.begin(), "-q");
    return cli_dispatch(args);
}

} // namespace

TEST_CASE("usage errors exit with 2")
{
    CHECK(run({"icu", "fit", "--bogus"}) == 2);
    CHECK(run({"simulate", "--scenario", "icu", "--out", "/tmp/x"}) == 2);
    CHECK(run({"simulate", "--scenario", "icu", "--seed", "-4", "--out", "/tmp/x"}) == 2);
    CHECK(run({"simulate", "--scenario", "mystery", "--seed", "1", "--out", "/tmp/x"}) == 2);
    CHECK(run({"--version"}) == 0);
}

TEST_CASE("validate and pipeline errors")
{
    const auto dir = scratch("validate");
    const auto params = dir.string() + ".json";
    std::ofstream(params) << R"({"districts": 6, "weeks": 10})";
    REQUIRE(run({"simulate", "--scenario", "icu", "--seed", "2", "--params", params, "--out", dir.string()}) == 0);
    CHECK(fs::exists(dir / "run_manifest.json"));
    CHECK(run({"validate", "--in", dir.string(), "--schema", "icu"}) == 0);
    CHECK(run({"validate", "--in", dir.string(), "--schema", "infection"}) == 1);

    const auto report = scratch("validate_report");
    CHECK(run({"validate", "--in", dir.string(), "--schema", "nowcast", "--out", report.string()}) == 1);
    CHECK(fs::exists(report / "validation.json"));

    // a pipeline failure: the panel is too short for the requested window
    CHECK(run({"icu", "forecast", "--in", dir.string(), "--out", scratch("short").string(), "--seed", "1",
               "--window", "9"}) == 1);
    fs::remove_all(dir);
    fs::remove_all(report);
    fs::remove(params);
}

TEST_CASE("icu forecast is reproducible")
{
    const auto dir    = scratch("icu_in");
    const auto params = dir.string() + ".json";
    std::ofstream(params) << R"({"districts": 12, "weeks": 8})";
    REQUIRE(run({"simulate", "--scenario", "icu", "--seed", "5", "--params", params, "--out", dir.string()}) == 0);
    const auto a = scratch("icu_a");
    const auto b = scratch("icu_b");
    for (const auto& out : {a, b}) {
        REQUIRE(run({"icu", "forecast", "--in", dir.string(), "--out", out.string(), "--seed", "9", "--window", "4",
                     "--n-perm", "99", "--spatial-rank", "6"}) == 0);
    }
    for (const char* f : {"forecast_scores.csv", "score_table.csv", "run_manifest.json"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto table = read_csv((a / "score_table.csv").string());
    CHECK(table.rows.size() == 5);
    for (const auto& p : {dir, a, b}) {
        fs::remove_all(p);
    }
    fs::remove(params);
}

TEST_CASE("nowcast fit end to end")
{
    const auto dir = scratch("nc_in");
    REQUIRE(run({"simulate", "--scenario", "nowcast", "--seed", "3", "--out", dir.string()}) == 0);
    const auto out = scratch("nc_out");
    REQUIRE(run({"nowcast", "fit", "--in", dir.string(), "--out", out.string(), "--seed", "4", "--as-of",
                 "2021-11-19", "--dmax", "40", "--bootstrap", "200"}) == 0);
    const auto table = read_csv((out / "nowcast.csv").string());
    const auto rep = table.column("reported");
    const auto est = table.column("nowcast");
    const auto lo  = table.column("ci_lo");
    const auto hi  = table.column("ci_hi");
    REQUIRE(table.rows.size() == 3 * 110);
    for (const auto& row : table.rows) {
        CHECK(std::stod(row[est]) >= std::stod(row[rep]));
        CHECK(std::stod(row[lo]) <= std::stod(row[est]));
        CHECK(std::stod(row[est]) <= std::stod(row[hi]));
    }
    CHECK(fs::exists(out / "delay_model.json"));

    const auto hosp = scratch("hosp_out");
    CHECK(run({"hosp", "fit", "--in", dir.string(), "--out", hosp.string(), "--nowcast-model",
               (out / "delay_model.json").string()}) == 0);
    CHECK(fs::exists(hosp / "time_smooth.csv"));
    // a delay model for another as-of date is rejected
    const auto early = scratch("nc_early");
    REQUIRE(run({"nowcast", "fit", "--in", dir.string(), "--out", early.string(), "--seed", "4", "--as-of",
                 "2021-11-10", "--bootstrap", "200"}) == 0);
    CHECK(run({"hosp", "fit", "--in", dir.string(), "--out", hosp.string(), "--nowcast-model",
               (early / "delay_model.json").string()}) == 1);
    for (const auto& p : {dir, out, hosp, early}) {
        fs::remove_all(p);
    }
}
