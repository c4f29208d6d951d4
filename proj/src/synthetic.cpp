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
#include "epigam/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "epigam/dates.hpp"
#include "epigam/errors.hpp"
#include "epigam/rng.hpp"

namespace epigam
{

namespace
{

void check_keys(const nlohmann::json& params, const std::set<std::string>& allowed, Schema scenario)
{
    if (params.is_null()) {
        return;
    }
    if (!params.is_object()) {
        throw ConfigError("synthetic parameters must be a JSON object");
    }
    for (const auto& [key, value] : params.items()) {
        if (allowed.count(key) == 0) {
            throw ConfigError(fmt::format("unknown parameter '{}' for the {} scenario", key, schema_name(scenario)));
        }
    }
}

template <class T>
T get(const nlohmann::json& params, const char* key, T fallback)
{
    if (params.is_null() || !params.contains(key)) {
        return fallback;
    }
    try {
        return params.at(key).get<T>();
    }
    catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("parameter '{}': {}", key, e.what()));
    }
}

Eigen::MatrixXd matrix_param(const nlohmann::json& params, const char* key, Eigen::Index rows, Eigen::Index cols)
{
    const auto v = get<std::vector<std::vector<double>>>(params, key, {});
    if (static_cast<Eigen::Index>(v.size()) != rows) {
        throw ConfigError(fmt::format("parameter '{}' must be a {} x {} matrix", key, rows, cols));
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(v[static_cast<std::size_t>(i)].size()) != cols) {
            throw ConfigError(fmt::format("parameter '{}' must be a {} x {} matrix", key, rows, cols));
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return m;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& m)
{
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out[static_cast<std::size_t>(i)].push_back(m(i, j));
        }
    }
    return out;
}

std::string in_dir(const std::string& dir, const char* name)
{
    return (std::filesystem::path(dir) / name).string();
}

void infection_scenario(const nlohmann::json& params, std::uint64_t seed, const std::string& dir, SyntheticOutput& out)
{
    check_keys(params, {"districts", "weeks", "ages", "lag", "nb_theta"}, Schema::infection);
    const auto R = get<std::size_t>(params, "districts", 50);
    const auto W = get<std::size_t>(params, "weeks", 20);
    const auto A = get<std::size_t>(params, "ages", 3);
    const Rng master(seed);
    const auto pop   = synthetic_population(R, A, master.split("population").key());
    const auto weeks = synthetic_weeks(W);
    auto truth       = default_infection_truth(pop, W, master.split("truth").key());
    if (!params.is_null() && params.contains("lag")) {
        truth.lag = matrix_param(params, "lag", static_cast<Eigen::Index>(A), static_cast<Eigen::Index>(A));
        const double row_sum     = truth.lag.rowwise().sum().maxCoeff();
        const double mean_logpop = pop.pop.array().log().mean();
        for (Eigen::Index w = 0; w < truth.week_intercepts.size(); ++w) {
            truth.week_intercepts(w) =
                (1.0 - row_sum) * 4.5 - mean_logpop + 0.1 * std::sin(0.7 * static_cast<double>(w));
        }
    }
    truth.nb_theta   = get<double>(params, "nb_theta", truth.nb_theta);
    const auto panel = simulate_infection_panel(truth, pop, weeks, master.split("panel").key());
    out.files        = {in_dir(dir, files::infection_panel), in_dir(dir, files::population)};
    write_infection_panel(panel, out.files[0]);
    write_population(pop, out.files[1]);
    std::vector<double> intercepts(truth.week_intercepts.data(),
                                   truth.week_intercepts.data() + truth.week_intercepts.size());
    out.truth = {{"weeks", weeks},
                 {"districts", pop.districts},
                 {"age_groups", pop.age_groups},
                 {"lag", rows_of(truth.lag)},
                 {"week_intercepts", intercepts},
                 {"nb_theta", truth.nb_theta},
                 {"delta", truth.delta},
                 {"model", "Y[w,r,a] ~ NB(pop[r,a] * exp(week_intercepts[w] + sum_k lag[a,k] * log(Y[w-1,r,k] + delta)), nb_theta)"}};
}

void nowcast_scenario(const nlohmann::json& params, std::uint64_t seed, const std::string& dir, SyntheticOutput& out)
{
    check_keys(params, {"start", "days", "districts", "d_max", "intercept", "nb_theta", "missing_admission"},
               Schema::nowcast);
    HospSimulationConfig config;
    config.start     = parse_date(get<std::string>(params, "start", "2021-08-01"));
    config.days      = get<int>(params, "days", 111);
    config.districts = get<int>(params, "districts", 12);
    config.d_max     = get<int>(params, "d_max", 40);
    config.intercept = get<double>(params, "intercept", -9.5);
    config.nb_theta  = get<double>(params, "nb_theta", config.nb_theta);
    const double missing = get<double>(params, "missing_admission", 0.1);
    if (!(missing >= 0.0 && missing < 1.0)) {
        throw ConfigError("missing_admission must lie in [0, 1)");
    }
    const Rng master(seed);
    auto sim          = simulate_hosp(config, master.split("hospitalisations").key(), true);
    const AgeMap ages = AgeMap::default_map();

    out.triangle.assign(ages.coarse.size(), Eigen::MatrixXd::Zero(config.days, config.d_max));
    Rng blank = master.split("missing");
    for (auto& r : sim.line_list.records) {
        const auto g = static_cast<std::size_t>(
            std::find(ages.coarse.begin(), ages.coarse.end(), ages(r.age_group)) - ages.coarse.begin());
        const long t = days_between(config.start, *r.admission) + 1;
        const long d = days_between(*r.admission, r.registry_report);
        out.triangle[g](t - 1, d - 1) += 1.0;
        if (blank.uniform() < missing) {
            r.admission.reset();
        }
    }

    out.files = {in_dir(dir, files::line_list), in_dir(dir, files::hosp_panel), in_dir(dir, files::cell_population),
                 in_dir(dir, files::coords)};
    write_line_list(sim.line_list, out.files[0]);
    write_hosp_panel(sim.panel, out.files[1]);
    write_cell_population(sim.population, out.files[2]);
    write_coords(sim.coords, out.files[3]);

    nlohmann::json pmf, finals, cdf;
    for (std::size_t g = 0; g < ages.coarse.size(); ++g) {
        const auto& p           = sim.delay_pmf.at(ages.coarse[g]);
        pmf[ages.coarse[g]]     = std::vector<double>(p.data(), p.data() + p.size());
        auto rows               = nlohmann::json::array();
        for (Eigen::Index t = 0; t < sim.final_counts.rows(); ++t) {
            rows.push_back({{"date", format_date(config.start + std::chrono::days{t})},
                            {"H", sim.final_counts(t, static_cast<Eigen::Index>(g))}});
        }
        finals[ages.coarse[g]] = rows;
        auto cr                = nlohmann::json::array();
        for (const auto& [date, F] : sim.cdf.F.at(ages.coarse[g])) {
            cr.push_back({{"date", format_date(date)}, {"F", F}});
        }
        cdf[ages.coarse[g]] = cr;
    }
    std::vector<double> trend(sim.time_trend.data(), sim.time_trend.data() + sim.time_trend.size());
    out.truth = {{"start", format_date(config.start)},
                 {"as_of", format_date(sim.panel.as_of)},
                 {"d_max", config.d_max},
                 {"intercept", config.intercept},
                 {"nb_theta", config.nb_theta},
                 {"missing_admission", missing},
                 {"delay_pmf", pmf},
                 {"final_counts", finals},
                 {"cdf", cdf},
                 {"time_trend", trend},
                 {"age_gender_effects", sim.age_gender_effects},
                 {"weekday_effects", sim.weekday_effects}};
}

void icu_scenario(const nlohmann::json& params, std::uint64_t seed, const std::string& dir, SyntheticOutput& out)
{
    check_keys(params, {"districts", "weeks", "first_week", "intercept", "ar", "incidence", "spatial_amplitude",
                        "random_sd", "beds_lo", "beds_hi"},
               Schema::icu);
    IcuSimulationConfig config;
    config.districts  = get<std::size_t>(params, "districts", 100);
    config.weeks      = get<std::size_t>(params, "weeks", 40);
    config.first_week = get<std::string>(params, "first_week", config.first_week);
    config.beds_lo    = get<double>(params, "beds_lo", config.beds_lo);
    config.beds_hi    = get<double>(params, "beds_hi", config.beds_hi);
    auto& t           = config.truth;
    if (!params.is_null() && params.contains("intercept")) {
        t.intercept = matrix_param(params, "intercept", 1, 2).row(0).transpose();
    }
    if (!params.is_null() && params.contains("ar")) {
        t.ar = matrix_param(params, "ar", 2, 2);
    }
    if (!params.is_null() && params.contains("incidence")) {
        t.incidence = matrix_param(params, "incidence", 2, static_cast<Eigen::Index>(config.age_groups.size()));
    }
    t.spatial_amplitude = get<double>(params, "spatial_amplitude", t.spatial_amplitude);
    t.random_sd         = get<double>(params, "random_sd", t.random_sd);
    const auto sim      = simulate_icu(config, seed);
    out.files = {in_dir(dir, files::icu_panel), in_dir(dir, files::incidence), in_dir(dir, files::coords)};
    write_icu_panel(sim.panel, out.files[0]);
    write_incidence(sim.panel, out.files[1]);
    write_coords(sim.panel.coords, out.files[2]);
    nlohmann::json districts = nlohmann::json::array();
    for (std::size_t r = 0; r < sim.panel.num_districts(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        districts.push_back({{"district", sim.panel.districts[r]},
                             {"spatial", {sim.spatial(i, 0), sim.spatial(i, 1)}},
                             {"random", {sim.random(i, 0), sim.random(i, 1)}}});
    }
    out.truth = {{"categories", icu_categories()},
                 {"reference", "covid"},
                 {"logits", {"free_vs_covid", "noncovid_vs_covid"}},
                 {"age_groups", config.age_groups},
                 {"intercept", {t.intercept(0), t.intercept(1)}},
                 {"ar", rows_of(t.ar)},
                 {"incidence", rows_of(t.incidence)},
                 {"spatial_amplitude", t.spatial_amplitude},
                 {"random_sd", t.random_sd},
                 {"delta", config.delta},
                 {"covariate_scale", "raw: previous-week shares (free, covid) and log(incidence_per_100k + delta)"},
                 {"districts", districts}};
}

} // namespace

SyntheticOutput generate_synthetic(Schema scenario, const nlohmann::json& params, std::uint64_t seed,
                                   const std::string& dir)
{
    std::filesystem::create_directories(dir);
    SyntheticOutput out;
    switch (scenario) {
    case Schema::infection:
        infection_scenario(params, seed, dir, out);
        break;
    case Schema::nowcast:
        nowcast_scenario(params, seed, dir, out);
        break;
    case Schema::icu:
        icu_scenario(params, seed, dir, out);
        break;
    case Schema::hosp:
        throw ConfigError("no hosp scenario: the nowcast scenario writes the hospitalisation panel");
    }
    out.truth["scenario"] = schema_name(scenario);
    out.truth["seed"]     = seed;
    out.truth["rng"]      = "epigam-rng/1";
    const auto path       = in_dir(dir, "truth.json");
    std::ofstream f(path, std::ios::binary);
    f << out.truth.dump(2) << '\n';
    if (!f) {
        throw DataError(fmt::format("cannot write '{}'", path));
    }
    out.files.push_back(path);
    return out;
}

} // namespace epigam
