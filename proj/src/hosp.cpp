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
#include "epigam/hosp.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/csv.hpp"
#include "epigam/errors.hpp"
#include "epigam/rng.hpp"

namespace epigam
{

double DelayCdfTable::at(const std::string& group, Date date) const
{
    const long back = days_between(date, as_of);
    if (back <= 0) {
        throw DataError(fmt::format("no delay correction for {} on or after the as-of date {}", format_date(date),
                                    format_date(as_of)));
    }
    if (back >= d_max) {
        return 1.0;
    }
    const auto g = F.find(group);
    if (g == F.end()) {
        throw ConfigError(fmt::format("delay model has no age group '{}'", group));
    }
    const auto it = g->second.find(date);
    if (it == g->second.end()) {
        throw DataError(fmt::format("delay model has no CDF value for group '{}' on {}", group, format_date(date)));
    }
    return it->second;
}

DelayCdfTable DelayCdfTable::from_json(const nlohmann::json& j)
{
    DelayCdfTable t;
    try {
        t.as_of = parse_date(j.at("as_of").get<std::string>());
        t.d_max = j.at("d_max").get<int>();
        for (const auto& [group, rows] : j.at("cdf").items()) {
            auto& m = t.F[group];
            for (const auto& row : rows) {
                m[parse_date(row.at("date").get<std::string>())] = row.at("F").get<double>();
            }
        }
    }
    catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed delay model document: {}", e.what()));
    }
    return t;
}

DelayCdfTable DelayCdfTable::from_fit(const DelayModelFit& fit)
{
    return from_json(delay_model_json(fit));
}

namespace
{

std::vector<std::string> with_reference_first(std::set<std::string> levels, const std::string& reference,
                                              const char* what)
{
    if (levels.erase(reference) == 0) {
        throw ConfigError(fmt::format("reference {} '{}' does not occur in the data", what, reference));
    }
    std::vector<std::string> out = {reference};
    out.insert(out.end(), levels.begin(), levels.end());
    return out;
}

const std::vector<std::string>& weekday_levels()
{
    static const std::vector<std::string> levels = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    return levels;
}

constexpr double z975 = 1.959963984540054;

double quad_se(const Eigen::VectorXd& c, const Eigen::MatrixXd& V)
{
    return std::sqrt(std::max(0.0, c.dot(V * c)));
}

} // namespace

HospModelData build_hosp_design(const HospPanel& panel, const CellPopulation& pop, const DistrictCoords& coords,
                                const DelayCdfTable& cdf, const HospConfig& config)
{
    if (panel.cells.empty()) {
        throw DataError("hospitalisation panel is empty");
    }
    HospModelData data;
    std::set<std::string> districts, ages, genders;
    Date start = panel.cells.front().date;
    std::map<std::tuple<Date, std::string, std::string, std::string>, double> counts;
    for (const auto& c : panel.cells) {
        if (c.date >= panel.as_of) {
            continue; // nothing observable yet for the as-of day
        }
        if (!(c.reported >= 0.0)) {
            throw DataError(fmt::format("negative reported count for {} {} {} {}", format_date(c.date), c.district,
                                        c.age_group, c.gender));
        }
        if (!counts.emplace(std::make_tuple(c.date, c.district, c.age_group, c.gender), c.reported).second) {
            throw DataError(fmt::format("duplicate panel cell {} {} {} {}", format_date(c.date), c.district,
                                        c.age_group, c.gender));
        }
        start = std::min(start, c.date);
        districts.insert(c.district);
        ages.insert(c.age_group);
        genders.insert(c.gender);
    }
    if (counts.empty()) {
        throw DataError("hospitalisation panel has no cells before the as-of date");
    }
    for (const auto& [key, value] : pop) {
        if (districts.count(key.district) > 0) {
            ages.insert(key.age_group);
            genders.insert(key.gender);
        }
    }
    for (const auto& d : districts) {
        if (coords.find(d) == coords.end()) {
            throw DataError(fmt::format("district '{}' has no coordinates", d));
        }
    }
    for (const auto& a : ages) {
        (void)config.ages(a); // validates the coarse mapping
    }
    data.start         = start;
    data.districts     = {districts.begin(), districts.end()};
    data.age_levels    = with_reference_first(ages, config.reference_age, "age group");
    data.gender_levels = with_reference_first(genders, config.reference_gender, "gender");

    std::vector<std::string> col_age, col_gender, col_weekday, col_district;
    std::vector<double> col_t, col_lon, col_lat, col_offset, y;
    const long T = days_between(start, panel.as_of) + 1;
    for (long t = 1; t <= T - 1; ++t) {
        const Date date = start + std::chrono::days{t - 1};
        for (const auto& r : data.districts) {
            const auto& xy = coords.at(r);
            for (const auto& a : data.age_levels) {
                const double F = config.delay_offset ? cdf.at(config.ages(a), date) : 1.0;
                if (!(F > 0.0)) {
                    throw DataError(fmt::format("delay CDF for {} on {} is not positive", a, format_date(date)));
                }
                for (const auto& g : data.gender_levels) {
                    const auto p = pop.find({r, a, g});
                    if (p == pop.end()) {
                        throw DataError(fmt::format("no population for district '{}', age '{}', gender '{}'", r, a, g));
                    }
                    if (!(p->second > 0.0)) {
                        ++data.dropped_zero_population;
                        continue;
                    }
                    const auto c = counts.find(std::make_tuple(date, r, a, g));
                    y.push_back(c == counts.end() ? 0.0 : c->second);
                    col_age.push_back(a);
                    col_gender.push_back(g);
                    col_weekday.push_back(weekday_name(weekday_index(date)));
                    col_district.push_back(r);
                    col_t.push_back(static_cast<double>(t));
                    col_lon.push_back(xy.first);
                    col_lat.push_back(xy.second);
                    col_offset.push_back(std::log(p->second * F));
                    data.dates.push_back(date);
                }
            }
        }
    }
    if (data.dropped_zero_population > 0) {
        spdlog::warn("{} zero-population cells dropped from the hospitalisation model", data.dropped_zero_population);
    }
    data.frame.add("age", col_age)
        .add("gender", col_gender)
        .add("weekday", col_weekday)
        .add("district", col_district)
        .add("t", col_t)
        .add("lon", col_lon)
        .add("lat", col_lat)
        .add("offset", col_offset);
    data.groups   = col_district;
    data.response = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));

    DesignSpec spec;
    spec.offset = "offset";
    spec.terms.push_back(FactorTerm{"age", data.age_levels, true});
    spec.terms.push_back(FactorTerm{"gender", data.gender_levels, true});
    spec.terms.push_back(InteractionTerm{"age", "gender", data.age_levels, data.gender_levels});
    spec.terms.push_back(FactorTerm{"weekday", weekday_levels(), true});
    spec.terms.push_back(SmoothTerm{"t", config.time_basis, 3, 2, std::nullopt, "", true});
    if (data.districts.size() >= 4) {
        spec.terms.push_back(SpatialTerm{"lon", "lat", config.spatial_rank, true});
    }
    else {
        data.spatial = false;
        spdlog::warn("only {} district(s): spatial smooth dropped", data.districts.size());
    }
    spec.terms.push_back(RandomInterceptTerm{"district", data.districts});
    data.design = Design::build(spec, data.frame);
    return data;
}

FitResult fit_hosp_model(const HospModelData& data, const LambdaSpec& lambda)
{
    PirlsOptions opt;
    opt.groups = data.groups;
    auto fit   = fit_negative_binomial(data.design, data.response, lambda, opt);
    if (!fit.converged) {
        spdlog::warn("hospitalisation model did not converge: {}", fit.message);
    }
    return fit;
}

Eigen::VectorXd time_smooth(const FitResult& fit, const HospModelData& data)
{
    const auto* term = data.design.find_term("s(t)");
    if (term == nullptr) {
        throw ConfigError("hospitalisation design has no time smooth");
    }
    const auto& t  = data.frame.numeric("t");
    const int last = static_cast<int>(*std::max_element(t.begin(), t.end()));
    std::vector<double> grid;
    for (int i = 1; i <= last; ++i) {
        grid.push_back(i);
    }
    Frame f;
    f.add("t", grid);
    return data.design.term_matrix("s(t)", f) * fit.beta.segment(term->start, term->size);
}

void emit_effect_grids(const FitResult& fit, const HospModelData& data, const DistrictCoords& coords,
                       const std::string& dir)
{
    namespace fs = std::filesystem;
    const Eigen::Index p = fit.beta.size();
    const auto col       = [&](const std::string& name) {
        return data.design.find_column(name);
    };
    {
        CsvWriter out((fs::path(dir) / "age_gender_effects.csv").string(),
                      {"age_group", "gender", "estimate", "se", "se_sandwich"});
        for (std::size_t a = 0; a < data.age_levels.size(); ++a) {
            for (std::size_t g = 0; g < data.gender_levels.size(); ++g) {
                Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
                const auto& al    = data.age_levels[a];
                const auto& gl    = data.gender_levels[g];
                if (a > 0) {
                    if (auto j = col(fmt::format("age[{}]", al))) {
                        c(*j) = 1.0;
                    }
                }
                if (g > 0) {
                    if (auto j = col(fmt::format("gender[{}]", gl))) {
                        c(*j) = 1.0;
                    }
                }
                if (a > 0 && g > 0) {
                    if (auto j = col(fmt::format("age[{}]:gender[{}]", al, gl))) {
                        c(*j) = 1.0;
                    }
                }
                out.row({al, gl, format_number(c.dot(fit.beta)), format_number(quad_se(c, fit.cov_model)),
                         format_number(quad_se(c, fit.cov_sandwich))});
            }
        }
    }
    {
        CsvWriter out((fs::path(dir) / "weekday_effects.csv").string(), {"weekday", "estimate", "se"});
        for (const auto& wd : weekday_levels()) {
            const auto j = col(fmt::format("weekday[{}]", wd));
            out.row({wd, format_number(j ? fit.beta(*j) : 0.0),
                     format_number(j ? std::sqrt(std::max(0.0, fit.cov_model(*j, *j))) : 0.0)});
        }
    }
    {
        CsvWriter out((fs::path(dir) / "time_smooth.csv").string(), {"date", "t", "estimate", "ci_lo", "ci_hi"});
        const auto* term = data.design.find_term("s(t)");
        if (term != nullptr) {
            const auto& t  = data.frame.numeric("t");
            const int last = static_cast<int>(*std::max_element(t.begin(), t.end()));
            std::vector<double> grid;
            for (int i = 1; i <= last; ++i) {
                grid.push_back(i);
            }
            Frame f;
            f.add("t", grid);
            const Eigen::MatrixXd B = data.design.term_matrix("s(t)", f);
            const Eigen::VectorXd b = fit.beta.segment(term->start, term->size);
            const Eigen::MatrixXd V = fit.cov_model.block(term->start, term->start, term->size, term->size);
            for (int i = 0; i < last; ++i) {
                const Eigen::VectorXd row = B.row(i).transpose();
                const double est          = row.dot(b);
                const double se           = quad_se(row, V);
                out.row({format_date(data.start + std::chrono::days{i}), std::to_string(i + 1), format_number(est),
                         format_number(est - z975 * se), format_number(est + z975 * se)});
            }
        }
    }
    {
        CsvWriter out((fs::path(dir) / "spatial_surface.csv").string(), {"lon", "lat", "estimate"});
        const auto* term = data.design.find_term("s(lon,lat)");
        if (term != nullptr && !coords.empty()) {
            double lon_lo = 1e300, lon_hi = -1e300, lat_lo = 1e300, lat_hi = -1e300;
            for (const auto& d : data.districts) {
                const auto& xy = coords.at(d);
                lon_lo = std::min(lon_lo, xy.first);
                lon_hi = std::max(lon_hi, xy.first);
                lat_lo = std::min(lat_lo, xy.second);
                lat_hi = std::max(lat_hi, xy.second);
            }
            constexpr int n = 25;
            std::vector<double> lon, lat;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    lon.push_back(lon_lo + (lon_hi - lon_lo) * i / (n - 1));
                    lat.push_back(lat_lo + (lat_hi - lat_lo) * j / (n - 1));
                }
            }
            Frame f;
            f.add("lon", lon).add("lat", lat);
            const Eigen::VectorXd est =
                data.design.term_matrix("s(lon,lat)", f) * fit.beta.segment(term->start, term->size);
            for (std::size_t k = 0; k < lon.size(); ++k) {
                out.row({format_number(lon[k]), format_number(lat[k]), format_number(est(static_cast<Eigen::Index>(k)))});
            }
        }
    }
    {
        CsvWriter out((fs::path(dir) / "district_random_effects.csv").string(), {"district", "estimate", "se"});
        for (const auto& d : data.districts) {
            const auto j = col(fmt::format("re(district)[{}]", d));
            out.row({d, format_number(j ? fit.beta(*j) : 0.0),
                     format_number(j ? std::sqrt(std::max(0.0, fit.cov_model(*j, *j))) : 0.0)});
        }
    }
}

HospSimulation simulate_hosp(const HospSimulationConfig& config, std::uint64_t seed, bool with_line_list)
{
    if (config.days < 2 || config.districts < 1 || config.d_max < 2) {
        throw ConfigError("hospitalisation simulation needs >= 2 days, >= 1 district and d_max >= 2");
    }
    const AgeMap ages = AgeMap::default_map();
    HospSimulation sim;
    const Rng master(seed);
    const int T       = config.days;
    const Date as_of  = config.start + std::chrono::days{T - 1};
    sim.panel.as_of   = as_of;

    // delay law and its CDF per coarse group
    std::map<std::string, Eigen::VectorXd> pmf;
    sim.cdf.as_of = as_of;
    sim.cdf.d_max = config.d_max;
    for (std::size_t g = 0; g < ages.coarse.size(); ++g) {
        Eigen::VectorXd p(config.d_max);
        for (int d = 1; d <= config.d_max; ++d) {
            p(d - 1) = std::pow(static_cast<double>(d), config.gamma_shape[g] - 1.0) *
                       std::exp(-static_cast<double>(d) / config.gamma_scale[g]);
        }
        p /= p.sum();
        pmf[ages.coarse[g]] = p;
        sim.delay_pmf[ages.coarse[g]] = p;
        auto& table         = sim.cdf.F[ages.coarse[g]];
        for (int t = std::max(1, T - config.d_max + 1); t <= T - 1; ++t) {
            table[config.start + std::chrono::days{t - 1}] = std::min(1.0, p.head(T - t).sum());
        }
    }

    Rng geo = master.split("geography");
    std::vector<std::string> districts;
    std::vector<double> spatial, random;
    for (int r = 0; r < config.districts; ++r) {
        const auto name = fmt::format("D{:03d}", r + 1);
        const double lon = geo.uniform(9.0, 13.5);
        const double lat = geo.uniform(47.5, 50.5);
        districts.push_back(name);
        sim.coords[name] = {lon, lat};
        spatial.push_back(config.spatial_amplitude * std::sin(1.3 * (lon - 9.0)) * std::cos(1.1 * (lat - 47.5)));
        random.push_back(geo.normal(0.0, config.random_sd));
        for (const auto& a : config.ages) {
            for (const auto& g : config.genders) {
                const double scale      = a == "80+" ? 0.3 : 1.0;
                sim.population[{name, a, g}] = std::round(scale * geo.uniform(5000.0, 40000.0));
            }
        }
    }
    const double mean_spatial = std::accumulate(spatial.begin(), spatial.end(), 0.0) / static_cast<double>(spatial.size());
    for (auto& s : spatial) {
        s -= mean_spatial;
    }

    static const std::map<std::string, double> age_effect = {
        {"0-14", -1.5}, {"15-34", 0.0}, {"35-59", 0.5}, {"60-79", 1.5}, {"80+", 2.5}};
    for (const auto& a : config.ages) {
        for (const auto& g : config.genders) {
            const double base = age_effect.count(a) > 0 ? age_effect.at(a) : 0.0;
            const double gen  = g == "female" ? -0.2 : 0.0;
            const double inter = (g == "female" && (a == "60-79" || a == "80+")) ? -0.1 : 0.0;
            sim.age_gender_effects[a + "|" + g] = base + gen + inter;
        }
    }
    sim.weekday_effects = {0.0, 0.05, 0.05, 0.03, 0.0, -0.2, -0.3};

    sim.time_trend.resize(T - 1);
    for (int t = 1; t <= T - 1; ++t) {
        const double x        = static_cast<double>(t) / static_cast<double>(T);
        sim.time_trend(t - 1) = 0.8 * x + 0.3 * std::sin(2.0 * std::numbers::pi * x * 1.5);
    }
    sim.time_trend.array() -= sim.time_trend.mean();
    sim.expected_total = Eigen::VectorXd::Zero(T - 1);
    sim.final_counts   = Eigen::MatrixXd::Zero(T - 1, static_cast<Eigen::Index>(ages.coarse.size()));

    std::size_t id = 0;
    for (int t = 1; t <= T - 1; ++t) {
        Rng rng        = master.split(static_cast<std::uint64_t>(t));
        const Date day = config.start + std::chrono::days{t - 1};
        const int wd   = weekday_index(day);
        for (std::size_t r = 0; r < districts.size(); ++r) {
            for (const auto& a : config.ages) {
                const auto& coarse = ages(a);
                const auto gi      = static_cast<Eigen::Index>(
                    std::find(ages.coarse.begin(), ages.coarse.end(), coarse) - ages.coarse.begin());
                const Eigen::VectorXd& p = pmf.at(coarse);
                const std::vector<double> probs(p.data(), p.data() + p.size());
                for (const auto& g : config.genders) {
                    const double pop = sim.population.at({districts[r], a, g});
                    const double eta = config.intercept + sim.age_gender_effects.at(a + "|" + g) +
                                       sim.weekday_effects[static_cast<std::size_t>(wd)] + sim.time_trend(t - 1) +
                                       spatial[r] + random[r];
                    const double mu = pop * std::exp(eta);
                    sim.expected_total(t - 1) += mu;
                    const auto h        = rng.negative_binomial(mu, config.nb_theta);
                    sim.final_counts(t - 1, gi) += static_cast<double>(h);
                    const auto by_delay = rng.multinomial(h, probs);
                    double reported     = 0.0;
                    for (int d = 1; d <= config.d_max && t + d <= T; ++d) {
                        const auto n = by_delay[static_cast<std::size_t>(d - 1)];
                        reported += static_cast<double>(n);
                        if (with_line_list) {
                            for (std::int64_t k = 0; k < n; ++k) {
                                HospRecord rec;
                                rec.case_id         = fmt::format("h{:07d}", ++id);
                                rec.admission       = day;
                                rec.infection_report = day;
                                rec.registry_report = day + std::chrono::days{d};
                                rec.age_group       = a;
                                rec.gender          = g;
                                rec.district        = districts[r];
                                sim.line_list.records.push_back(std::move(rec));
                            }
                        }
                    }
                    sim.panel.cells.push_back({day, districts[r], a, g, reported});
                }
            }
        }
    }
    return sim;
}

} // namespace epigam
