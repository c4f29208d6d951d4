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
#ifndef EPIGAM_HOSP_HPP
#define EPIGAM_HOSP_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "epigam/dates.hpp"
#include "epigam/design.hpp"
#include "epigam/glm.hpp"
#include "epigam/nowcast.hpp"

namespace epigam
{

struct HospCell {
    Date date;
    std::string district;
    std::string age_group;
    std::string gender;
    double reported = 0.0;
};

/// Reported counts C(t, r, g) as known at `as_of`.
struct HospPanel {
    Date as_of;
    std::vector<HospCell> cells;
};

struct PopulationKey {
    std::string district;
    std::string age_group;
    std::string gender;
    auto operator<=>(const PopulationKey&) const = default;
};

using CellPopulation = std::map<PopulationKey, double>;
using DistrictCoords = std::map<std::string, std::pair<double, double>>;

/// F_{t,g'}(T - t) per coarse age group and event date.
struct DelayCdfTable {
    Date as_of;
    int d_max = 0;
    std::map<std::string, std::map<Date, double>> F;

    /// 1 for dates at least d_max days before as_of; throws for dates on or after as_of.
    double at(const std::string& group, Date date) const;

    static DelayCdfTable from_fit(const DelayModelFit& fit);
    static DelayCdfTable from_json(const nlohmann::json& j);
};

struct HospConfig {
    AgeMap ages                  = AgeMap::default_map();
    std::string reference_age    = "15-34";
    std::string reference_gender = "male";
    int time_basis               = 10;
    int spatial_rank             = 30;
    /// Without the correction the offset is log population only.
    bool delay_offset = true;
};

struct HospModelData {
    Design design;
    Frame frame;
    Eigen::VectorXd response;
    std::vector<std::string> groups; ///< district per row
    std::vector<Date> dates;         ///< event date per row
    Date start;
    std::vector<std::string> age_levels;
    std::vector<std::string> gender_levels;
    std::vector<std::string> districts;
    std::size_t dropped_zero_population = 0;
    bool spatial = true;
};

/**
 * Zero-filled grid of days start..as_of-1 x districts x age x gender with
 * response C(t, r, g) and offset log(pop * F_{t,g'}(T - t)).
 */
HospModelData build_hosp_design(const HospPanel& panel, const CellPopulation& pop, const DistrictCoords& coords,
                                const DelayCdfTable& cdf, const HospConfig& config = {});

FitResult fit_hosp_model(const HospModelData& data, const LambdaSpec& lambda = LambdaSpec::selected());

/// Writes age_gender_effects.csv, time_smooth.csv, spatial_surface.csv,
/// district_random_effects.csv and weekday_effects.csv into `dir`.
void emit_effect_grids(const FitResult& fit, const HospModelData& data, const DistrictCoords& coords,
                       const std::string& dir);

/// Fitted centered time smooth s1(t) per day index t = 1..T-1 (link scale).
Eigen::VectorXd time_smooth(const FitResult& fit, const HospModelData& data);

struct HospSimulationConfig {
    Date start;
    int days       = 60; ///< as-of day T
    int districts  = 50;
    int d_max      = 40;
    std::vector<std::string> ages    = {"0-14", "15-34", "35-59", "60-79", "80+"};
    std::vector<std::string> genders = {"female", "male"};
    double intercept = -9.0; ///< log daily admissions per person at the reference cell
    double nb_theta  = 20.0;
    double spatial_amplitude = 0.3;
    double random_sd         = 0.15;
    /// delay law per coarse group (gamma-shaped pmf over 1..d_max)
    std::vector<double> gamma_shape = {1.3, 1.5};
    std::vector<double> gamma_scale = {5.0, 7.0};
};

struct HospSimulation {
    HospPanel panel;
    CellPopulation population;
    DistrictCoords coords;
    DelayCdfTable cdf;                  ///< true F at the as-of date
    Eigen::VectorXd time_trend;         ///< generating s1(t), t = 1..T-1, centered
    std::map<std::string, double> age_gender_effects;
    std::vector<double> weekday_effects; ///< Mon..Sun, Monday 0
    /// expected final counts summed over districts and cells, t = 1..T-1
    Eigen::VectorXd expected_total;
    /// simulated final counts H(t, g), t = 1..T-1, columns in AgeMap::default_map().coarse order
    Eigen::MatrixXd final_counts;
    std::map<std::string, Eigen::VectorXd> delay_pmf; ///< per coarse group, d = 1..d_max
    LineList line_list;                  ///< individual records reported by the as-of date
};

HospSimulation simulate_hosp(const HospSimulationConfig& config, std::uint64_t seed, bool with_line_list = false);

} // namespace epigam

#endif // EPIGAM_HOSP_HPP
