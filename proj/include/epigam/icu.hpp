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
#ifndef EPIGAM_ICU_HPP
#define EPIGAM_ICU_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epigam/design.hpp"
#include "epigam/hosp.hpp"
#include "epigam/multinomial.hpp"

namespace epigam
{

/// Category order of the bed counts; COVID beds are the reference.
inline const std::vector<std::string>& icu_categories()
{
    static const std::vector<std::string> c = {"free", "covid", "noncovid"};
    return c;
}

/// Weekly bed counts Z (free, covid, noncovid) and incidences per 100k, one row per (week, district).
struct IcuPanel {
    std::vector<std::string> weeks; ///< consecutive ISO weeks "YYYY-Www"
    std::vector<std::string> districts;
    std::vector<std::string> age_groups;
    Eigen::MatrixXd beds;      ///< row w * R + r, 3 columns
    Eigen::MatrixXd incidence; ///< row w * R + r, one column per age group
    DistrictCoords coords;

    std::size_t num_weeks() const
    {
        return weeks.size();
    }
    std::size_t num_districts() const
    {
        return districts.size();
    }
    Eigen::Index row(std::size_t w, std::size_t r) const
    {
        return static_cast<Eigen::Index>(w * districts.size() + r);
    }
    /// Throws DataError on week gaps, non-integer or negative counts, empty districts.
    void validate() const;
};

/// Half-to-even rounding applied to weekly mean occupancies at ingestion.
double round_half_even(double x);

struct NormalizationStats {
    double mean = 0.0;
    double sd   = 1.0; ///< population sd (divisor n)

    double apply(double x) const
    {
        return (x - mean) / sd;
    }
};

/// (x - mean) / population sd; throws NumericError for n < 2 or zero variance.
std::vector<double> normalize(const std::vector<double>& x, NormalizationStats* stats = nullptr);

enum class IcuVariant { full, no_ar, no_infection, linear, intercept_only };

std::string variant_name(IcuVariant v);
/// Effects dropped relative to the full model, for the score table.
std::string omitted_effects(IcuVariant v);
const std::vector<IcuVariant>& all_variants();

struct IcuConfig {
    double delta     = 1.0;
    int spatial_rank = 20;
    int window       = 8;
};

struct IcuModelData {
    Design design;
    Frame frame;               ///< normalized covariates
    Eigen::MatrixXd counts;    ///< n x 3
    std::vector<std::string> groups;
    std::vector<std::size_t> weeks; ///< response week index per row
    std::map<std::string, NormalizationStats> stats;
    std::vector<std::string> dropped; ///< constant covariates left out
    std::vector<std::string> linear_covariates;
    bool spatial = true;
};

/// Covariate name of the lagged log-incidence for an age group.
std::string incidence_column(const std::string& age);

/**
 * Rows for response weeks [first, last] (indices into panel.weeks, first >= 1).
 * Covariates use week w - 1; normalization statistics come from these rows.
 */
IcuModelData build_icu_design(const IcuPanel& panel, std::size_t first, std::size_t last, const IcuConfig& config,
                              IcuVariant variant = IcuVariant::full);

/// Frame of normalized covariates for one response week, using the training statistics.
Frame icu_frame(const IcuPanel& panel, std::size_t week, const IcuConfig& config,
                const std::map<std::string, NormalizationStats>& stats);

MultinomialFit fit_icu_model(const IcuModelData& data, const LambdaSpec& lambda = LambdaSpec::selected());

void write_icu_coefficients(const MultinomialFit& fit, const IcuModelData& data, const std::string& path);
/// Fitted spatial surfaces s_j(lon, lat) on a grid over the district bounding box.
void write_icu_surfaces(const MultinomialFit& fit, const IcuModelData& data, const IcuPanel& panel,
                        const std::string& path);

struct ForecastRecord {
    std::size_t week = 0;
    IcuVariant variant = IcuVariant::full;
    std::optional<double> score; ///< missing when the fit failed
    Eigen::MatrixXd probs;       ///< R x 3
    std::string message;
};

/// One-week-ahead forecasts for every target week and variant, ordered by week then variant.
std::vector<ForecastRecord> rolling_forecast(const IcuPanel& panel, const IcuConfig& config,
                                             const std::vector<IcuVariant>& variants = all_variants());

struct PermutationResult {
    double statistic = 0.0;
    double p_value   = 1.0;
    std::size_t permutations = 0;
    bool exhaustive = false;
    bool degenerate = false;
};

/// Paired sign-flip test on d = alt - full; exhaustive when 2^n <= n_perm + 1.
PermutationResult permutation_test(const std::vector<double>& scores_full, const std::vector<double>& scores_alt,
                                   std::size_t n_perm, std::uint64_t seed);

struct ScoreRow {
    IcuVariant variant = IcuVariant::full;
    double average_score = 0.0;
    std::size_t weeks    = 0;
    std::optional<PermutationResult> test; ///< versus the full model
};

std::vector<ScoreRow> score_table(const std::vector<ForecastRecord>& records, std::size_t n_perm,
                                  std::uint64_t seed);

void write_forecast_scores(const std::vector<ForecastRecord>& records, const IcuPanel& panel,
                           const std::string& path);
void write_score_table(const std::vector<ScoreRow>& rows, const std::string& path);

struct IcuTruth {
    Eigen::Vector2d intercept{2.8, 4.5};
    /// rows: logit (free, noncovid); columns: share free, share covid of the previous week
    Eigen::Matrix2d ar{{3.0, -1.5}, {-1.0, -3.0}};
    /// rows: logit; columns: log(incidence + delta) per age group
    Eigen::MatrixXd incidence;
    double spatial_amplitude = 0.5;
    double random_sd         = 0.4;
};

/// Strong AR and negative incidence effects.
IcuTruth default_icu_truth();

struct IcuSimulationConfig {
    std::size_t districts = 100;
    std::size_t weeks     = 40;
    std::string first_week = "2020-W40";
    std::vector<std::string> age_groups = {"15-34", "35-59", "60-79", "80+"};
    double beds_lo = 40.0;
    double beds_hi = 250.0;
    double delta   = 1.0;
    IcuTruth truth = default_icu_truth();
};

struct IcuSimulation {
    IcuPanel panel;
    Eigen::MatrixXd spatial; ///< R x 2 true surface values per logit
    Eigen::MatrixXd random;  ///< R x 2
};

IcuSimulation simulate_icu(const IcuSimulationConfig& config, std::uint64_t seed);

} // namespace epigam

#endif // EPIGAM_ICU_HPP
