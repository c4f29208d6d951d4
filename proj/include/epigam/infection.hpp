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
#ifndef EPIGAM_INFECTION_HPP
#define EPIGAM_INFECTION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epigam/design.hpp"
#include "epigam/glm.hpp"

namespace epigam
{

/// Complete week x district x age-group count array.
struct WeeklyPanel {
    std::vector<std::string> weeks;
    std::vector<std::string> districts;
    std::vector<std::string> age_groups;
    std::vector<double> counts; ///< index (w * R + r) * A + a

    WeeklyPanel() = default;
    WeeklyPanel(std::vector<std::string> w, std::vector<std::string> r, std::vector<std::string> a);

    std::size_t num_weeks() const
    {
        return weeks.size();
    }
    std::size_t num_districts() const
    {
        return districts.size();
    }
    std::size_t num_ages() const
    {
        return age_groups.size();
    }
    double& at(std::size_t w, std::size_t r, std::size_t a)
    {
        return counts[(w * districts.size() + r) * age_groups.size() + a];
    }
    double at(std::size_t w, std::size_t r, std::size_t a) const
    {
        return counts[(w * districts.size() + r) * age_groups.size() + a];
    }
    void validate() const;
};

/// Population per district (rows) and age group (columns).
struct PopulationTable {
    std::vector<std::string> districts;
    std::vector<std::string> age_groups;
    Eigen::MatrixXd pop;

    void validate() const;
};

struct InfectionModelData {
    Design design;
    Eigen::VectorXd response;
    std::vector<std::string> groups; ///< district of each row (sandwich unit)
    std::vector<std::string> lag_columns;
};

/**
 * Autoregressive design for target age group `target`: rows are weeks 2..W
 * stacked over districts, columns one free intercept per week and
 * log(Y_{w-1,r,k} + delta) for every age group k, offset log population.
 */
InfectionModelData build_infection_design(const WeeklyPanel& panel, const PopulationTable& pop, std::size_t target,
                                          double delta = 1.0);

std::string lag_column(const std::string& age_group);
std::string week_column(const std::string& week);

struct InfectionFit {
    std::string age_group;
    FitResult fit;
    std::vector<std::string> lag_columns;
};

/// One negative-binomial fit per target age group, sandwich grouped by district.
std::vector<InfectionFit> fit_infection_model(const WeeklyPanel& panel, const PopulationTable& pop,
                                              double delta = 1.0);

/// Generating parameters of the autoregressive NB model.
struct InfectionTruth {
    Eigen::VectorXd week_intercepts; ///< theta_w for w = 1..W (entry 0 unused)
    Eigen::MatrixXd lag;             ///< A x A, row = target age, column = lagged age
    double nb_theta = 10.0;          ///< infinity gives Poisson draws
    Eigen::MatrixXd initial;         ///< R x A counts of week 1
    double delta = 1.0;
};

/// Forward simulation; throws NumericError when a mean exceeds 1e9.
WeeklyPanel simulate_infection_panel(const InfectionTruth& truth, const PopulationTable& pop,
                                     const std::vector<std::string>& weeks, std::uint64_t seed);

/**
 * Multiplicative under-reporting Y~ = round(R Y), R ~ Beta with mean
 * pi_{w,a} and the given concentration. A non-empty `elasticity` makes R
 * depend on the outcome, R = B * ((Y + 1) / (max_a Y + 1))^gamma_a, which
 * violates the independence the invariance argument relies on.
 */
struct CdrConfig {
    Eigen::MatrixXd mean_cdr; ///< W x A
    double concentration = 200.0;
    std::uint64_t seed   = 1;
    Eigen::VectorXd elasticity;

    void validate(std::size_t W, std::size_t A) const;
};

WeeklyPanel apply_cdr_thinning(const WeeklyPanel& panel, const CdrConfig& cdr);

struct CdrComparisonRow {
    std::string model_age_group;
    std::string covariate_age_group;
    double estimate_true    = 0.0;
    double estimate_thinned = 0.0;
    double difference       = 0.0;
    double se_true          = 0.0;
    double standardized     = 0.0;
};

struct WeekShiftRow {
    std::string model_age_group;
    std::string week;
    double shift = 0.0; ///< thinned minus true week intercept
};

struct CdrReport {
    std::vector<CdrComparisonRow> lags;
    std::vector<WeekShiftRow> week_shifts;

    double max_abs_standardized() const;
    /// Fraction of lag coefficients with |standardized difference| <= bound.
    double fraction_within(double bound = 3.0) const;
};

CdrReport cdr_invariance_report(const WeeklyPanel& truth_panel, const WeeklyPanel& thinned,
                                const PopulationTable& pop, double delta = 1.0);

/// Lag coefficient table (model_age_group, covariate_age_group, estimate, se_model, se_sandwich, ci_lo, ci_hi).
void write_infection_coefficients(const std::vector<InfectionFit>& fits, const std::string& path);
/// Week intercepts, reported with a note that they absorb under-reporting.
void write_week_intercepts(const std::vector<InfectionFit>& fits, const std::string& path);

struct CdrStudyConfig {
    std::size_t replicates = 100;
    std::size_t districts  = 200;
    std::size_t weeks      = 20;
    std::size_t ages       = 3;
    double mean_cdr        = 0.4;
    double concentration   = 200.0;
    Eigen::VectorXd elasticity; ///< empty for outcome-independent thinning
    std::uint64_t seed     = 1;
};

struct CdrStudyReplicate {
    std::size_t replicate = 0;
    double fraction_within = 0.0;
    double max_abs_standardized = 0.0;
    bool any_outside = false;
};

struct CdrStudyResult {
    std::vector<CdrStudyReplicate> replicates;
    double pooled_fraction_within = 0.0;
    double fraction_with_outside  = 0.0;
};

/// Default generating parameters used by the study and the synthetic scenario.
InfectionTruth default_infection_truth(const PopulationTable& pop, std::size_t weeks, std::uint64_t seed);
PopulationTable synthetic_population(std::size_t districts, std::size_t ages, std::uint64_t seed);
std::vector<std::string> synthetic_weeks(std::size_t n);

CdrStudyResult run_cdr_study(const CdrStudyConfig& config);

} // namespace epigam

#endif // EPIGAM_INFECTION_HPP
