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
#ifndef EPIGAM_NOWCAST_HPP
#define EPIGAM_NOWCAST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "epigam/dates.hpp"
#include "epigam/design.hpp"
#include "epigam/glm.hpp"

namespace epigam
{

struct HospRecord {
    std::string case_id;
    std::optional<Date> admission;
    std::optional<Date> infection_report;
    Date registry_report;
    std::string age_group;
    std::string gender;
    std::string district;
};

struct LineList {
    std::vector<HospRecord> records;
};

struct ImputationReport {
    std::size_t imputed = 0;
    std::size_t dropped = 0;
};

/// Missing admission dates are replaced by the infection report date;
/// records without either are dropped.
LineList impute_admission_dates(const LineList& list, ImputationReport* report = nullptr);

/// Fine-to-coarse age map; labels already coarse map to themselves.
struct AgeMap {
    std::map<std::string, std::string> fine_to_coarse;
    std::vector<std::string> coarse;

    static AgeMap default_map();
    /// Throws ConfigError for an unmapped label.
    const std::string& operator()(const std::string& label) const;
};

/**
 * Per-group counts N(t, d) for t = 1..T (day 1 = `start`, day T = as-of
 * date) and d = 1..d_max. Cells with t + d > T are not yet observable.
 */
struct ReportingTriangle {
    Date start;
    int T     = 0;
    int d_max = 0;
    std::vector<std::string> groups;
    std::vector<Eigen::MatrixXd> N; ///< per group, T x d_max (row t-1, column d-1)
    std::size_t excluded_beyond_dmax = 0;
    std::size_t rejected_negative    = 0;
    std::size_t not_yet_observable   = 0;
    std::size_t outside_window       = 0;

    static bool observed(int t, int d, int T)
    {
        return t + d <= T;
    }
    /// C(t, d) = sum_{l <= d} N(t, l) for group g (only meaningful on the mask).
    double cumulative(std::size_t g, int t, int d) const;
    /// C(t, min(T - t, d_max)): everything reported for day t so far.
    double reported(std::size_t g, int t) const;
    Date date_of(int t) const
    {
        return start + std::chrono::days{t - 1};
    }
};

/// `start` defaults to the earliest admission date in the list.
ReportingTriangle build_triangle(const LineList& list, Date as_of, int d_max, const AgeMap& ages,
                                 std::optional<Date> start = std::nullopt);

struct DelayModelOptions {
    int knot_spacing = 28;
    int num_basis    = 8;
    /// Group whose delay distribution gets the extra smooth s3(d).
    std::string interaction_group = "60+";
    LambdaSpec lambda = LambdaSpec::selected();
};

struct DelayModelFit {
    FitResult fit;
    Design design;
    Date start;
    int T     = 0;
    int d_max = 0;
    std::vector<std::string> groups;
    std::string interaction_group;
    bool has_interaction = false;

    /// Design rows for (t, group, k = 2..d_max).
    Eigen::MatrixXd hazard_rows(int t, std::size_t g) const;
};

/// Sequential binomial model N(t,d) ~ Bin(C(t,d), p(d)) over observable cells with d >= 2 and C > 0.
DelayModelFit fit_delay_model(const ReportingTriangle& tri, const DelayModelOptions& options = {});

/// F(d) = prod_{k=d+1}^{d_max} (1 - p(k)) for d = 1..d_max; p is indexed 1..d_max (p(0) ignored, p(1) unused).
Eigen::VectorXd delay_cdf_from_hazards(const Eigen::VectorXd& p);
/// P(D = d) = p(d) F(d) with p(1) = 1.
Eigen::VectorXd delay_pmf_from_hazards(const Eigen::VectorXd& p);

/// Fitted hazards p(1..d_max) (entry 0 unused, p(1) = 1) at day t for group g.
Eigen::VectorXd delay_hazards(const DelayModelFit& fit, int t, std::size_t g, const Eigen::VectorXd* beta = nullptr);
double delay_cdf(const DelayModelFit& fit, int t, std::size_t g, int d);

struct NowcastCell {
    int t = 0;
    std::size_t group = 0;
    double reported   = 0.0;
    double F_hat      = 1.0;
    double nowcast    = 0.0;
    double ci_lo      = 0.0;
    double ci_hi      = 0.0;
    bool unstable     = false;
};

enum class BootstrapMode {
    parameter,  ///< beta draws only
    predictive, ///< beta draws plus the not-yet-reported count given C and F
};

struct NowcastResult {
    std::vector<std::string> groups; ///< fit groups followed by "all"
    int T = 0;
    Date start;
    std::vector<NowcastCell> cells; ///< ordered by group then t = 1..T-1
    int replicates = 0;
    /// per cell, per draw nowcast (rows: cells, cols: draws); kept for aggregation
    Eigen::MatrixXd draws;

    const NowcastCell& cell(std::size_t g, int t) const;
};

NowcastResult nowcast_point(const ReportingTriangle& tri, const DelayModelFit& fit);

/// Adds 2.5%/97.5% bootstrap bounds to a point nowcast.
void bootstrap_ci(NowcastResult& result, const ReportingTriangle& tri, const DelayModelFit& fit, int B,
                  std::uint64_t seed, BootstrapMode mode = BootstrapMode::predictive);

/// Linear-interpolation (type 7) sample quantile.
double quantile(std::vector<double> values, double q);

void write_nowcast_csv(const NowcastResult& result, const std::string& path);

/// Delay CDF tables F_{t,g}(T - t) for every day, consumed by the hospitalisation model.
nlohmann::json delay_model_json(const DelayModelFit& fit);

struct DelaySimulationConfig {
    Date start;
    int days  = 120; ///< as-of day T
    int d_max = 40;
    std::vector<std::string> groups = {"0-59", "60+"};
    std::vector<double> base_level  = {150.0, 100.0}; ///< expected admissions per day at t = 1
    double growth                   = 0.005;         ///< daily log growth
    std::vector<double> gamma_shape = {1.3, 1.5};
    std::vector<double> gamma_scale = {5.0, 7.0};
    double missing_admission        = 0.1;
};

struct DelaySimulation {
    LineList list;
    Eigen::MatrixXd truth;           ///< T x groups final counts H(t, g) with delay <= d_max
    std::vector<Eigen::MatrixXd> N;  ///< internal triangle on the mask
    Eigen::MatrixXd pmf;             ///< d_max x groups true delay pmf
};

DelaySimulation simulate_line_list(const DelaySimulationConfig& config, std::uint64_t seed);

} // namespace epigam

#endif // EPIGAM_NOWCAST_HPP
