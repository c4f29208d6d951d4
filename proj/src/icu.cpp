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
#include "epigam/icu.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/csv.hpp"
#include "epigam/dates.hpp"
#include "epigam/errors.hpp"
#include "epigam/parallel.hpp"
#include "epigam/rng.hpp"

namespace epigam
{

void IcuPanel::validate() const
{
    const auto R = districts.size();
    if (weeks.empty() || R == 0) {
        throw DataError("ICU panel has no weeks or no districts");
    }
    if (beds.rows() != static_cast<Eigen::Index>(weeks.size() * R) || beds.cols() != 3) {
        throw DataError(fmt::format("ICU bed matrix is {}x{}, expected {}x3", beds.rows(), beds.cols(), weeks.size() * R));
    }
    if (incidence.rows() != beds.rows() || incidence.cols() != static_cast<Eigen::Index>(age_groups.size())) {
        throw DataError("incidence matrix does not match the ICU panel");
    }
    std::vector<std::string> missing;
    for (std::size_t w = 1; w < weeks.size(); ++w) {
        const Date prev = parse_iso_week(weeks[w - 1]);
        const Date cur  = parse_iso_week(weeks[w]);
        if (cur <= prev) {
            throw DataError(fmt::format("ICU weeks are not increasing at {}", weeks[w]));
        }
        for (Date d = prev + std::chrono::days{7}; d < cur; d += std::chrono::days{7}) {
            missing.push_back(iso_week_label(d));
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) {
            list += (list.empty() ? "" : ", ") + m;
        }
        throw DataError(fmt::format("ICU panel has week gaps; missing weeks: {}", list));
    }
    for (Eigen::Index i = 0; i < beds.rows(); ++i) {
        for (Eigen::Index k = 0; k < 3; ++k) {
            const double z = beds(i, k);
            if (!(z >= 0.0) || z != std::floor(z)) {
                throw DataError(fmt::format("bed count {} for week {}, district {} is not a non-negative integer", z,
                                            weeks[static_cast<std::size_t>(i) / R], districts[static_cast<std::size_t>(i) % R]));
            }
        }
        for (Eigen::Index a = 0; a < incidence.cols(); ++a) {
            if (!(incidence(i, a) >= 0.0)) {
                throw DataError(fmt::format("incidence for week {}, district {} is negative or missing",
                                            weeks[static_cast<std::size_t>(i) / R], districts[static_cast<std::size_t>(i) % R]));
            }
        }
    }
    for (const auto& d : districts) {
        if (coords.find(d) == coords.end()) {
            throw DataError(fmt::format("district '{}' has no coordinates", d));
        }
    }
}

double round_half_even(double x)
{
    return std::nearbyint(x); // default rounding mode is to nearest, ties to even
}

std::vector<double> normalize(const std::vector<double>& x, NormalizationStats* stats)
{
    if (x.size() < 2) {
        throw NumericError("normalization needs at least two values");
    }
    const double n    = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss         = 0.0;
    for (double v : x) {
        ss += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
        throw NumericError("cannot normalize a constant covariate");
    }
    NormalizationStats s{mean, sd};
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [&](double v) {
        return s.apply(v);
    });
    if (stats != nullptr) {
        *stats = s;
    }
    return out;
}

std::string variant_name(IcuVariant v)
{
    switch (v) {
    case IcuVariant::full:
        return "full";
    case IcuVariant::no_ar:
        return "no_ar";
    case IcuVariant::no_infection:
        return "no_infection";
    case IcuVariant::linear:
        return "linear";
    case IcuVariant::intercept_only:
        return "intercept_only";
    }
    return "unknown";
}

std::string omitted_effects(IcuVariant v)
{
    switch (v) {
    case IcuVariant::full:
        return "none";
    case IcuVariant::no_ar:
        return "AR(1)";
    case IcuVariant::no_infection:
        return "infection";
    case IcuVariant::linear:
        return "spatial;random";
    case IcuVariant::intercept_only:
        return "all";
    }
    return "";
}

const std::vector<IcuVariant>& all_variants()
{
    static const std::vector<IcuVariant> v = {IcuVariant::full, IcuVariant::no_ar, IcuVariant::no_infection,
                                              IcuVariant::linear, IcuVariant::intercept_only};
    return v;
}

std::string incidence_column(const std::string& age)
{
    return fmt::format("log_inc({})", age);
}

namespace
{

constexpr double z975 = 1.959963984540054;

/// Raw (unnormalized) covariates for the response weeks, in row order week-major.
struct RawRows {
    std::map<std::string, std::vector<double>> numeric;
    std::vector<std::string> district;
    std::vector<std::size_t> week;
    Eigen::MatrixXd counts;
};

RawRows raw_rows(const IcuPanel& panel, std::size_t first, std::size_t last, double delta)
{
    if (first < 1 || last < first || last >= panel.num_weeks()) {
        throw ConfigError(fmt::format("invalid ICU response weeks [{}, {}] for a {}-week panel", first, last,
                                      panel.num_weeks()));
    }
    if (!(delta > 0.0)) {
        throw ConfigError("delta must be positive");
    }
    const std::size_t R = panel.num_districts();
    const std::size_t n = (last - first + 1) * R;
    RawRows out;
    out.counts.resize(static_cast<Eigen::Index>(n), 3);
    auto& share_free  = out.numeric["ar_free"];
    auto& share_covid = out.numeric["ar_covid"];
    auto& lon         = out.numeric["lon"];
    auto& lat         = out.numeric["lat"];
    std::vector<std::vector<double>*> inc;
    for (const auto& a : panel.age_groups) {
        inc.push_back(&out.numeric[incidence_column(a)]);
    }
    Eigen::Index i = 0;
    for (std::size_t w = first; w <= last; ++w) {
        for (std::size_t r = 0; r < R; ++r, ++i) {
            const auto prev    = panel.beds.row(panel.row(w - 1, r));
            const double total = prev.sum();
            if (!(total > 0.0)) {
                throw DataError(fmt::format("district '{}' has no beds in week {}", panel.districts[r],
                                            panel.weeks[w - 1]));
            }
            share_free.push_back(prev(0) / total);
            share_covid.push_back(prev(1) / total);
            for (std::size_t a = 0; a < inc.size(); ++a) {
                inc[a]->push_back(std::log(panel.incidence(panel.row(w - 1, r), static_cast<Eigen::Index>(a)) + delta));
            }
            const auto& xy = panel.coords.at(panel.districts[r]);
            lon.push_back(xy.first);
            lat.push_back(xy.second);
            out.district.push_back(panel.districts[r]);
            out.week.push_back(w);
            out.counts.row(i) = panel.beds.row(panel.row(w, r));
        }
    }
    return out;
}

bool normalized_column(const std::string& name)
{
    return name != "lon" && name != "lat";
}

} // namespace

IcuModelData build_icu_design(const IcuPanel& panel, std::size_t first, std::size_t last, const IcuConfig& config,
                              IcuVariant variant)
{
    auto raw = raw_rows(panel, first, last, config.delta);
    IcuModelData data;
    data.counts = std::move(raw.counts);
    data.groups = raw.district;
    data.weeks  = raw.week;
    for (auto& [name, values] : raw.numeric) {
        if (normalized_column(name)) {
            NormalizationStats s;
            try {
                values = normalize(values, &s);
            }
            catch (const NumericError&) {
                spdlog::warn("covariate {} is constant over the training weeks; dropped", name);
                data.dropped.push_back(name);
                continue;
            }
            data.stats[name] = s;
        }
        data.frame.add(name, std::move(values));
    }
    data.frame.add("district", raw.district);

    const bool use_ar  = variant == IcuVariant::full || variant == IcuVariant::no_infection ||
                         variant == IcuVariant::linear;
    const bool use_inc = variant == IcuVariant::full || variant == IcuVariant::no_ar || variant == IcuVariant::linear;
    const bool use_geo = variant == IcuVariant::full || variant == IcuVariant::no_ar ||
                         variant == IcuVariant::no_infection;

    DesignSpec spec;
    const auto add_linear = [&](const std::string& name) {
        if (data.stats.count(name) > 0) {
            spec.terms.push_back(LinearTerm{name});
            data.linear_covariates.push_back(name);
        }
    };
    if (use_ar) {
        add_linear("ar_free");
        add_linear("ar_covid");
    }
    if (use_inc) {
        for (const auto& a : panel.age_groups) {
            add_linear(incidence_column(a));
        }
    }
    data.spatial = use_geo && panel.num_districts() >= 4;
    if (data.spatial) {
        spec.terms.push_back(SpatialTerm{"lon", "lat", config.spatial_rank, true});
    }
    if (use_geo) {
        spec.terms.push_back(RandomInterceptTerm{"district", panel.districts});
    }
    data.design = Design::build(spec, data.frame);
    return data;
}

Frame icu_frame(const IcuPanel& panel, std::size_t week, const IcuConfig& config,
                const std::map<std::string, NormalizationStats>& stats)
{
    auto raw = raw_rows(panel, week, week, config.delta);
    Frame f;
    for (auto& [name, values] : raw.numeric) {
        if (normalized_column(name)) {
            const auto s = stats.find(name);
            if (s == stats.end()) {
                continue;
            }
            for (auto& v : values) {
                v = s->second.apply(v);
            }
        }
        f.add(name, std::move(values));
    }
    f.add("district", raw.district);
    return f;
}

MultinomialFit fit_icu_model(const IcuModelData& data, const LambdaSpec& lambda)
{
    MultinomialOptions opt;
    opt.reference  = 1;
    opt.categories = icu_categories();
    opt.groups     = data.groups;
    return fit_multinomial(data.design, data.counts, lambda, opt);
}

void write_icu_coefficients(const MultinomialFit& fit, const IcuModelData& data, const std::string& path)
{
    CsvWriter out(path, {"logit", "covariate", "estimate", "se_sandwich", "ci_lo", "ci_hi"});
    const auto se = fit.se_sandwich();
    std::vector<std::string> covariates = {"(Intercept)"};
    covariates.insert(covariates.end(), data.linear_covariates.begin(), data.linear_covariates.end());
    for (auto c : fit.logit_categories) {
        const auto& cat = fit.categories[static_cast<std::size_t>(c)];
        for (const auto& cov : covariates) {
            const auto j = fit.index_of(cat + ":" + cov);
            if (!j) {
                continue;
            }
            const double est = fit.beta(*j);
            out.row({cat + "_vs_" + fit.categories[static_cast<std::size_t>(fit.reference)], cov, format_number(est),
                     format_number(se(*j)), format_number(est - z975 * se(*j)), format_number(est + z975 * se(*j))});
        }
    }
}

void write_icu_surfaces(const MultinomialFit& fit, const IcuModelData& data, const IcuPanel& panel,
                        const std::string& path)
{
    CsvWriter out(path, {"logit", "lon", "lat", "estimate"});
    const auto* term = data.design.find_term("s(lon,lat)");
    if (term == nullptr) {
        return;
    }
    double lon_lo = 1e300, lon_hi = -1e300, lat_lo = 1e300, lat_hi = -1e300;
    for (const auto& d : panel.districts) {
        const auto& xy = panel.coords.at(d);
        lon_lo         = std::min(lon_lo, xy.first);
        lon_hi         = std::max(lon_hi, xy.first);
        lat_lo         = std::min(lat_lo, xy.second);
        lat_hi         = std::max(lat_hi, xy.second);
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
    const Eigen::MatrixXd B = data.design.term_matrix("s(lon,lat)", f);
    for (std::size_t l = 0; l < fit.logit_categories.size(); ++l) {
        const Eigen::VectorXd b  = fit.logit_beta(static_cast<Eigen::Index>(l)).segment(term->start, term->size);
        const Eigen::VectorXd s  = B * b;
        const auto& cat          = fit.categories[static_cast<std::size_t>(fit.logit_categories[l])];
        const std::string logit  = cat + "_vs_" + fit.categories[static_cast<std::size_t>(fit.reference)];
        for (std::size_t k = 0; k < lon.size(); ++k) {
            out.row({logit, format_number(lon[k]), format_number(lat[k]),
                     format_number(s(static_cast<Eigen::Index>(k)))});
        }
    }
}

std::vector<ForecastRecord> rolling_forecast(const IcuPanel& panel, const IcuConfig& config,
                                             const std::vector<IcuVariant>& variants)
{
    panel.validate();
    if (config.window < 1) {
        throw ConfigError("forecast window must be at least one week");
    }
    const auto window = static_cast<std::size_t>(config.window);
    if (panel.num_weeks() < window + 2) {
        throw ConfigError(fmt::format("a {}-week window needs at least {} weeks, the panel has {}", window,
                                      window + 2, panel.num_weeks()));
    }
    std::vector<std::size_t> targets;
    for (std::size_t w = window + 1; w < panel.num_weeks(); ++w) {
        targets.push_back(w);
    }
    std::vector<ForecastRecord> records(targets.size() * variants.size());
    parallel_for(records.size(), [&](std::size_t i) {
        auto& rec   = records[i];
        rec.week    = targets[i / variants.size()];
        rec.variant = variants[i % variants.size()];
        try {
            const auto data = build_icu_design(panel, rec.week - window, rec.week - 1, config, rec.variant);
            const auto fit  = fit_icu_model(data);
            if (fit.separation) {
                rec.message = "separation: " + fit.message;
                return;
            }
            if (!fit.converged) {
                rec.message = "not converged: " + fit.message;
                return;
            }
            const Frame f           = icu_frame(panel, rec.week, config, data.stats);
            const Eigen::MatrixXd X = data.design.model_matrix(f);
            rec.probs               = predict_multinomial(fit, X);
            Eigen::MatrixXd z(static_cast<Eigen::Index>(panel.num_districts()), 3);
            for (std::size_t r = 0; r < panel.num_districts(); ++r) {
                z.row(static_cast<Eigen::Index>(r)) = panel.beds.row(panel.row(rec.week, r));
            }
            rec.score = log_score(rec.probs, z).total();
        }
        catch (const std::exception& e) {
            rec.message = e.what();
        }
        if (!rec.score) {
            spdlog::warn("forecast for {} ({}) failed: {}", panel.weeks[rec.week], variant_name(rec.variant),
                         rec.message);
        }
    });
    return records;
}

PermutationResult permutation_test(const std::vector<double>& scores_full, const std::vector<double>& scores_alt,
                                   std::size_t n_perm, std::uint64_t seed)
{
    if (scores_full.size() != scores_alt.size()) {
        throw ConfigError("permutation test needs paired score vectors of equal length");
    }
    const std::size_t n = scores_full.size();
    if (n < 2) {
        throw ConfigError("permutation test needs at least two paired scores");
    }
    std::vector<double> d(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        d[i]  = scores_alt[i] - scores_full[i];
        scale = std::max(scale, std::abs(d[i]));
    }
    PermutationResult res;
    res.statistic = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    if (scale == 0.0) {
        res.degenerate = true;
        return res;
    }
    // flipped means that tie with the observed one up to rounding count as extreme
    const double threshold = std::abs(res.statistic) - 1e-12 * scale;
    const auto flipped_mean = [&](auto&& sign) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += sign(i) ? -d[i] : d[i];
        }
        return s / static_cast<double>(n);
    };
    if (n < 63 && (std::uint64_t{1} << n) <= n_perm + 1) {
        const std::uint64_t total = std::uint64_t{1} << n;
        std::uint64_t extreme     = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            if (std::abs(flipped_mean([&](std::size_t i) { return ((mask >> i) & 1U) != 0; })) >= threshold) {
                ++extreme;
            }
        }
        res.exhaustive   = true;
        res.permutations = total;
        res.p_value      = static_cast<double>(extreme) / static_cast<double>(total);
        return res;
    }
    Rng rng(seed);
    std::vector<std::uint64_t> bits((n + 63) / 64);
    std::uint64_t extreme = 1; // the observed arrangement
    for (std::size_t p = 0; p < n_perm; ++p) {
        for (auto& b : bits) {
            b = rng.next_u64();
        }
        if (std::abs(flipped_mean([&](std::size_t i) { return ((bits[i / 64] >> (i % 64)) & 1U) != 0; })) >=
            threshold) {
            ++extreme;
        }
    }
    res.permutations = n_perm + 1;
    res.p_value      = static_cast<double>(extreme) / static_cast<double>(n_perm + 1);
    return res;
}

std::vector<ScoreRow> score_table(const std::vector<ForecastRecord>& records, std::size_t n_perm,
                                  std::uint64_t seed)
{
    std::map<IcuVariant, std::map<std::size_t, double>> by_variant;
    for (const auto& r : records) {
        if (r.score) {
            by_variant[r.variant][r.week] = *r.score;
        }
    }
    std::vector<ScoreRow> rows;
    const Rng master(seed);
    const auto full = by_variant.find(IcuVariant::full);
    for (auto v : all_variants()) {
        const auto it = by_variant.find(v);
        if (it == by_variant.end()) {
            bool present = std::any_of(records.begin(), records.end(), [&](const ForecastRecord& r) {
                return r.variant == v;
            });
            if (present) {
                rows.push_back({v, std::numeric_limits<double>::quiet_NaN(), 0, std::nullopt});
            }
            continue;
        }
        ScoreRow row;
        row.variant = v;
        row.weeks   = it->second.size();
        double sum  = 0.0;
        for (const auto& [w, s] : it->second) {
            sum += s;
        }
        row.average_score = sum / static_cast<double>(row.weeks);
        if (v != IcuVariant::full && full != by_variant.end()) {
            std::vector<double> a, b;
            for (const auto& [w, s] : it->second) {
                const auto f = full->second.find(w);
                if (f != full->second.end()) {
                    a.push_back(f->second);
                    b.push_back(s);
                }
            }
            if (a.size() >= 2) {
                row.test = permutation_test(a, b, n_perm, master.split(variant_name(v)).next_u64());
            }
        }
        rows.push_back(row);
    }
    return rows;
}

void write_forecast_scores(const std::vector<ForecastRecord>& records, const IcuPanel& panel,
                           const std::string& path)
{
    CsvWriter out(path, {"week", "variant", "score"});
    for (const auto& r : records) {
        out.row({panel.weeks.at(r.week), variant_name(r.variant), r.score ? format_number(*r.score) : "NA"});
    }
}

void write_score_table(const std::vector<ScoreRow>& rows, const std::string& path)
{
    CsvWriter out(path, {"variant", "omitted_effects", "average_score", "weeks", "p_value"});
    for (const auto& r : rows) {
        out.row({variant_name(r.variant), omitted_effects(r.variant), format_number(r.average_score),
                 std::to_string(r.weeks), r.test ? format_number(r.test->p_value) : "NA"});
    }
}

IcuTruth default_icu_truth()
{
    IcuTruth t;
    t.incidence.resize(2, 4);
    t.incidence << -0.10, -0.20, -0.30, -0.10, //
        -0.10, -0.15, -0.25, -0.10;
    return t;
}

IcuSimulation simulate_icu(const IcuSimulationConfig& config, std::uint64_t seed)
{
    const std::size_t R = config.districts;
    const std::size_t W = config.weeks;
    const std::size_t A = config.age_groups.size();
    const auto& truth   = config.truth;
    if (R < 1 || W < 2 || A == 0) {
        throw ConfigError("ICU simulation needs >= 1 district, >= 2 weeks and >= 1 age group");
    }
    if (truth.incidence.rows() != 2 || truth.incidence.cols() != static_cast<Eigen::Index>(A)) {
        throw ConfigError(fmt::format("incidence effects must be 2 x {}", A));
    }
    const Rng master(seed);
    IcuSimulation sim;
    auto& panel      = sim.panel;
    panel.age_groups = config.age_groups;
    const Date first = parse_iso_week(config.first_week);
    for (std::size_t w = 0; w < W; ++w) {
        panel.weeks.push_back(iso_week_label(first + std::chrono::days{7 * static_cast<long>(w)}));
    }

    Rng geo = master.split("geography");
    std::vector<double> capacity(R), level(R), phase(R);
    sim.spatial.resize(static_cast<Eigen::Index>(R), 2);
    sim.random.resize(static_cast<Eigen::Index>(R), 2);
    for (std::size_t r = 0; r < R; ++r) {
        const auto name  = fmt::format("D{:03d}", r + 1);
        const double lon = geo.uniform(9.0, 13.5);
        const double lat = geo.uniform(47.5, 50.5);
        panel.districts.push_back(name);
        panel.coords[name] = {lon, lat};
        const auto i       = static_cast<Eigen::Index>(r);
        sim.spatial(i, 0)  = truth.spatial_amplitude * std::sin(1.4 * (lon - 9.0)) * std::cos(1.2 * (lat - 47.5));
        sim.spatial(i, 1)  = truth.spatial_amplitude * std::cos(1.1 * (lon - 9.0) + 0.5) * std::sin(1.5 * (lat - 47.5));
        sim.random(i, 0)   = geo.normal(0.0, truth.random_sd);
        sim.random(i, 1)   = geo.normal(0.0, truth.random_sd);
        capacity[r]        = std::round(geo.uniform(config.beds_lo, config.beds_hi));
        level[r]           = geo.normal(0.0, 0.5);
        phase[r]           = geo.uniform(-0.6, 0.6);
    }
    for (Eigen::Index j = 0; j < 2; ++j) {
        sim.spatial.col(j).array() -= sim.spatial.col(j).mean();
    }

    // incidence waves per 100k with age-specific levels
    panel.incidence.resize(static_cast<Eigen::Index>(W * R), static_cast<Eigen::Index>(A));
    Rng inc_rng = master.split("incidence");
    for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t r = 0; r < R; ++r) {
            const double wave = 1.2 * std::sin(2.0 * std::numbers::pi * static_cast<double>(w) / 26.0 + phase[r]);
            for (std::size_t a = 0; a < A; ++a) {
                const double age_level = 0.3 * static_cast<double>(a) - 0.4;
                const double li        = 4.0 + age_level + level[r] + wave + inc_rng.normal(0.0, 0.3);
                panel.incidence(panel.row(w, r), static_cast<Eigen::Index>(a)) = std::round(std::exp(li) * 10.0) / 10.0;
            }
        }
    }

    panel.beds.resize(static_cast<Eigen::Index>(W * R), 3);
    for (std::size_t w = 0; w < W; ++w) {
        Rng rng = master.split(static_cast<std::uint64_t>(w));
        for (std::size_t r = 0; r < R; ++r) {
            Eigen::Vector2d share(0.4, 0.2);
            const std::size_t lag = w == 0 ? 0 : w - 1;
            if (w > 0) {
                const auto prev = panel.beds.row(panel.row(lag, r));
                share << prev(0) / prev.sum(), prev(1) / prev.sum();
            }
            Eigen::VectorXd li(static_cast<Eigen::Index>(A));
            for (std::size_t a = 0; a < A; ++a) {
                li(static_cast<Eigen::Index>(a)) =
                    std::log(panel.incidence(panel.row(lag, r), static_cast<Eigen::Index>(a)) + config.delta);
            }
            const auto i           = static_cast<Eigen::Index>(r);
            const Eigen::Vector2d eta = truth.intercept + truth.ar * share + truth.incidence * li +
                                        sim.spatial.row(i).transpose() + sim.random.row(i).transpose();
            // categories (free, covid, noncovid) with covid as reference
            const double e0 = std::exp(eta(0)), e2 = std::exp(eta(1));
            const double s  = 1.0 + e0 + e2;
            const auto z    = rng.multinomial(static_cast<std::int64_t>(capacity[r]), {e0 / s, 1.0 / s, e2 / s});
            panel.beds.row(panel.row(w, r)) << static_cast<double>(z[0]), static_cast<double>(z[1]),
                static_cast<double>(z[2]);
        }
    }
    return sim;
}

} // namespace epigam
