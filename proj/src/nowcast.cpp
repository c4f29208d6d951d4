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
#include "epigam/nowcast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/csv.hpp"
#include "epigam/errors.hpp"
#include "epigam/parallel.hpp"
#include "epigam/rng.hpp"

namespace epigam
{

LineList impute_admission_dates(const LineList& list, ImputationReport* report)
{
    LineList out;
    ImputationReport rep;
    out.records.reserve(list.records.size());
    for (const auto& r : list.records) {
        if (r.admission) {
            out.records.push_back(r);
        }
        else if (r.infection_report) {
            auto copy      = r;
            copy.admission = r.infection_report;
            out.records.push_back(std::move(copy));
            ++rep.imputed;
        }
        else {
            ++rep.dropped;
        }
    }
    if (rep.dropped > 0) {
        spdlog::warn("{} records without admission and infection report date dropped", rep.dropped);
    }
    if (report != nullptr) {
        *report = rep;
    }
    return out;
}

AgeMap AgeMap::default_map()
{
    AgeMap m;
    m.coarse         = {"0-59", "60+"};
    m.fine_to_coarse = {{"0-14", "0-59"}, {"15-34", "0-59"}, {"35-59", "0-59"}, {"60-79", "60+"}, {"80+", "60+"}};
    return m;
}

const std::string& AgeMap::operator()(const std::string& label) const
{
    const auto it = fine_to_coarse.find(label);
    if (it != fine_to_coarse.end()) {
        return it->second;
    }
    const auto c = std::find(coarse.begin(), coarse.end(), label);
    if (c != coarse.end()) {
        return *c;
    }
    throw ConfigError(fmt::format("age group '{}' has no coarse age mapping", label));
}

double ReportingTriangle::cumulative(std::size_t g, int t, int d) const
{
    return N[g].row(t - 1).head(d).sum();
}

double ReportingTriangle::reported(std::size_t g, int t) const
{
    const int d = std::min(T - t, d_max);
    return d >= 1 ? cumulative(g, t, d) : 0.0;
}

ReportingTriangle build_triangle(const LineList& list, Date as_of, int d_max, const AgeMap& ages,
                                 std::optional<Date> start)
{
    if (d_max < 1) {
        throw ConfigError(fmt::format("d_max must be at least 1, got {}", d_max));
    }
    ReportingTriangle tri;
    tri.d_max  = d_max;
    tri.groups = ages.coarse;
    if (!start) {
        for (const auto& r : list.records) {
            if (r.admission && (!start || *r.admission < *start)) {
                start = r.admission;
            }
        }
        if (!start) {
            start = as_of;
        }
    }
    tri.start = *start;
    tri.T     = static_cast<int>(days_between(*start, as_of)) + 1;
    if (tri.T < 1) {
        throw ConfigError(fmt::format("as-of date {} precedes the start date {}", format_date(as_of), format_date(*start)));
    }
    tri.N.assign(tri.groups.size(), Eigen::MatrixXd::Zero(tri.T, d_max));
    for (const auto& r : list.records) {
        if (!r.admission) {
            throw DataError(fmt::format("record '{}' has no admission date; impute before building the triangle",
                                        r.case_id));
        }
        const int t = static_cast<int>(days_between(*start, *r.admission)) + 1;
        if (t < 1 || t > tri.T) {
            ++tri.outside_window;
            continue;
        }
        const long delay = days_between(*r.admission, r.registry_report);
        if (delay < 0) {
            ++tri.rejected_negative;
            continue;
        }
        const int d = std::max(1, static_cast<int>(std::min<long>(delay, d_max + 1)));
        if (d > d_max) {
            ++tri.excluded_beyond_dmax;
            continue;
        }
        if (!ReportingTriangle::observed(t, d, tri.T)) {
            ++tri.not_yet_observable;
            continue;
        }
        const auto& coarse = ages(r.age_group);
        const auto g       = static_cast<std::size_t>(std::find(tri.groups.begin(), tri.groups.end(), coarse) - tri.groups.begin());
        tri.N[g](t - 1, d - 1) += 1.0;
    }
    if (tri.rejected_negative > 0) {
        spdlog::warn("{} records with report date before admission rejected", tri.rejected_negative);
    }
    return tri;
}

namespace
{

const std::vector<std::string>& weekday_levels()
{
    static const std::vector<std::string> levels = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    return levels;
}

struct HazardFrame {
    std::vector<double> t, d, late, trials;
    std::vector<std::string> wd_event, wd_report;

    void push(const Date& start, int ti, int di, bool is_late)
    {
        t.push_back(ti);
        d.push_back(di);
        late.push_back(is_late ? 1.0 : 0.0);
        wd_event.push_back(weekday_name(weekday_index(start + std::chrono::days{ti - 1})));
        wd_report.push_back(weekday_name(weekday_index(start + std::chrono::days{ti - 1 + di})));
    }
    Frame frame() const
    {
        Frame f;
        f.add("t", t).add("d", d).add("late", late).add("wd_event", wd_event).add("wd_report", wd_report);
        if (!trials.empty()) {
            f.add("trials", trials);
        }
        return f;
    }
};

Eigen::MatrixXd clipped_root(const Eigen::MatrixXd& V)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (V + V.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff())) {
        spdlog::warn("coefficient covariance is not PSD (min eigenvalue {:.3g}); clipping to zero", ev.minCoeff());
    }
    ev = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

} // namespace

Eigen::MatrixXd DelayModelFit::hazard_rows(int t, std::size_t g) const
{
    HazardFrame hf;
    for (int k = 2; k <= d_max; ++k) {
        hf.push(start, t, k, has_interaction && groups[g] == interaction_group);
    }
    return design.model_matrix(hf.frame());
}

DelayModelFit fit_delay_model(const ReportingTriangle& tri, const DelayModelOptions& options)
{
    if (tri.d_max < 2) {
        throw ConfigError("the delay model needs d_max >= 2");
    }
    HazardFrame hf;
    std::vector<double> successes;
    bool late_rows = false;
    for (std::size_t g = 0; g < tri.groups.size(); ++g) {
        const bool is_late = tri.groups[g] == options.interaction_group;
        for (int t = 1; t <= tri.T; ++t) {
            double c = tri.N[g](t - 1, 0);
            for (int d = 2; d <= tri.d_max && ReportingTriangle::observed(t, d, tri.T); ++d) {
                c += tri.N[g](t - 1, d - 1);
                if (c <= 0.0) {
                    continue;
                }
                hf.push(tri.start, t, d, is_late);
                hf.trials.push_back(c);
                successes.push_back(tri.N[g](t - 1, d - 1));
                late_rows = late_rows || is_late;
            }
        }
    }
    if (successes.empty()) {
        throw DataError("empty delay model: no observable cells with d >= 2 and positive cumulative count");
    }
    DelayModelFit out;
    out.start             = tri.start;
    out.T                 = tri.T;
    out.d_max             = tri.d_max;
    out.groups            = tri.groups;
    out.interaction_group = options.interaction_group;
    out.has_interaction   = late_rows;

    DesignSpec spec;
    spec.trials = "trials";
    spec.terms.push_back(PiecewiseLinearTerm{"t", options.knot_spacing, tri.T});
    const Interval dom{2.0, static_cast<double>(tri.d_max)};
    spec.terms.push_back(SmoothTerm{"d", options.num_basis, 3, 2, dom, "", true});
    if (late_rows) {
        spec.terms.push_back(SmoothTerm{"d", options.num_basis, 3, 2, dom, "late", false});
    }
    spec.terms.push_back(FactorTerm{"wd_event", weekday_levels(), true});
    spec.terms.push_back(FactorTerm{"wd_report", weekday_levels(), true});
    out.design = Design::build(spec, hf.frame());
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(successes.data(), static_cast<Eigen::Index>(successes.size()));
    out.fit = fit_pirls(out.design, y, Family::binomial(), options.lambda);
    if (!out.fit.converged) {
        spdlog::warn("delay model did not converge: {}", out.fit.message);
    }
    return out;
}

Eigen::VectorXd delay_cdf_from_hazards(const Eigen::VectorXd& p)
{
    const Eigen::Index d_max = p.size() - 1;
    Eigen::VectorXd F        = Eigen::VectorXd::Zero(d_max + 1);
    if (d_max < 1) {
        return F;
    }
    F(d_max) = 1.0;
    for (Eigen::Index d = d_max - 1; d >= 1; --d) {
        F(d) = F(d + 1) * (1.0 - p(d + 1));
    }
    return F;
}

Eigen::VectorXd delay_pmf_from_hazards(const Eigen::VectorXd& p)
{
    const Eigen::VectorXd F = delay_cdf_from_hazards(p);
    Eigen::VectorXd pmf     = Eigen::VectorXd::Zero(p.size());
    for (Eigen::Index d = 1; d < p.size(); ++d) {
        pmf(d) = (d == 1 ? 1.0 : p(d)) * F(d);
    }
    return pmf;
}

Eigen::VectorXd delay_hazards(const DelayModelFit& fit, int t, std::size_t g, const Eigen::VectorXd* beta)
{
    if (t < 1 || t > fit.T) {
        throw DomainError(fmt::format("day {} outside 1..{}", t, fit.T));
    }
    const Eigen::MatrixXd X = fit.hazard_rows(t, g);
    const Eigen::VectorXd eta = X * (beta != nullptr ? *beta : fit.fit.beta);
    Eigen::VectorXd p(fit.d_max + 1);
    p(0) = 0.0;
    p(1) = 1.0;
    for (Eigen::Index k = 0; k < eta.size(); ++k) {
        p(k + 2) = 1.0 / (1.0 + std::exp(-eta(k)));
    }
    return p;
}

double delay_cdf(const DelayModelFit& fit, int t, std::size_t g, int d)
{
    if (d < 1 || d > fit.d_max) {
        throw DomainError(fmt::format("delay {} outside 1..{}", d, fit.d_max));
    }
    if (d == fit.d_max) {
        return 1.0;
    }
    return delay_cdf_from_hazards(delay_hazards(fit, t, g))(d);
}

const NowcastCell& NowcastResult::cell(std::size_t g, int t) const
{
    return cells[g * static_cast<std::size_t>(T - 1) + static_cast<std::size_t>(t - 1)];
}

namespace
{

/// Design rows of the hazards for every (t, g) whose F can be below one.
struct HazardCache {
    int first = 1;
    std::vector<std::vector<Eigen::MatrixXd>> rows; ///< [g][t - first]

    explicit HazardCache(const DelayModelFit& fit)
        : first(std::max(1, fit.T - fit.d_max + 1))
    {
        rows.resize(fit.groups.size());
        for (std::size_t g = 0; g < fit.groups.size(); ++g) {
            for (int t = first; t <= fit.T - 1; ++t) {
                rows[g].push_back(fit.hazard_rows(t, g));
            }
        }
    }
};

/// F_{t,g}(T - t) for t = 1..T-1 at the given coefficients.
Eigen::MatrixXd cdf_table(const DelayModelFit& fit, const HazardCache& cache, const Eigen::VectorXd& beta)
{
    const auto G = static_cast<Eigen::Index>(fit.groups.size());
    Eigen::MatrixXd F = Eigen::MatrixXd::Ones(std::max(fit.T - 1, 0), G);
    for (Eigen::Index g = 0; g < G; ++g) {
        for (int t = cache.first; t <= fit.T - 1; ++t) {
            const Eigen::VectorXd eta = cache.rows[static_cast<std::size_t>(g)][static_cast<std::size_t>(t - cache.first)] * beta;
            // eta(k) is the logit of p(k + 2); F(T - t) = prod_{k = T-t+1}^{d_max} (1 - p(k))
            double f = 1.0;
            for (int k = fit.T - t + 1; k <= fit.d_max; ++k) {
                f /= 1.0 + std::exp(eta(k - 2));
            }
            F(t - 1, g) = f;
        }
    }
    return F;
}

} // namespace

NowcastResult nowcast_point(const ReportingTriangle& tri, const DelayModelFit& fit)
{
    if (tri.T != fit.T || tri.groups != fit.groups || tri.d_max != fit.d_max) {
        throw ConfigError("delay model and triangle disagree on T, d_max or groups");
    }
    if (!fit.fit.converged) {
        spdlog::warn("nowcasting from a delay model that did not converge");
    }
    NowcastResult res;
    res.groups = tri.groups;
    res.groups.push_back("all");
    res.T     = tri.T;
    res.start = tri.start;
    const Eigen::MatrixXd F = cdf_table(fit, HazardCache(fit), fit.fit.beta);
    const std::size_t G     = tri.groups.size();
    std::vector<NowcastCell> total(static_cast<std::size_t>(std::max(tri.T - 1, 0)));
    for (std::size_t g = 0; g < G; ++g) {
        for (int t = 1; t <= tri.T - 1; ++t) {
            NowcastCell c;
            c.t        = t;
            c.group    = g;
            c.reported = tri.reported(g, t);
            c.F_hat    = F(t - 1, static_cast<Eigen::Index>(g));
            c.unstable = c.F_hat < 0.01;
            c.nowcast  = c.F_hat > 0.0 ? c.reported / c.F_hat : std::numeric_limits<double>::infinity();
            c.ci_lo = c.ci_hi = c.nowcast;
            res.cells.push_back(c);
            auto& tot = total[static_cast<std::size_t>(t - 1)];
            tot.t     = t;
            tot.group = G;
            tot.reported += c.reported;
            tot.nowcast += c.nowcast;
            tot.unstable = tot.unstable || c.unstable;
        }
    }
    for (auto& tot : total) {
        tot.F_hat = tot.nowcast > 0.0 ? tot.reported / tot.nowcast : 1.0;
        tot.ci_lo = tot.ci_hi = tot.nowcast;
        res.cells.push_back(tot);
    }
    return res;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double h  = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo   = static_cast<std::size_t>(std::floor(h));
    const auto hi   = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void bootstrap_ci(NowcastResult& result, const ReportingTriangle& tri, const DelayModelFit& fit, int B,
                  std::uint64_t seed, BootstrapMode mode)
{
    if (B < 1) {
        throw ConfigError(fmt::format("bootstrap needs at least one replicate, got {}", B));
    }
    if (B < 200) {
        spdlog::warn("{} bootstrap replicates are few for 95% intervals", B);
    }
    const Eigen::MatrixXd L = clipped_root(fit.fit.cov_model);
    const std::size_t G     = tri.groups.size();
    const int days          = tri.T - 1;
    const auto cells        = static_cast<Eigen::Index>((G + 1) * static_cast<std::size_t>(std::max(days, 0)));
    result.draws            = Eigen::MatrixXd::Zero(cells, B);
    const HazardCache cache(fit);
    const Rng master(seed);
    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        Rng rng = master.split(b);
        Eigen::VectorXd z(L.cols());
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            z(j) = rng.normal();
        }
        const Eigen::VectorXd beta = fit.fit.beta + L * z;
        const Eigen::MatrixXd F    = cdf_table(fit, cache, beta);
        const auto col             = static_cast<Eigen::Index>(b);
        for (std::size_t g = 0; g < G; ++g) {
            for (int t = 1; t <= days; ++t) {
                const double c = tri.reported(g, t);
                const double f = F(t - 1, static_cast<Eigen::Index>(g));
                double h       = c / f;
                if (mode == BootstrapMode::predictive) {
                    // unreported count given C reported with probability F
                    h = c;
                    if (c > 0.0 && f < 1.0) {
                        h += static_cast<double>(rng.negative_binomial(c * (1.0 - f) / f, c));
                    }
                }
                const auto row = static_cast<Eigen::Index>(g * static_cast<std::size_t>(days) + static_cast<std::size_t>(t - 1));
                result.draws(row, col) = h;
                result.draws(static_cast<Eigen::Index>(G * static_cast<std::size_t>(days)) + t - 1, col) += h;
            }
        }
    });
    result.replicates = B;
    for (Eigen::Index i = 0; i < cells; ++i) {
        std::vector<double> v(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            v[static_cast<std::size_t>(b)] = result.draws(i, b);
        }
        auto& c = result.cells[static_cast<std::size_t>(i)];
        c.ci_lo = std::min(quantile(v, 0.025), c.nowcast);
        c.ci_hi = std::max(quantile(v, 0.975), c.nowcast);
    }
}

void write_nowcast_csv(const NowcastResult& result, const std::string& path)
{
    CsvWriter out(path, {"date", "age_group", "reported", "F_hat", "nowcast", "ci_lo", "ci_hi", "rolling7_reported",
                         "rolling7_nowcast", "rolling7_ci_lo", "rolling7_ci_hi", "unstable"});
    const int days = result.T - 1;
    const std::string na = "NA";
    for (std::size_t g = 0; g < result.groups.size(); ++g) {
        for (int t = 1; t <= days; ++t) {
            const auto& c = result.cell(g, t);
            std::vector<std::string> row = {format_date(result.start + std::chrono::days{t - 1}),
                                            result.groups[g],
                                            format_number(c.reported),
                                            format_number(c.F_hat),
                                            format_number(c.nowcast),
                                            format_number(c.ci_lo),
                                            format_number(c.ci_hi)};
            if (t >= 7) {
                double rep = 0.0, now = 0.0;
                for (int s = t - 6; s <= t; ++s) {
                    rep += result.cell(g, s).reported;
                    now += result.cell(g, s).nowcast;
                }
                double lo = now, hi = now;
                if (result.replicates > 0) {
                    std::vector<double> sums(static_cast<std::size_t>(result.replicates), 0.0);
                    for (int s = t - 6; s <= t; ++s) {
                        const auto r = static_cast<Eigen::Index>(g * static_cast<std::size_t>(days) + static_cast<std::size_t>(s - 1));
                        for (int b = 0; b < result.replicates; ++b) {
                            sums[static_cast<std::size_t>(b)] += result.draws(r, b);
                        }
                    }
                    lo = std::min(quantile(sums, 0.025), now);
                    hi = std::max(quantile(sums, 0.975), now);
                }
                row.insert(row.end(), {format_number(rep), format_number(now), format_number(lo), format_number(hi)});
            }
            else {
                row.insert(row.end(), {na, na, na, na});
            }
            row.push_back(c.unstable ? "true" : "false");
            out.row(row);
        }
    }
}

nlohmann::json delay_model_json(const DelayModelFit& fit)
{
    nlohmann::json j;
    j["start"]             = format_date(fit.start);
    j["as_of"]             = format_date(fit.start + std::chrono::days{fit.T - 1});
    j["T"]                 = fit.T;
    j["d_max"]             = fit.d_max;
    j["groups"]            = fit.groups;
    j["interaction_group"] = fit.interaction_group;
    // F_{t,g}(T - t); days at least d_max before the as-of date have F = 1
    const Eigen::MatrixXd F = cdf_table(fit, HazardCache(fit), fit.fit.beta);
    auto& tables            = j["cdf"];
    tables                  = nlohmann::json::object();
    for (std::size_t g = 0; g < fit.groups.size(); ++g) {
        auto& tab = tables[fit.groups[g]];
        tab       = nlohmann::json::array();
        for (int t = std::max(1, fit.T - fit.d_max + 1); t <= fit.T - 1; ++t) {
            tab.push_back({{"date", format_date(fit.start + std::chrono::days{t - 1})},
                           {"F", F(t - 1, static_cast<Eigen::Index>(g))}});
        }
    }
    j["fit"] = to_json(fit.fit);
    return j;
}

DelaySimulation simulate_line_list(const DelaySimulationConfig& config, std::uint64_t seed)
{
    const std::size_t G = config.groups.size();
    if (G == 0 || config.base_level.size() != G || config.gamma_shape.size() != G || config.gamma_scale.size() != G) {
        throw ConfigError("delay simulation needs one level, shape and scale per group");
    }
    if (config.days < 2 || config.d_max < 2) {
        throw ConfigError("delay simulation needs at least 2 days and d_max >= 2");
    }
    DelaySimulation sim;
    sim.pmf.resize(config.d_max, static_cast<Eigen::Index>(G));
    for (std::size_t g = 0; g < G; ++g) {
        double total = 0.0;
        for (int d = 1; d <= config.d_max; ++d) {
            const double v = std::pow(static_cast<double>(d), config.gamma_shape[g] - 1.0) *
                             std::exp(-static_cast<double>(d) / config.gamma_scale[g]);
            sim.pmf(d - 1, static_cast<Eigen::Index>(g)) = v;
            total += v;
        }
        sim.pmf.col(static_cast<Eigen::Index>(g)) /= total;
    }
    sim.truth = Eigen::MatrixXd::Zero(config.days, static_cast<Eigen::Index>(G));
    sim.N.assign(G, Eigen::MatrixXd::Zero(config.days, config.d_max));
    const Rng master(seed);
    std::size_t id = 0;
    static const std::vector<std::string> genders = {"female", "male"};
    for (int t = 1; t <= config.days; ++t) {
        Rng rng = master.split(static_cast<std::uint64_t>(t));
        const Date day = config.start + std::chrono::days{t - 1};
        for (std::size_t g = 0; g < G; ++g) {
            const double mean = config.base_level[g] * std::exp(config.growth * (t - 1));
            const auto n      = rng.poisson(mean);
            sim.truth(t - 1, static_cast<Eigen::Index>(g)) = static_cast<double>(n);
            const std::vector<double> probs(sim.pmf.col(static_cast<Eigen::Index>(g)).data(),
                                            sim.pmf.col(static_cast<Eigen::Index>(g)).data() + config.d_max);
            const auto by_delay = rng.multinomial(n, probs);
            for (int d = 1; d <= config.d_max; ++d) {
                const auto count = by_delay[static_cast<std::size_t>(d - 1)];
                if (t + d > config.days) {
                    continue; // not yet reported at the as-of date
                }
                sim.N[g](t - 1, d - 1) = static_cast<double>(count);
                for (std::int64_t c = 0; c < count; ++c) {
                    HospRecord r;
                    r.case_id         = fmt::format("c{:07d}", ++id);
                    r.registry_report = day + std::chrono::days{d};
                    r.age_group       = config.groups[g];
                    r.gender          = genders[static_cast<std::size_t>(rng.uniform() < 0.5)];
                    r.district        = "D001";
                    if (rng.uniform() < config.missing_admission) {
                        r.infection_report = day;
                    }
                    else {
                        r.admission = day;
                    }
                    sim.list.records.push_back(std::move(r));
                }
            }
        }
    }
    return sim;
}

} // namespace epigam
