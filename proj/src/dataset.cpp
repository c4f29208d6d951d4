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
#include "epigam/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <set>

#include <fmt/format.h>

#include "epigam/csv.hpp"
#include "epigam/dates.hpp"

namespace epigam
{

void ValidationReport::add(std::string file, std::size_t row, std::string column, std::string reason)
{
    issues.push_back({std::move(file), row, std::move(column), std::move(reason)});
}

std::string ValidationReport::summary(std::size_t max_lines) const
{
    std::string out;
    for (std::size_t i = 0; i < issues.size() && i < max_lines; ++i) {
        const auto& is = issues[i];
        out += fmt::format("{}{}:{}: {}{}", i == 0 ? "" : "\n", is.file, is.row, is.column.empty() ? "" : is.column + ": ",
                           is.reason);
    }
    if (issues.size() > max_lines) {
        out += fmt::format("\n... and {} more", issues.size() - max_lines);
    }
    return out;
}

nlohmann::json ValidationReport::to_json() const
{
    auto arr = nlohmann::json::array();
    for (const auto& is : issues) {
        arr.push_back({{"file", is.file}, {"row", is.row}, {"column", is.column}, {"reason", is.reason}});
    }
    return arr;
}

ValidationError::ValidationError(ValidationReport report)
    : DataError(fmt::format("input validation failed with {} issue(s):\n{}", report.issues.size(), report.summary()))
    , m_report(std::move(report))
{
}

std::string schema_name(Schema s)
{
    switch (s) {
    case Schema::infection:
        return "infection";
    case Schema::nowcast:
        return "nowcast";
    case Schema::hosp:
        return "hosp";
    case Schema::icu:
        return "icu";
    }
    return "unknown";
}

Schema parse_schema(const std::string& name)
{
    for (auto s : {Schema::infection, Schema::nowcast, Schema::hosp, Schema::icu}) {
        if (schema_name(s) == name) {
            return s;
        }
    }
    throw ConfigError(fmt::format("unknown schema '{}' (expected infection, nowcast, hosp or icu)", name));
}

std::vector<std::string> schema_files(Schema s)
{
    switch (s) {
    case Schema::infection:
        return {files::infection_panel, files::population};
    case Schema::nowcast:
        return {files::line_list};
    case Schema::hosp:
        return {files::hosp_panel, files::cell_population, files::coords};
    case Schema::icu:
        return {files::icu_panel, files::incidence, files::coords};
    }
    return {};
}

namespace
{

/// Row accessors that record problems instead of throwing.
class Reader
{
public:
    Reader(const std::string& dir, const std::string& name, const std::vector<std::string>& required,
           ValidationReport& report)
        : m_name(name)
        , m_report(report)
    {
        const auto path = (std::filesystem::path(dir) / name).string();
        if (!std::filesystem::exists(path)) {
            report.add(name, 0, "", "file not found");
            return;
        }
        try {
            m_table = read_csv(path);
        }
        catch (const DataError& e) {
            report.add(name, 0, "", e.what());
            return;
        }
        bool complete = true;
        for (const auto& c : required) {
            if (!m_table.has_column(c)) {
                report.add(name, 1, c, "required column missing");
                complete = false;
            }
            else {
                m_cols[c] = m_table.column(c);
            }
        }
        m_ok = complete;
        m_path = path;
    }

    bool ok() const
    {
        return m_ok;
    }
    const std::string& path() const
    {
        return m_path;
    }
    std::size_t size() const
    {
        return m_table.rows.size();
    }
    std::size_t line(std::size_t i) const
    {
        return m_table.lines[i];
    }
    const std::string& raw(std::size_t i, const std::string& col) const
    {
        return m_table.rows[i][m_cols.at(col)];
    }
    void issue(std::size_t i, const std::string& col, std::string reason)
    {
        m_report.add(m_name, line(i), col, std::move(reason));
    }

    std::optional<std::string> text(std::size_t i, const std::string& col)
    {
        const auto& v = raw(i, col);
        if (v.empty()) {
            issue(i, col, "empty value");
            return std::nullopt;
        }
        return v;
    }

    std::optional<double> number(std::size_t i, const std::string& col, bool integer = false)
    {
        const auto& v = raw(i, col);
        double x      = 0.0;
        const auto r  = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) {
            issue(i, col, fmt::format("'{}' is not a number", v));
            return std::nullopt;
        }
        if (x < 0.0) {
            issue(i, col, fmt::format("negative value {}", v));
            return std::nullopt;
        }
        if (integer && x != std::floor(x)) {
            issue(i, col, fmt::format("'{}' is not an integer count", v));
            return std::nullopt;
        }
        return x;
    }

    std::optional<double> coordinate(std::size_t i, const std::string& col)
    {
        const auto& v = raw(i, col);
        double x      = 0.0;
        const auto r  = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) {
            issue(i, col, fmt::format("'{}' is not a number", v));
            return std::nullopt;
        }
        return x;
    }

    /// nullopt with an issue on a bad date; `empty` is set for an allowed empty field.
    std::optional<Date> date(std::size_t i, const std::string& col, bool allow_empty, bool* empty = nullptr)
    {
        const auto& v = raw(i, col);
        if (v.empty() && allow_empty) {
            if (empty != nullptr) {
                *empty = true;
            }
            return std::nullopt;
        }
        try {
            return parse_date(v);
        }
        catch (const DataError&) {
            issue(i, col, fmt::format("'{}' is not an ISO 8601 date", v));
            return std::nullopt;
        }
    }

    std::optional<Date> week(std::size_t i, const std::string& col)
    {
        const auto& v = raw(i, col);
        try {
            return parse_iso_week(v);
        }
        catch (const DataError&) {
            issue(i, col, fmt::format("'{}' is not an ISO week label", v));
            return std::nullopt;
        }
    }

private:
    std::string m_name;
    std::string m_path;
    ValidationReport& m_report;
    CsvTable m_table;
    std::map<std::string, std::size_t> m_cols;
    bool m_ok = false;
};

/// Consecutive Mondays from the first to the last week seen.
std::vector<Date> week_range(const std::set<Date>& seen)
{
    std::vector<Date> out;
    if (seen.empty()) {
        return out;
    }
    for (Date d = *seen.begin(); d <= *seen.rbegin(); d += std::chrono::days{7}) {
        out.push_back(d);
    }
    return out;
}

void load_infection(const std::string& dir, DatasetBundle& bundle, ValidationReport& report)
{
    Reader pop(dir, files::population, {"district", "age_group", "population"}, report);
    Reader panel(dir, files::infection_panel, {"week", "district", "age_group", "count"}, report);
    if (!pop.ok() || !panel.ok()) {
        return;
    }
    bundle.paths = {panel.path(), pop.path()};

    std::vector<std::string> districts, ages;
    std::map<std::pair<std::string, std::string>, double> pop_values;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        auto d = pop.text(i, "district");
        auto a = pop.text(i, "age_group");
        auto p = pop.number(i, "population");
        if (!d || !a || !p) {
            continue;
        }
        if (!(*p > 0.0)) {
            pop.issue(i, "population", "population must be positive");
            continue;
        }
        if (!pop_values.emplace(std::make_pair(*d, *a), *p).second) {
            pop.issue(i, "district", fmt::format("duplicate (district, age_group) key ({}, {})", *d, *a));
            continue;
        }
        if (std::find(districts.begin(), districts.end(), *d) == districts.end()) {
            districts.push_back(*d);
        }
        if (std::find(ages.begin(), ages.end(), *a) == ages.end()) {
            ages.push_back(*a);
        }
    }
    for (const auto& d : districts) {
        for (const auto& a : ages) {
            if (pop_values.count({d, a}) == 0) {
                report.add(files::population, 0, "population", fmt::format("missing population for ({}, {})", d, a));
            }
        }
    }

    std::map<std::tuple<Date, std::string, std::string>, double> counts;
    std::set<Date> weeks;
    std::set<std::string> unknown_districts, unknown_ages;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        auto w = panel.week(i, "week");
        auto d = panel.text(i, "district");
        auto a = panel.text(i, "age_group");
        auto c = panel.number(i, "count", true);
        if (!w || !d || !a || !c) {
            continue;
        }
        if (std::find(districts.begin(), districts.end(), *d) == districts.end()) {
            if (unknown_districts.insert(*d).second) {
                panel.issue(i, "district", fmt::format("district '{}' not in {}", *d, files::population));
            }
            continue;
        }
        if (std::find(ages.begin(), ages.end(), *a) == ages.end()) {
            if (unknown_ages.insert(*a).second) {
                panel.issue(i, "age_group", fmt::format("age group '{}' not in {}", *a, files::population));
            }
            continue;
        }
        if (!counts.emplace(std::make_tuple(*w, *d, *a), *c).second) {
            panel.issue(i, "week", fmt::format("duplicate (week, district, age_group) key ({}, {}, {})",
                                               iso_week_label(*w), *d, *a));
            continue;
        }
        weeks.insert(*w);
    }
    if (!report.ok()) {
        return;
    }
    const auto range = week_range(weeks);
    if (range.size() < 2) {
        report.add(files::infection_panel, 0, "week", "the panel needs at least two weeks");
        return;
    }
    std::vector<std::string> labels;
    for (auto w : range) {
        labels.push_back(iso_week_label(w));
    }
    WeeklyPanel out(labels, districts, ages);
    for (std::size_t w = 0; w < range.size(); ++w) {
        for (std::size_t r = 0; r < districts.size(); ++r) {
            for (std::size_t a = 0; a < ages.size(); ++a) {
                const auto it = counts.find({range[w], districts[r], ages[a]});
                if (it == counts.end()) {
                    ++bundle.zero_filled;
                }
                else {
                    out.at(w, r, a) = it->second;
                }
            }
        }
    }
    PopulationTable table;
    table.districts = districts;
    table.age_groups = ages;
    table.pop.resize(static_cast<Eigen::Index>(districts.size()), static_cast<Eigen::Index>(ages.size()));
    for (std::size_t r = 0; r < districts.size(); ++r) {
        for (std::size_t a = 0; a < ages.size(); ++a) {
            table.pop(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) = pop_values.at({districts[r], ages[a]});
        }
    }
    bundle.infection_panel = std::move(out);
    bundle.population      = std::move(table);
}

void load_line_list(const std::string& dir, DatasetBundle& bundle, ValidationReport& report)
{
    Reader in(dir, files::line_list,
              {"case_id", "admission_date", "infection_report_date", "registry_report_date", "age_group", "gender",
               "district"},
              report);
    if (!in.ok()) {
        return;
    }
    bundle.paths = {in.path()};
    LineList list;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < in.size(); ++i) {
        auto id = in.text(i, "case_id");
        bool no_admission = false, no_infection = false;
        auto adm = in.date(i, "admission_date", true, &no_admission);
        auto inf = in.date(i, "infection_report_date", true, &no_infection);
        auto reg = in.date(i, "registry_report_date", false);
        auto age = in.text(i, "age_group");
        if (!id || (!adm && !no_admission) || (!inf && !no_infection) || !reg || !age) {
            continue;
        }
        if (!ids.insert(*id).second) {
            in.issue(i, "case_id", fmt::format("duplicate case_id '{}'", *id));
            continue;
        }
        HospRecord r;
        r.case_id          = *id;
        r.admission        = adm;
        r.infection_report = inf;
        r.registry_report  = *reg;
        r.age_group        = *age;
        r.gender           = in.raw(i, "gender");
        r.district         = in.raw(i, "district");
        list.records.push_back(std::move(r));
    }
    bundle.line_list = std::move(list);
}

void load_coords(const std::string& dir, DatasetBundle& bundle, ValidationReport& report)
{
    Reader in(dir, files::coords, {"district", "lon", "lat"}, report);
    if (!in.ok()) {
        return;
    }
    bundle.paths.push_back(in.path());
    for (std::size_t i = 0; i < in.size(); ++i) {
        auto d   = in.text(i, "district");
        auto lon = in.coordinate(i, "lon");
        auto lat = in.coordinate(i, "lat");
        if (!d || !lon || !lat) {
            continue;
        }
        if (!bundle.coords.emplace(*d, std::make_pair(*lon, *lat)).second) {
            in.issue(i, "district", fmt::format("duplicate district '{}'", *d));
        }
    }
}

void load_hosp(const std::string& dir, DatasetBundle& bundle, ValidationReport& report)
{
    Reader panel(dir, files::hosp_panel, {"date", "district", "age_group", "gender", "reported_count"}, report);
    Reader pop(dir, files::cell_population, {"district", "age_group", "gender", "population"}, report);
    if (panel.ok() && pop.ok()) {
        bundle.paths = {panel.path(), pop.path()};
    }
    load_coords(dir, bundle, report);
    if (!panel.ok() || !pop.ok()) {
        return;
    }
    for (std::size_t i = 0; i < pop.size(); ++i) {
        auto d = pop.text(i, "district");
        auto a = pop.text(i, "age_group");
        auto g = pop.text(i, "gender");
        auto p = pop.number(i, "population");
        if (!d || !a || !g || !p) {
            continue;
        }
        if (!bundle.cell_population.emplace(PopulationKey{*d, *a, *g}, *p).second) {
            pop.issue(i, "district", fmt::format("duplicate (district, age_group, gender) key ({}, {}, {})", *d, *a, *g));
        }
    }
    HospPanel out;
    std::set<std::tuple<Date, std::string, std::string, std::string>> keys;
    std::set<std::string> unknown;
    std::optional<Date> last;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        auto date = panel.date(i, "date", false);
        auto d    = panel.text(i, "district");
        auto a    = panel.text(i, "age_group");
        auto g    = panel.text(i, "gender");
        auto c    = panel.number(i, "reported_count", true);
        if (!date || !d || !a || !g || !c) {
            continue;
        }
        if (bundle.coords.find(*d) == bundle.coords.end() && unknown.insert(*d).second) {
            panel.issue(i, "district", fmt::format("district '{}' not in {}", *d, files::coords));
        }
        if (bundle.cell_population.find({*d, *a, *g}) == bundle.cell_population.end()) {
            panel.issue(i, "district", fmt::format("no population for ({}, {}, {}) in {}", *d, *a, *g,
                                                   files::cell_population));
            continue;
        }
        if (!keys.emplace(*date, *d, *a, *g).second) {
            panel.issue(i, "date", fmt::format("duplicate (date, district, age_group, gender) key ({}, {}, {}, {})",
                                               format_date(*date), *d, *a, *g));
            continue;
        }
        last = last ? std::max(*last, *date) : *date;
        out.cells.push_back({*date, *d, *a, *g, *c});
    }
    if (!last) {
        report.add(files::hosp_panel, 0, "", "no rows");
        return;
    }
    out.as_of         = *last + std::chrono::days{1};
    bundle.hosp_panel = std::move(out);
}

void load_icu(const std::string& dir, DatasetBundle& bundle, ValidationReport& report)
{
    Reader panel(dir, files::icu_panel, {"week", "district", "beds_free", "beds_covid", "beds_noncovid"}, report);
    Reader inc(dir, files::incidence, {"week", "district", "age_group", "incidence_per_100k"}, report);
    if (panel.ok() && inc.ok()) {
        bundle.paths = {panel.path(), inc.path()};
    }
    load_coords(dir, bundle, report);
    if (!panel.ok() || !inc.ok()) {
        return;
    }
    static const char* bed_cols[] = {"beds_free", "beds_covid", "beds_noncovid"};
    std::map<std::pair<Date, std::string>, Eigen::Vector3d> beds;
    std::set<Date> weeks;
    std::set<std::string> districts, unknown;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        auto w = panel.week(i, "week");
        auto d = panel.text(i, "district");
        Eigen::Vector3d z;
        bool good = w && d;
        for (int k = 0; k < 3; ++k) {
            auto v = panel.number(i, bed_cols[k]);
            good   = good && v.has_value();
            z(k)   = v ? round_half_even(*v) : 0.0;
        }
        if (!good) {
            continue;
        }
        if (bundle.coords.find(*d) == bundle.coords.end() && unknown.insert(*d).second) {
            panel.issue(i, "district", fmt::format("district '{}' not in {}", *d, files::coords));
        }
        if (!beds.emplace(std::make_pair(*w, *d), z).second) {
            panel.issue(i, "week", fmt::format("duplicate (week, district) key ({}, {})", iso_week_label(*w), *d));
            continue;
        }
        weeks.insert(*w);
        districts.insert(*d);
    }
    const auto range = week_range(weeks);
    for (auto w : range) {
        if (weeks.count(w) == 0) {
            report.add(files::icu_panel, 0, "week", fmt::format("week {} missing", iso_week_label(w)));
            continue;
        }
        for (const auto& d : districts) {
            if (beds.count({w, d}) == 0) {
                report.add(files::icu_panel, 0, "district",
                           fmt::format("no bed counts for district '{}' in week {}", d, iso_week_label(w)));
            }
        }
    }
    std::map<std::tuple<Date, std::string, std::string>, double> values;
    std::set<std::string> ages;
    for (std::size_t i = 0; i < inc.size(); ++i) {
        auto w = inc.week(i, "week");
        auto d = inc.text(i, "district");
        auto a = inc.text(i, "age_group");
        auto v = inc.number(i, "incidence_per_100k");
        if (!w || !d || !a || !v) {
            continue;
        }
        if (districts.count(*d) == 0) {
            inc.issue(i, "district", fmt::format("district '{}' not in {}", *d, files::icu_panel));
            continue;
        }
        if (weeks.count(*w) == 0) {
            inc.issue(i, "week", fmt::format("week {} not in {}", iso_week_label(*w), files::icu_panel));
            continue;
        }
        if (!values.emplace(std::make_tuple(*w, *d, *a), *v).second) {
            inc.issue(i, "week", fmt::format("duplicate (week, district, age_group) key ({}, {}, {})",
                                             iso_week_label(*w), *d, *a));
            continue;
        }
        ages.insert(*a);
    }
    if (ages.empty()) {
        report.add(files::incidence, 0, "", "no incidence rows");
    }
    if (!report.ok()) {
        return;
    }
    IcuPanel out;
    out.districts  = {districts.begin(), districts.end()};
    out.age_groups = {ages.begin(), ages.end()};
    for (auto w : range) {
        out.weeks.push_back(iso_week_label(w));
    }
    const auto R = out.districts.size();
    out.beds.resize(static_cast<Eigen::Index>(range.size() * R), 3);
    out.incidence.resize(out.beds.rows(), static_cast<Eigen::Index>(ages.size()));
    for (std::size_t w = 0; w < range.size(); ++w) {
        for (std::size_t r = 0; r < R; ++r) {
            const auto row    = out.row(w, r);
            out.beds.row(row) = beds.at({range[w], out.districts[r]}).transpose();
            for (std::size_t a = 0; a < out.age_groups.size(); ++a) {
                const auto it = values.find({range[w], out.districts[r], out.age_groups[a]});
                if (it == values.end()) {
                    ++bundle.zero_filled;
                }
                out.incidence(row, static_cast<Eigen::Index>(a)) = it == values.end() ? 0.0 : it->second;
            }
        }
    }
    for (const auto& d : out.districts) {
        out.coords[d] = bundle.coords.at(d);
    }
    bundle.icu_panel = std::move(out);
}

} // namespace

DatasetBundle validate_and_load(const std::string& dir, Schema schema)
{
    DatasetBundle bundle;
    ValidationReport report;
    if (!std::filesystem::is_directory(dir)) {
        report.add(dir, 0, "", "input directory not found");
        throw ValidationError(std::move(report));
    }
    switch (schema) {
    case Schema::infection:
        load_infection(dir, bundle, report);
        break;
    case Schema::nowcast:
        load_line_list(dir, bundle, report);
        break;
    case Schema::hosp:
        load_hosp(dir, bundle, report);
        break;
    case Schema::icu:
        load_icu(dir, bundle, report);
        break;
    }
    if (!report.ok()) {
        throw ValidationError(std::move(report));
    }
    return bundle;
}

void write_infection_panel(const WeeklyPanel& panel, const std::string& path)
{
    CsvWriter out(path, {"week", "district", "age_group", "count"});
    for (std::size_t w = 0; w < panel.num_weeks(); ++w) {
        for (std::size_t r = 0; r < panel.num_districts(); ++r) {
            for (std::size_t a = 0; a < panel.num_ages(); ++a) {
                out.row({panel.weeks[w], panel.districts[r], panel.age_groups[a], format_number(panel.at(w, r, a))});
            }
        }
    }
}

void write_population(const PopulationTable& pop, const std::string& path)
{
    CsvWriter out(path, {"district", "age_group", "population"});
    for (std::size_t r = 0; r < pop.districts.size(); ++r) {
        for (std::size_t a = 0; a < pop.age_groups.size(); ++a) {
            out.row({pop.districts[r], pop.age_groups[a],
                     format_number(pop.pop(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)))});
        }
    }
}

void write_line_list(const LineList& list, const std::string& path)
{
    CsvWriter out(path, {"case_id", "admission_date", "infection_report_date", "registry_report_date", "age_group",
                         "gender", "district"});
    for (const auto& r : list.records) {
        out.row({r.case_id, r.admission ? format_date(*r.admission) : "",
                 r.infection_report ? format_date(*r.infection_report) : "", format_date(r.registry_report),
                 r.age_group, r.gender, r.district});
    }
}

void write_hosp_panel(const HospPanel& panel, const std::string& path)
{
    CsvWriter out(path, {"date", "district", "age_group", "gender", "reported_count"});
    for (const auto& c : panel.cells) {
        out.row({format_date(c.date), c.district, c.age_group, c.gender, format_number(c.reported)});
    }
}

void write_cell_population(const CellPopulation& pop, const std::string& path)
{
    CsvWriter out(path, {"district", "age_group", "gender", "population"});
    for (const auto& [k, v] : pop) {
        out.row({k.district, k.age_group, k.gender, format_number(v)});
    }
}

void write_coords(const DistrictCoords& coords, const std::string& path)
{
    CsvWriter out(path, {"district", "lon", "lat"});
    for (const auto& [d, xy] : coords) {
        out.row({d, format_number(xy.first), format_number(xy.second)});
    }
}

void write_icu_panel(const IcuPanel& panel, const std::string& path)
{
    CsvWriter out(path, {"week", "district", "beds_free", "beds_covid", "beds_noncovid"});
    for (std::size_t w = 0; w < panel.num_weeks(); ++w) {
        for (std::size_t r = 0; r < panel.num_districts(); ++r) {
            const auto z = panel.beds.row(panel.row(w, r));
            out.row({panel.weeks[w], panel.districts[r], format_number(z(0)), format_number(z(1)), format_number(z(2))});
        }
    }
}

void write_incidence(const IcuPanel& panel, const std::string& path)
{
    CsvWriter out(path, {"week", "district", "age_group", "incidence_per_100k"});
    for (std::size_t w = 0; w < panel.num_weeks(); ++w) {
        for (std::size_t r = 0; r < panel.num_districts(); ++r) {
            for (std::size_t a = 0; a < panel.age_groups.size(); ++a) {
                out.row({panel.weeks[w], panel.districts[r], panel.age_groups[a],
                         format_number(panel.incidence(panel.row(w, r), static_cast<Eigen::Index>(a)))});
            }
        }
    }
}

} // namespace epigam
