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
#ifndef EPIGAM_DATASET_HPP
#define EPIGAM_DATASET_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "epigam/errors.hpp"
#include "epigam/hosp.hpp"
#include "epigam/icu.hpp"
#include "epigam/infection.hpp"
#include "epigam/nowcast.hpp"

namespace epigam
{

struct Issue {
    std::string file;
    std::size_t row = 0; ///< 1-based source line, 0 for file-level problems
    std::string column;
    std::string reason;
};

struct ValidationReport {
    std::vector<Issue> issues;

    bool ok() const
    {
        return issues.empty();
    }
    void add(std::string file, std::size_t row, std::string column, std::string reason);
    /// "file:row: column: reason" lines, at most `max_lines` of them.
    std::string summary(std::size_t max_lines = 20) const;
    nlohmann::json to_json() const;
};

/// Thrown by validate_and_load; carries every issue found.
class ValidationError : public DataError
{
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const
    {
        return m_report;
    }

private:
    ValidationReport m_report;
};

enum class Schema { infection, nowcast, hosp, icu };

std::string schema_name(Schema s);
Schema parse_schema(const std::string& name);

/// Standard file names inside a bundle directory.
namespace files
{
inline constexpr const char* infection_panel  = "panel.csv";
inline constexpr const char* population       = "population.csv";
inline constexpr const char* line_list        = "hosp_linelist.csv";
inline constexpr const char* hosp_panel       = "hosp_panel.csv";
inline constexpr const char* cell_population  = "population_g.csv";
inline constexpr const char* coords           = "district_coords.csv";
inline constexpr const char* icu_panel        = "icu_panel.csv";
inline constexpr const char* incidence        = "incidence.csv";
} // namespace files

/// Files each schema reads.
std::vector<std::string> schema_files(Schema s);

struct DatasetBundle {
    std::optional<WeeklyPanel> infection_panel;
    std::optional<PopulationTable> population;
    std::optional<LineList> line_list;
    std::optional<HospPanel> hosp_panel;
    CellPopulation cell_population;
    DistrictCoords coords;
    std::optional<IcuPanel> icu_panel;
    std::vector<std::string> paths; ///< files read, in schema order
    std::size_t zero_filled = 0;   ///< grid cells absent from the input and set to 0
};

/// Reads and checks the schema's files from `dir`; throws ValidationError listing all problems.
DatasetBundle validate_and_load(const std::string& dir, Schema schema);

void write_infection_panel(const WeeklyPanel& panel, const std::string& path);
void write_population(const PopulationTable& pop, const std::string& path);
void write_line_list(const LineList& list, const std::string& path);
void write_hosp_panel(const HospPanel& panel, const std::string& path);
void write_cell_population(const CellPopulation& pop, const std::string& path);
void write_coords(const DistrictCoords& coords, const std::string& path);
void write_icu_panel(const IcuPanel& panel, const std::string& path);
void write_incidence(const IcuPanel& panel, const std::string& path);

} // namespace epigam

#endif // EPIGAM_DATASET_HPP
