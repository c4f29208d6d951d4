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
#include "epigam/csv.hpp"

#include <algorithm>
#include <cmath>

#include <boost/tokenizer.hpp>
#include <fmt/format.h>

#include "epigam/errors.hpp"

namespace epigam
{

std::size_t CsvTable::column(const std::string& name) const
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError(fmt::format("{}: missing column '{}'", path, name));
    }
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const
{
    return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", path));
    }
    CsvTable table;
    table.path = path;
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    const boost::escaped_list_separator<char> sep('\0', ',', '"');
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) {
            line.erase(0, 3);
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        try {
            Tokenizer tok(line, sep);
            fields.assign(tok.begin(), tok.end());
        }
        catch (const boost::escaped_list_error& e) {
            throw DataError(fmt::format("{}:{}: malformed CSV ({})", path, lineno, e.what()));
        }
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw DataError(fmt::format("{}:{}: expected {} fields, found {}", path, lineno, table.header.size(),
                                        fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.lines.push_back(lineno);
    }
    if (table.header.empty()) {
        throw DataError(fmt::format("{}: empty file (no header)", path));
    }
    return table;
}

std::string format_number(double x)
{
    if (std::isnan(x)) {
        return "NA";
    }
    if (std::isinf(x)) {
        return x > 0 ? "Inf" : "-Inf";
    }
    if (x == 0.0) {
        return "0";
    }
    return fmt::format("{}", x);
}

namespace
{

std::string quote(const std::string& field)
{
    if (field.find_first_of(",\"\n\r") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

} // namespace

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : m_out(path, std::ios::binary)
    , m_path(path)
    , m_width(header.size())
{
    if (!m_out) {
        throw DataError(fmt::format("cannot write '{}'", path));
    }
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields)
{
    if (fields.size() != m_width) {
        throw DataError(fmt::format("{}: row has {} fields, header has {}", m_path, fields.size(), m_width));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            m_out << ',';
        }
        m_out << quote(fields[i]);
    }
    m_out << '\n';
}

} // namespace epigam
