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
#ifndef EPIGAM_CSV_HPP
#define EPIGAM_CSV_HPP

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace epigam
{

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based line numbers of the rows in the source file (header is line 1).
    std::vector<std::size_t> lines;

    /// Index of a header column; throws DataError if absent.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

/// Reads a headed CSV file (RFC 4180 quoting, optional UTF-8 BOM, LF or CRLF).
CsvTable read_csv(const std::string& path);

/// Shortest round-trip decimal representation.
std::string format_number(double x);

class CsvWriter
{
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);

private:
    std::ofstream m_out;
    std::string m_path;
    std::size_t m_width;
};

} // namespace epigam

#endif // EPIGAM_CSV_HPP
