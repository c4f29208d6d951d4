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
#include "epigam/dates.hpp"

#include <array>
#include <cctype>

#include <fmt/format.h>

#include "epigam/errors.hpp"

namespace epigam
{

namespace
{

bool parse_digits(std::string_view s, int& out)
{
    out = 0;
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            return false;
        }
        out = out * 10 + (c - '0');
    }
    return true;
}

Date iso_week_one_monday(int year)
{
    using namespace std::chrono;
    // week 1 contains January 4th
    const Date jan4 = sys_days{std::chrono::year{year} / January / 4};
    return jan4 - days{weekday_index(jan4)};
}

} // namespace

Date parse_date(std::string_view text)
{
    using namespace std::chrono;
    int y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_digits(text.substr(0, 4), y) ||
        !parse_digits(text.substr(5, 2), m) || !parse_digits(text.substr(8, 2), d)) {
        throw DataError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", text));
    }
    const year_month_day ymd{std::chrono::year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw DataError(fmt::format("invalid date '{}'", text));
    }
    return sys_days{ymd};
}

std::string format_date(Date d)
{
    const std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

int weekday_index(Date d)
{
    return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

std::string weekday_name(int index)
{
    static const std::array<const char*, 7> names = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    if (index < 0 || index > 6) {
        throw DomainError(fmt::format("weekday index {} outside 0..6", index));
    }
    return names[static_cast<std::size_t>(index)];
}

std::string iso_week_label(Date d)
{
    using namespace std::chrono;
    // the ISO year is the year of the Thursday in the same week
    const Date thursday = d + days{3 - weekday_index(d)};
    const int iso_year  = static_cast<int>(year_month_day{thursday}.year());
    const long week     = days_between(iso_week_one_monday(iso_year), d) / 7 + 1;
    return fmt::format("{:04d}-W{:02d}", iso_year, week);
}

Date parse_iso_week(std::string_view label)
{
    using namespace std::chrono;
    int y = 0, w = 0;
    if (label.size() != 8 || label[4] != '-' || label[5] != 'W' || !parse_digits(label.substr(0, 4), y) ||
        !parse_digits(label.substr(6, 2), w) || w < 1 || w > 53) {
        throw DataError(fmt::format("invalid ISO week '{}' (expected YYYY-Www)", label));
    }
    const Date monday = iso_week_one_monday(y) + days{7 * (w - 1)};
    if (iso_week_label(monday) != label) {
        throw DataError(fmt::format("invalid ISO week '{}': year {} has no week {}", label, y, w));
    }
    return monday;
}

} // namespace epigam
