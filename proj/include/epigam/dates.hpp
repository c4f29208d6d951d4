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
#ifndef EPIGAM_DATES_HPP
#define EPIGAM_DATES_HPP

#include <chrono>
#include <string>
#include <string_view>

namespace epigam
{

using Date = std::chrono::sys_days;

/// Strict ISO 8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// 0 = Monday, ..., 6 = Sunday.
int weekday_index(Date d);
std::string weekday_name(int index);

/// ISO week label "YYYY-Www".
std::string iso_week_label(Date d);
/// Monday of the ISO week given as "YYYY-Www".
Date parse_iso_week(std::string_view label);

inline long days_between(Date from, Date to)
{
    return static_cast<long>((to - from).count());
}

} // namespace epigam

#endif // EPIGAM_DATES_HPP
