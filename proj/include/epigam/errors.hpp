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
#ifndef EPIGAM_ERRORS_HPP
#define EPIGAM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace epigam
{

/// Input outside the domain a basis or transform is defined on.
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Linear algebra failure: singular systems, non-finite iterates.
class NumericError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// The penalized Hessian (or a constraint) is rank deficient. Carries the
/// names of the design columns that could not be identified.
class RankDeficientError : public NumericError
{
public:
    RankDeficientError(const std::string& what, std::vector<std::string> columns)
        : NumericError(what)
        , m_columns(std::move(columns))
    {
    }
    const std::vector<std::string>& columns() const
    {
        return m_columns;
    }

private:
    std::vector<std::string> m_columns;
};

/// Invalid user configuration (unknown mapping, bad option combination).
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Violated precondition on data passed to a pipeline.
class DataError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace epigam

#endif // EPIGAM_ERRORS_HPP
