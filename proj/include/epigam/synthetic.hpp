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
#ifndef EPIGAM_SYNTHETIC_HPP
#define EPIGAM_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "epigam/dataset.hpp"

namespace epigam
{

struct SyntheticOutput {
    std::vector<std::string> files; ///< written paths, truth.json last
    nlohmann::json truth;
    /// nowcast scenario: triangle counted directly from the simulated records, per coarse group
    std::vector<Eigen::MatrixXd> triangle;
};

/**
 * Writes a bundle in the ingestion schemas plus truth.json to `dir`.
 * Scenarios: infection, nowcast (line list plus the hospitalisation panel it
 * aggregates to) and icu. `params` is a JSON object of overrides; unknown keys
 * are rejected.
 */
SyntheticOutput generate_synthetic(Schema scenario, const nlohmann::json& params, std::uint64_t seed,
                                   const std::string& dir);

} // namespace epigam

#endif // EPIGAM_SYNTHETIC_HPP
