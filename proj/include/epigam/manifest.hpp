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
#ifndef EPIGAM_MANIFEST_HPP
#define EPIGAM_MANIFEST_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace epigam
{

std::string sha256_hex(std::string_view bytes);
/// Hex digest of a file; adds its size to `bytes` when given.
std::string sha256_file(const std::string& path, std::size_t* bytes = nullptr);

/// Everything that determines a CLI run. Defaults are the documented ones.
struct RunConfig {
    std::string command;
    std::string input_dir;
    std::map<std::string, std::string> extra_inputs; ///< role -> path (for example the delay model)
    std::optional<std::uint64_t> seed;
    std::string as_of;
    int d_max              = 40;
    double delta           = 1.0;
    int window             = 8;
    int bootstrap          = 1000;
    std::size_t n_perm     = 9999;
    int replicates         = 100;
    std::map<std::string, int> basis; ///< basis dimensions by term
    nlohmann::json params;            ///< scenario parameters for `simulate`
    std::string scenario;

    nlohmann::json to_json() const;
};

/**
 * run_manifest.json: tool and library versions, the run configuration, and
 * SHA-256 digests of every input and output file (by file name). Contains no
 * timestamps or absolute output paths, so reruns reproduce it byte for byte.
 */
nlohmann::json build_manifest(const RunConfig& config, const std::vector<std::string>& inputs,
                              const std::vector<std::string>& outputs);
void write_manifest(const nlohmann::json& manifest, const std::string& path);

} // namespace epigam

#endif // EPIGAM_MANIFEST_HPP
