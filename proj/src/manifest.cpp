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
#include "epigam/manifest.hpp"

#include <array>
#include <filesystem>
#include <fstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <spdlog/version.h>

#include "epigam/errors.hpp"

#ifndef EPIGAM_VERSION
#define EPIGAM_VERSION "unknown"
#endif

namespace epigam
{

namespace
{

class Sha256
{
public:
    Sha256()
        : m_ctx(EVP_MD_CTX_new())
    {
        if (m_ctx == nullptr || EVP_DigestInit_ex(m_ctx, EVP_sha256(), nullptr) != 1) {
            throw NumericError("SHA-256 initialisation failed");
        }
    }
    ~Sha256()
    {
        EVP_MD_CTX_free(m_ctx);
    }
    Sha256(const Sha256&)            = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const char* data, std::size_t n)
    {
        EVP_DigestUpdate(m_ctx, data, n);
    }
    std::string hex()
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        EVP_DigestFinal_ex(m_ctx, md.data(), &len);
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += fmt::format("{:02x}", md[i]);
        }
        return out;
    }

private:
    EVP_MD_CTX* m_ctx;
};

nlohmann::json file_entry(const std::string& path)
{
    std::size_t bytes = 0;
    const auto digest = sha256_file(path, &bytes);
    return {{"file", std::filesystem::path(path).filename().string()}, {"bytes", bytes}, {"sha256", digest}};
}

} // namespace

std::string sha256_hex(std::string_view bytes)
{
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_file(const std::string& path, std::size_t* bytes)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}' for hashing", path));
    }
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
        if (bytes != nullptr) {
            *bytes += static_cast<std::size_t>(in.gcount());
        }
    }
    return h.hex();
}

nlohmann::json RunConfig::to_json() const
{
    nlohmann::json j = {{"command", command},    {"input_dir", input_dir}, {"extra_inputs", extra_inputs},
                        {"as_of", as_of},        {"d_max", d_max},         {"delta", delta},
                        {"window", window},      {"bootstrap", bootstrap}, {"n_perm", n_perm},
                        {"replicates", replicates}, {"basis", basis},      {"scenario", scenario},
                        {"params", params}};
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json build_manifest(const RunConfig& config, const std::vector<std::string>& inputs,
                              const std::vector<std::string>& outputs)
{
    nlohmann::json in  = nlohmann::json::array();
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : inputs) {
        in.push_back(file_entry(p));
    }
    for (const auto& p : outputs) {
        out.push_back(file_entry(p));
    }
    return {{"tool", "epigam"},
            {"version", EPIGAM_VERSION},
            {"rng", "epigam-rng/1"},
            {"libraries",
             {{"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
              {"boost", BOOST_LIB_VERSION},
              {"fmt", FMT_VERSION},
              {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)},
              {"openssl", OPENSSL_VERSION_TEXT}}},
            {"config", config.to_json()},
            {"inputs", in},
            {"outputs", out}};
}

void write_manifest(const nlohmann::json& manifest, const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    f << manifest.dump(2) << '\n';
    if (!f) {
        throw DataError(fmt::format("cannot write '{}'", path));
    }
}

} // namespace epigam
