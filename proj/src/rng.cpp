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
#include "epigam/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace epigam
{

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed)
    : m_key(seed)
    , m_engine(splitmix64(seed))
{
}

Rng Rng::split(std::uint64_t index) const
{
    return Rng(splitmix64(m_key ^ splitmix64(index + 1)));
}

Rng Rng::split(std::string_view label) const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return Rng(splitmix64(m_key ^ splitmix64(h)));
}

std::uint64_t Rng::next_u64()
{
    return m_engine();
}

double Rng::uniform()
{
    return boost::random::uniform_01<double>{}(m_engine);
}

double Rng::normal(double mean, double sd)
{
    return boost::random::normal_distribution<double>{mean, sd}(m_engine);
}

double Rng::gamma(double shape, double scale)
{
    return boost::random::gamma_distribution<double>{shape, scale}(m_engine);
}

double Rng::beta(double a, double b)
{
    return boost::random::beta_distribution<double>{a, b}(m_engine);
}

std::int64_t Rng::poisson(double mean)
{
    if (!(mean > 0.0)) {
        return 0;
    }
    // boost's poisson_distribution uses int; large means go through a normal
    // approximation-free split into independent chunks.
    constexpr double chunk = 1e8;
    std::int64_t total = 0;
    while (mean > chunk) {
        total += boost::random::poisson_distribution<std::int64_t, double>{chunk}(m_engine);
        mean -= chunk;
    }
    return total + boost::random::poisson_distribution<std::int64_t, double>{mean}(m_engine);
}

std::int64_t Rng::binomial(std::int64_t trials, double p)
{
    if (trials <= 0 || p <= 0.0) {
        return 0;
    }
    if (p >= 1.0) {
        return trials;
    }
    return boost::random::binomial_distribution<std::int64_t, double>{trials, p}(m_engine);
}

std::int64_t Rng::negative_binomial(double mu, double theta)
{
    if (!(mu > 0.0)) {
        return 0;
    }
    if (!std::isfinite(theta)) {
        return poisson(mu);
    }
    return poisson(gamma(theta, mu / theta));
}

std::vector<std::int64_t> Rng::multinomial(std::int64_t trials, const std::vector<double>& probs)
{
    std::vector<std::int64_t> out(probs.size(), 0);
    double remaining_mass = 1.0;
    std::int64_t remaining = trials;
    for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
        const double p = remaining_mass > 0.0 ? std::clamp(probs[k] / remaining_mass, 0.0, 1.0) : 0.0;
        out[k] = binomial(remaining, p);
        remaining -= out[k];
        remaining_mass -= probs[k];
    }
    if (!probs.empty()) {
        out.back() += remaining;
    }
    return out;
}

} // namespace epigam
