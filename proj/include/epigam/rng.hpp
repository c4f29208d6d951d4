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
#ifndef EPIGAM_RNG_HPP
#define EPIGAM_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

namespace epigam
{

/**
 * Seeded, splittable random stream ("epigam-rng/1").
 *
 * The engine is a 64-bit Mersenne Twister (mt19937_64). A stream is identified
 * by a 64-bit key; the engine seed is splitmix64(key). Child streams derive
 * their key as splitmix64(parent_key ^ splitmix64(index + 1)) so that
 * per-replicate or per-worker substreams do not depend on scheduling order.
 * Distributions come from Boost.Random, whose algorithms are fixed in the
 * headers and therefore portable across standard libraries.
 */
class Rng
{
public:
    using engine_type = boost::random::mt19937_64;

    explicit Rng(std::uint64_t seed);

    /// Independent child stream number `index`.
    Rng split(std::uint64_t index) const;
    /// Child stream keyed by a label (hashed with FNV-1a).
    Rng split(std::string_view label) const;

    std::uint64_t key() const
    {
        return m_key;
    }
    engine_type& engine()
    {
        return m_engine;
    }

    double uniform();
    double uniform(double lo, double hi)
    {
        return lo + (hi - lo) * uniform();
    }
    double normal(double mean = 0.0, double sd = 1.0);
    double gamma(double shape, double scale = 1.0);
    double beta(double a, double b);
    std::int64_t poisson(double mean);
    std::int64_t binomial(std::int64_t trials, double p);
    /// NB with mean mu and variance mu + mu^2/theta (gamma-Poisson mixture).
    std::int64_t negative_binomial(double mu, double theta);
    std::vector<std::int64_t> multinomial(std::int64_t trials, const std::vector<double>& probs);
    std::uint64_t next_u64();

private:
    std::uint64_t m_key;
    engine_type m_engine;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace epigam

#endif // EPIGAM_RNG_HPP
