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
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "epigam/errors.hpp"
#include "epigam/multinomial.hpp"
#include "epigam/rng.hpp"

using namespace epigam;

namespace
{

Design linear_design(const std::vector<double>& x)
{
    Frame f;
    f.add("x", x);
    DesignSpec spec;
    spec.terms.push_back(LinearTerm{"x"});
    return Design::build(spec, f);
}

Design intercept_design(std::size_t n)
{
    Frame f;
    f.add("x", std::vector<double>(n, 0.0));
    return Design::build(DesignSpec{}, f);
}

struct Simulated {
    std::vector<double> x;
    std::vector<std::string> unit;
    Eigen::MatrixXd counts;
};

/// Three categories, logits (0.2 + 0.8 x, -0.3 - 0.5 x) against category 2.
Simulated simulate(std::size_t n, int trials, std::uint64_t seed, double cluster_sd = 0.0, std::size_t units = 1)
{
    Rng rng(seed);
    Simulated s;
    s.counts.resize(static_cast<Eigen::Index>(n), 3);
    std::vector<double> shift(units);
    for (auto& v : shift) {
        v = rng.normal(0.0, cluster_sd);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x  = rng.normal();
        const auto u    = i % units;
        const double e0 = std::exp(0.2 + 0.8 * x + shift[u]);
        const double e1 = std::exp(-0.3 - 0.5 * x - shift[u]);
        const double t  = e0 + e1 + 1.0;
        const auto z    = rng.multinomial(trials, {e0 / t, e1 / t, 1.0 / t});
        s.x.push_back(x);
        s.unit.push_back("u" + std::to_string(u));
        for (int k = 0; k < 3; ++k) {
            s.counts(static_cast<Eigen::Index>(i), k) = static_cast<double>(z[static_cast<std::size_t>(k)]);
        }
    }
    return s;
}

} // namespace

TEST_CASE("intercept-only fit reproduces pooled proportions")
{
    Eigen::MatrixXd z(2, 3);
    z << 1, 2, 2, 1, 1, 3; // pooled (2, 3, 5)
    MultinomialOptions opt;
    opt.reference = 2;
    const auto fit = fit_multinomial(intercept_design(2), z, LambdaSpec::selected(), opt);
    REQUIRE(fit.converged);
    CHECK(fit.beta(0) == doctest::Approx(std::log(2.0 / 5.0)).epsilon(1e-10));
    CHECK(fit.beta(1) == doctest::Approx(std::log(3.0 / 5.0)).epsilon(1e-10));
    CHECK(fit.probs(0, 0) == doctest::Approx(0.2).epsilon(1e-10));

    Eigen::MatrixXd eq = Eigen::MatrixXd::Constant(4, 3, 7.0);
    const auto sym     = fit_multinomial(intercept_design(4), eq);
    CHECK(sym.beta.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant covariate is rank deficient")
{
    Eigen::MatrixXd z(4, 3);
    z << 1, 2, 3, 2, 2, 2, 3, 1, 1, 0, 4, 2;
    CHECK_THROWS_AS(fit_multinomial(linear_design({2, 2, 2, 2}), z), RankDeficientError);
}

TEST_CASE("validation of counts and categories")
{
    Eigen::MatrixXd z(2, 3);
    z << 1, 0, 3, 2, 0, 1;
    CHECK_THROWS_AS(fit_multinomial(intercept_design(2), z), DataError);
    z << 1, -1, 3, 2, 1, 1;
    CHECK_THROWS_AS(fit_multinomial(intercept_design(2), z), DataError);
}

TEST_CASE("log score examples")
{
    Eigen::MatrixXd pi(1, 3), z(1, 3);
    pi << 1.0 / 3, 1.0 / 3, 1.0 / 3;
    z << 1, 1, 1;
    CHECK(log_score(pi, z).scores(0) == doctest::Approx(-std::log(6.0 / 27.0)).epsilon(1e-12));
    pi << 1, 0, 0;
    z << 5, 0, 0;
    CHECK(log_score(pi, z).scores(0) == doctest::Approx(0.0));
    pi << 0.5, 0.5, 0;
    z << 0, 0, 1;
    const auto s = log_score(pi, z);
    CHECK(std::isinf(s.scores(0)));
    CHECK(s.impossible_rows.size() == 1);
    pi << 0.5, 0.6, 0;
    CHECK_THROWS_AS(log_score(pi, z), DataError);
}

TEST_CASE("softmax consistency and reference invariance")
{
    const auto sim = simulate(300, 20, 4);
    const auto d   = linear_design(sim.x);
    MultinomialOptions a, b;
    a.reference   = 2;
    b.reference   = 0;
    const auto fa = fit_multinomial(d, sim.counts, LambdaSpec::selected(), a);
    const auto fb = fit_multinomial(d, sim.counts, LambdaSpec::selected(), b);
    REQUIRE(fa.converged);
    REQUIRE(fb.converged);
    CHECK((multinomial_probs(d.X(), fa.beta, 3, 2) - fa.probs).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < fa.probs.rows(); ++i) {
        CHECK(std::abs(fa.probs.row(i).sum() - 1.0) < 1e-12);
    }
    CHECK((fa.probs - fb.probs).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(log_score(fa.probs, sim.counts).total() - log_score(fb.probs, sim.counts).total()) < 1e-6);
    // beta under reference 0: logit of category 1 is (b1 - b0) in reference-2 terms, category 2 is -b0
    const Eigen::VectorXd b0 = fa.logit_beta(0), b1 = fa.logit_beta(1);
    CHECK((fb.logit_beta(0) - (b1 - b0)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((fb.logit_beta(1) + b0).cwiseAbs().maxCoeff() < 1e-6);
    // recovery of the generating coefficients
    CHECK(fa.coefficient("cat1:x") == doctest::Approx(0.8).epsilon(0.15));
    CHECK(fa.coefficient("cat2:x") == doctest::Approx(-0.5).epsilon(0.2));
}

TEST_CASE("analytic gradient matches central differences")
{
    Rng rng(11);
    for (int inst = 0; inst < 5; ++inst) {
        const auto sim = simulate(40, 6, 100 + static_cast<std::uint64_t>(inst));
        const auto d   = linear_design(sim.x);
        Eigen::VectorXd beta(4);
        for (Eigen::Index j = 0; j < 4; ++j) {
            beta(j) = rng.normal(0.0, 0.5);
        }
        const auto g = multinomial_gradient(d.X(), sim.counts, beta, 2);
        for (Eigen::Index j = 0; j < 4; ++j) {
            const double h   = 1e-5;
            Eigen::VectorXd p = beta, m = beta;
            p(j) += h;
            m(j) -= h;
            const double fd = (multinomial_loglik(d.X(), sim.counts, p, 2) - multinomial_loglik(d.X(), sim.counts, m, 2)) /
                              (2 * h);
            CHECK(std::abs(fd - g(j)) <= 1e-5 * std::max(1.0, std::abs(g(j))));
        }
    }
}

TEST_CASE("sandwich covariance")
{
    SUBCASE("independent rows: close to model-based")
    {
        const auto sim = simulate(5000, 10, 21);
        const auto fit = fit_multinomial(linear_design(sim.x), sim.counts);
        const Eigen::VectorXd ratio = fit.cov_sandwich.diagonal().cwiseQuotient(fit.cov_model.diagonal());
        CHECK(ratio.minCoeff() > 0.9);
        CHECK(ratio.maxCoeff() < 1.1);
    }
    SUBCASE("a single unit gives a near-zero sandwich")
    {
        const auto sim = simulate(200, 10, 22);
        MultinomialOptions opt;
        opt.groups     = std::vector<std::string>(200, "all");
        const auto fit = fit_multinomial(linear_design(sim.x), sim.counts, LambdaSpec::selected(), opt);
        CHECK(fit.cov_sandwich.cwiseAbs().maxCoeff() < 1e-8 * fit.cov_model.cwiseAbs().maxCoeff());
    }
    SUBCASE("clustered rows inflate the sandwich")
    {
        const auto sim = simulate(2000, 20, 23, 0.5, 40);
        MultinomialOptions opt;
        opt.groups     = sim.unit;
        const auto fit = fit_multinomial(linear_design(sim.x), sim.counts, LambdaSpec::selected(), opt);
        CHECK(fit.cov_sandwich(0, 0) > 2.0 * fit.cov_model(0, 0));
        CHECK(fit.cov_sandwich(2, 2) > 2.0 * fit.cov_model(2, 2));
    }
}

TEST_CASE("complete separation is reported, not thrown")
{
    // category 0 exactly when x > 0
    std::vector<double> x;
    Eigen::MatrixXd z(20, 3);
    for (int i = 0; i < 20; ++i) {
        const double xi = i < 10 ? -1.0 - i : 1.0 + i;
        x.push_back(xi);
        if (xi > 0) {
            z.row(i) << 5, 0, 0;
        } else {
            z.row(i) << 0, 2, 3;
        }
    }
    const auto fit = fit_multinomial(linear_design(x), z);
    CHECK(fit.separation);
    CHECK_FALSE(fit.converged);
}

TEST_CASE("multinomial draws have covariance -N pi_k pi_l")
{
    Rng rng(3);
    const std::vector<double> pi = {0.2, 0.3, 0.5};
    const int N                  = 50;
    const int reps               = 20000;
    double s01 = 0, m0 = 0, m1 = 0;
    for (int r = 0; r < reps; ++r) {
        const auto z = rng.multinomial(N, pi);
        m0 += static_cast<double>(z[0]);
        m1 += static_cast<double>(z[1]);
        s01 += static_cast<double>(z[0] * z[1]);
    }
    m0 /= reps;
    m1 /= reps;
    const double cov = s01 / reps - m0 * m1;
    CHECK(cov == doctest::Approx(-N * 0.2 * 0.3).epsilon(0.1));
}
