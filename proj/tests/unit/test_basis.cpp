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
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "doctest.h"

#include "epigam/basis.hpp"
#include "epigam/errors.hpp"
#include "epigam/rng.hpp"

using namespace epigam;

namespace
{

double min_quadratic_form(const Eigen::MatrixXd& S, std::uint64_t seed)
{
    Rng rng(seed);
    double lo = 0.0;
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd v(S.rows());
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            v(i) = rng.normal();
        }
        lo = std::min(lo, v.dot(S * v));
    }
    return lo;
}

int null_dimension(const Eigen::MatrixXd& S)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    int count        = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        if (std::abs(es.eigenvalues()(i)) < 1e-10 * top) {
            ++count;
        }
    }
    return count;
}

} // namespace

TEST_CASE("B-splines form a partition of unity")
{
    BSplineSpec spec{3, 12, {-2.0, 5.0}, 2};
    std::vector<double> x;
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        x.push_back(rng.uniform(-2.0, 5.0));
    }
    x.push_back(-2.0);
    x.push_back(5.0);
    const auto B = evaluate_basis(spec, x);
    CHECK(B.cols() == 12);
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        CHECK(std::abs(B.row(i).sum() - 1.0) < 1e-12);
        CHECK(B.row(i).minCoeff() >= 0.0);
    }
    const auto knots = spec.knots();
    CHECK(knots.size() == 16u);
    for (std::size_t i = 1; i < knots.size(); ++i) {
        CHECK(knots[i] >= knots[i - 1]);
    }
    CHECK(knots.front() <= -2.0);
    CHECK(knots.back() >= 5.0);
}

TEST_CASE("B-spline evaluation outside the domain names the value")
{
    BSplineSpec spec{3, 8, {0.0, 1.0}, 2};
    std::vector<double> x = {0.5, 1.25};
    CHECK_THROWS_AS(evaluate_basis(spec, x), DomainError);
    try {
        evaluate_basis(spec, x);
    }
    catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("1.25") != std::string::npos);
    }
}

TEST_CASE("degenerate B-spline domain collapses to one column")
{
    BSplineSpec spec{3, 8, {2.0, 2.0}, 2};
    std::vector<double> x = {2.0, 2.0};
    const auto B          = evaluate_basis(spec, x);
    CHECK(B.cols() == 1);
    CHECK(B.sum() == doctest::Approx(2.0));
}

TEST_CASE("second-order difference penalty")
{
    BSplineSpec spec{3, 5, {0.0, 1.0}, 2};
    const auto S = penalty_matrix(spec);
    CHECK(S.rows() == 5);
    CHECK(null_dimension(S) == 2);
    Eigen::VectorXd one = Eigen::VectorXd::Ones(5);
    Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(5, 0.0, 4.0);
    CHECK((S * one).norm() < 1e-12);
    CHECK((S * lin).norm() < 1e-12);
    CHECK(null_dimension(penalty_matrix(BSplineSpec{3, 10, {0.0, 1.0}, 2})) == 2);
    CHECK(null_dimension(penalty_matrix(BSplineSpec{3, 10, {0.0, 1.0}, 1})) == 1);
    CHECK(min_quadratic_form(penalty_matrix(BSplineSpec{3, 10, {0.0, 1.0}, 2}), 3) >= -1e-10);
}

TEST_CASE("truncated linear columns")
{
    TruncatedLinearSpec spec{28, 60};
    CHECK(spec.num_hinges() == 2);
    std::vector<double> x = {30.0};
    const auto B          = evaluate_basis(spec, x);
    REQUIRE(B.cols() == 3);
    CHECK(B(0, 0) == 30.0);
    CHECK(B(0, 1) == 2.0);
    CHECK(B(0, 2) == 0.0);
    const auto S = penalty_matrix(spec);
    CHECK(S(0, 0) == 0.0);
    CHECK(S(1, 1) == 1.0);
    CHECK(S(2, 2) == 1.0);
    // 28 * 2 = 56 < 56 fails, so T = 56 has one hinge
    CHECK(TruncatedLinearSpec{28, 56}.num_hinges() == 1);
}

TEST_CASE("random intercept dummy coding and ridge penalty")
{
    RandomInterceptSpec spec{{"A", "B"}};
    std::vector<std::string> x = {"B"};
    const auto B               = evaluate_basis(spec, x);
    CHECK(B(0, 0) == 0.0);
    CHECK(B(0, 1) == 1.0);
    CHECK(penalty_matrix(RandomInterceptSpec{{"a", "b", "c"}}).isApprox(Eigen::MatrixXd::Identity(3, 3)));
    std::vector<std::string> bad = {"C"};
    CHECK_THROWS_AS(evaluate_basis(spec, bad), DomainError);
}

TEST_CASE("thin-plate penalty is PSD with an affine null space")
{
    Rng rng(5);
    ThinPlateSpec spec;
    for (int i = 0; i < 10; ++i) {
        spec.centers.push_back({rng.uniform(9.0, 13.0), rng.uniform(47.0, 50.0)});
    }
    spec.rank    = 5;
    const auto S = penalty_matrix(spec);
    CHECK(S.rows() == 5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    CHECK(null_dimension(S) == 3);
    CHECK(min_quadratic_form(S, 9) >= -1e-10);

    Eigen::MatrixX2d pts(3, 2);
    pts << 10.0, 48.0, 11.0, 49.0, 12.5, 47.5;
    const auto B = evaluate_basis(spec, pts);
    CHECK(B.cols() == 5);

    spec.rank = 30; // more than the distinct centers
    CHECK(penalty_matrix(spec).rows() == 10);
}

TEST_CASE("centering constraint")
{
    SUBCASE("B-spline basis on a uniform grid")
    {
        BSplineSpec spec{3, 10, {0.0, 1.0}, 2};
        std::vector<double> x;
        for (int i = 0; i <= 200; ++i) {
            x.push_back(i / 200.0);
        }
        const auto c = apply_centering_constraint(evaluate_basis(spec, x), penalty_matrix(spec));
        CHECK(c.basis.cols() == 9);
        CHECK(c.basis.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
        CHECK(min_quadratic_form(c.penalty, 2) >= -1e-10);
        CHECK(c.transform.rows() == 10);
        CHECK(c.transform.cols() == 9);
    }
    SUBCASE("constant column is removed")
    {
        Eigen::MatrixXd B(4, 2);
        B << 1, 0.1, 1, 0.4, 1, 0.2, 1, 0.9;
        const auto c = apply_centering_constraint(B, Eigen::MatrixXd::Identity(2, 2));
        CHECK(c.basis.cols() == 1);
        CHECK(std::abs(c.basis.sum()) < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.penalty);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
    SUBCASE("all-zero sums are rank deficient")
    {
        Eigen::MatrixXd B(2, 2);
        B << 1, -1, -1, 1;
        CHECK_THROWS_AS(apply_centering_constraint(B, Eigen::MatrixXd::Identity(2, 2)), NumericError);
    }
}
