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
#include "epigam/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/errors.hpp"

namespace epigam
{

void BSplineSpec::validate() const
{
    if (degree < 1) {
        throw ConfigError(fmt::format("B-spline degree must be >= 1, got {}", degree));
    }
    if (num_basis < degree + 2) {
        throw ConfigError(fmt::format("B-spline needs num_basis >= degree + 2 ({}), got {}", degree + 2, num_basis));
    }
    if (penalty_order < 0 || penalty_order >= num_basis) {
        throw ConfigError(fmt::format("penalty order {} invalid for {} basis functions", penalty_order, num_basis));
    }
    if (!std::isfinite(domain.lo) || !std::isfinite(domain.hi) || domain.hi < domain.lo) {
        throw ConfigError(fmt::format("invalid B-spline domain [{}, {}]", domain.lo, domain.hi));
    }
}

std::vector<double> BSplineSpec::knots() const
{
    const int interior = num_basis - degree - 1;
    std::vector<double> t;
    t.reserve(static_cast<std::size_t>(num_basis + degree + 1));
    for (int i = 0; i <= degree; ++i) {
        t.push_back(domain.lo);
    }
    const double width = domain.hi - domain.lo;
    for (int j = 1; j <= interior; ++j) {
        t.push_back(domain.lo + width * j / (interior + 1));
    }
    for (int i = 0; i <= degree; ++i) {
        t.push_back(domain.hi);
    }
    return t;
}

namespace
{

void check_in_domain(double x, double lo, double hi, const char* what)
{
    const double tol = 1e-10 * std::max(1.0, hi - lo);
    if (!std::isfinite(x) || x < lo - tol || x > hi + tol) {
        throw DomainError(fmt::format("{}: value {} outside domain [{}, {}]", what, x, lo, hi));
    }
}

} // namespace

Eigen::MatrixXd evaluate_basis(const BSplineSpec& spec, std::span<const double> x)
{
    spec.validate();
    const auto n = static_cast<Eigen::Index>(x.size());
    if (spec.degenerate()) {
        spdlog::warn("B-spline domain collapsed to the single point {}; using an intercept column", spec.domain.lo);
        for (double xi : x) {
            check_in_domain(xi, spec.domain.lo, spec.domain.hi, "B-spline");
        }
        return Eigen::MatrixXd::Ones(n, 1);
    }
    const int p     = spec.degree;
    const int k     = spec.num_basis;
    const auto t    = spec.knots();
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, k);
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1)),
        N(static_cast<std::size_t>(p + 1));

    for (Eigen::Index row = 0; row < n; ++row) {
        double xi = x[static_cast<std::size_t>(row)];
        check_in_domain(xi, spec.domain.lo, spec.domain.hi, "B-spline");
        xi = std::clamp(xi, spec.domain.lo, spec.domain.hi);

        // knot span s with t[s] <= x < t[s+1]; the right end belongs to the last span
        int span = k - 1;
        if (xi < spec.domain.hi) {
            span = static_cast<int>(std::upper_bound(t.begin() + p, t.begin() + k + 1, xi) - t.begin()) - 1;
        }

        N[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[static_cast<std::size_t>(j)]  = xi - t[static_cast<std::size_t>(span + 1 - j)];
            right[static_cast<std::size_t>(j)] = t[static_cast<std::size_t>(span + j)] - xi;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
                const double temp  = N[static_cast<std::size_t>(r)] / denom;
                N[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
                saved = left[static_cast<std::size_t>(j - r)] * temp;
            }
            N[static_cast<std::size_t>(j)] = saved;
        }
        for (int j = 0; j <= p; ++j) {
            B(row, span - p + j) = N[static_cast<std::size_t>(j)];
        }
    }
    return B;
}

int TruncatedLinearSpec::num_hinges() const
{
    validate();
    // largest L with spacing * L < horizon
    return (horizon - 1) / knot_spacing;
}

void TruncatedLinearSpec::validate() const
{
    if (knot_spacing < 1) {
        throw ConfigError(fmt::format("knot spacing must be positive, got {}", knot_spacing));
    }
    if (horizon < 1) {
        throw ConfigError(fmt::format("truncated-linear horizon must be >= 1, got {}", horizon));
    }
}

Eigen::MatrixXd evaluate_basis(const TruncatedLinearSpec& spec, std::span<const double> x)
{
    const int L = spec.num_hinges();
    Eigen::MatrixXd B(static_cast<Eigen::Index>(x.size()), L + 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        check_in_domain(x[i], 1.0, static_cast<double>(spec.horizon), "truncated-linear");
        const auto row = static_cast<Eigen::Index>(i);
        B(row, 0)      = x[i];
        for (int l = 1; l <= L; ++l) {
            B(row, l) = std::max(0.0, x[i] - static_cast<double>(spec.knot_spacing * l));
        }
    }
    return B;
}

Eigen::MatrixXd penalty_matrix(const TruncatedLinearSpec& spec)
{
    const int L       = spec.num_hinges();
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(L + 1, L + 1);
    S(0, 0)           = 0.0;
    return S;
}

Eigen::MatrixXd difference_matrix(int k, int order)
{
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(k, k);
    for (int o = 0; o < order; ++o) {
        const Eigen::Index rows = D.rows() - 1;
        D                       = (D.bottomRows(rows) - D.topRows(rows)).eval();
    }
    return D;
}

Eigen::MatrixXd penalty_matrix(const BSplineSpec& spec)
{
    spec.validate();
    if (spec.degenerate()) {
        return Eigen::MatrixXd::Zero(1, 1);
    }
    const Eigen::MatrixXd D = difference_matrix(spec.num_basis, spec.penalty_order);
    return D.transpose() * D;
}

namespace
{

double tps_radial(double r)
{
    if (r <= 0.0) {
        return 0.0;
    }
    return r * r * std::log(r) / (8.0 * std::numbers::pi);
}

Eigen::MatrixX2d distinct_centers(const std::vector<std::array<double, 2>>& centers)
{
    std::vector<std::array<double, 2>> unique;
    for (const auto& c : centers) {
        if (!std::isfinite(c[0]) || !std::isfinite(c[1])) {
            throw DomainError(fmt::format("thin-plate center ({}, {}) is not finite", c[0], c[1]));
        }
        if (std::find(unique.begin(), unique.end(), c) == unique.end()) {
            unique.push_back(c);
        }
    }
    Eigen::MatrixX2d out(static_cast<Eigen::Index>(unique.size()), 2);
    for (std::size_t i = 0; i < unique.size(); ++i) {
        out(static_cast<Eigen::Index>(i), 0) = unique[i][0];
        out(static_cast<Eigen::Index>(i), 1) = unique[i][1];
    }
    return out;
}

} // namespace

ThinPlateBasis::ThinPlateBasis(const ThinPlateSpec& spec)
    : m_centers(distinct_centers(spec.centers))
{
    const Eigen::Index n = m_centers.rows();
    if (spec.rank < 3) {
        throw ConfigError(fmt::format("thin-plate rank must be >= 3, got {}", spec.rank));
    }
    Eigen::Index k = spec.rank;
    if (k > n) {
        spdlog::warn("thin-plate rank {} exceeds the {} distinct centers; using rank {}", k, n, n);
        k = n;
    }
    if (k <= 3) {
        m_radial_transform = Eigen::MatrixXd::Zero(n, 0);
        m_penalty          = Eigen::MatrixXd::Zero(3, 3);
        return;
    }

    Eigen::MatrixXd E(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            E(i, j) = tps_radial((m_centers.row(i) - m_centers.row(j)).norm());
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    const auto& values = eig.eigenvalues();
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(values(a)) > std::abs(values(b));
    });
    Eigen::MatrixXd Uk(n, k);
    Eigen::VectorXd Dk(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        Uk.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
        Dk(j)     = values(order[static_cast<std::size_t>(j)]);
    }

    // constraint T' Uk delta = 0 with T = [1, x, y]
    Eigen::MatrixXd T(n, 3);
    T.col(0).setOnes();
    T.col(1) = m_centers.col(0);
    T.col(2) = m_centers.col(1);
    const Eigen::MatrixXd M = Uk.transpose() * T; // k x 3
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    const Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd Z = Q.rightCols(k - 3);

    m_radial_transform = Uk * Z;
    Eigen::MatrixXd radial_penalty = Z.transpose() * Dk.asDiagonal() * Z;
    radial_penalty                 = 0.5 * (radial_penalty + radial_penalty.transpose()).eval();
    // project onto the PSD cone to remove round-off negatives
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> peig(radial_penalty);
    const Eigen::VectorXd clipped = peig.eigenvalues().cwiseMax(0.0);
    radial_penalty = peig.eigenvectors() * clipped.asDiagonal() * peig.eigenvectors().transpose();

    m_penalty = Eigen::MatrixXd::Zero(k, k);
    m_penalty.topLeftCorner(k - 3, k - 3) = 0.5 * (radial_penalty + radial_penalty.transpose());
}

Eigen::MatrixXd ThinPlateBasis::evaluate(const Eigen::MatrixX2d& points) const
{
    const Eigen::Index n  = points.rows();
    const Eigen::Index nc = m_centers.rows();
    const Eigen::Index kr = m_radial_transform.cols();
    Eigen::MatrixXd out(n, kr + 3);
    Eigen::RowVectorXd radial(nc);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!points.row(i).allFinite()) {
            throw DomainError(fmt::format("thin-plate input ({}, {}) is not finite", points(i, 0), points(i, 1)));
        }
        if (kr > 0) {
            for (Eigen::Index j = 0; j < nc; ++j) {
                radial(j) = tps_radial((points.row(i) - m_centers.row(j)).norm());
            }
            out.row(i).head(kr) = radial * m_radial_transform;
        }
        out(i, kr)     = 1.0;
        out(i, kr + 1) = points(i, 0);
        out(i, kr + 2) = points(i, 1);
    }
    return out;
}

Eigen::MatrixXd evaluate_basis(const ThinPlateSpec& spec, const Eigen::MatrixX2d& points)
{
    return ThinPlateBasis(spec).evaluate(points);
}

Eigen::MatrixXd penalty_matrix(const ThinPlateSpec& spec)
{
    return ThinPlateBasis(spec).penalty();
}

Eigen::MatrixXd evaluate_basis(const RandomInterceptSpec& spec, std::span<const std::string> x)
{
    std::unordered_map<std::string, Eigen::Index> index;
    for (std::size_t j = 0; j < spec.levels.size(); ++j) {
        index.emplace(spec.levels[j], static_cast<Eigen::Index>(j));
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()),
                                              static_cast<Eigen::Index>(spec.levels.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto it = index.find(x[i]);
        if (it == index.end()) {
            throw DomainError(fmt::format("unseen level '{}'", x[i]));
        }
        B(static_cast<Eigen::Index>(i), it->second) = 1.0;
    }
    return B;
}

Eigen::MatrixXd penalty_matrix(const RandomInterceptSpec& spec)
{
    const auto k = static_cast<Eigen::Index>(spec.levels.size());
    return Eigen::MatrixXd::Identity(k, k);
}

Eigen::MatrixXd centering_transform(const Eigen::VectorXd& column_sums)
{
    const Eigen::Index k = column_sums.size();
    if (k == 0) {
        throw NumericError("centering constraint on an empty basis");
    }
    if (!(column_sums.cwiseAbs().maxCoeff() > 0.0)) {
        throw NumericError("centering constraint is rank deficient: all column sums are zero");
    }
    const Eigen::MatrixXd sums_col = column_sums;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sums_col);
    const Eigen::MatrixXd Q = qr.householderQ();
    return Q.rightCols(k - 1);
}

CenteredBasis apply_centering_constraint(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty)
{
    if (basis.rows() < basis.cols()) {
        throw NumericError(fmt::format("centering needs n >= k, got n = {} and k = {}", basis.rows(), basis.cols()));
    }
    const Eigen::VectorXd sums = basis.colwise().sum().transpose();
    const double scale         = std::max(1.0, basis.cwiseAbs().maxCoeff() * static_cast<double>(basis.rows()));
    if (sums.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
        throw NumericError("centering constraint is rank deficient: all column sums are zero");
    }
    CenteredBasis out;
    out.transform = centering_transform(sums);
    out.basis     = basis * out.transform;
    out.penalty   = out.transform.transpose() * penalty * out.transform;
    out.penalty   = 0.5 * (out.penalty + out.penalty.transpose()).eval();
    return out;
}

} // namespace epigam
