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
#include <string>
#include <vector>

#include "doctest.h"

#include "epigam/design.hpp"
#include "epigam/errors.hpp"
#include "epigam/rng.hpp"

using namespace epigam;

namespace
{

Frame example_frame(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> x, lon, lat, off;
    std::vector<std::string> g, h, r;
    const std::vector<std::string> gl = {"a", "b", "c"}, hl = {"m", "f"}, rl = {"R1", "R2", "R3", "R4", "R5"};
    for (std::size_t i = 0; i < n; ++i) {
        x.push_back(rng.uniform(0.0, 10.0));
        lon.push_back(rng.uniform(9.0, 13.0));
        lat.push_back(rng.uniform(47.0, 50.0));
        off.push_back(rng.normal());
        g.push_back(gl[i % 3]);
        h.push_back(hl[(i / 3) % 2]);
        r.push_back(rl[i % 5]);
    }
    Frame f;
    f.add("x", x).add("lon", lon).add("lat", lat).add("off", off).add("g", g).add("h", h).add("r", r);
    return f;
}

DesignSpec example_spec()
{
    DesignSpec spec;
    spec.offset = "off";
    spec.terms.push_back(FactorTerm{"g", {"a", "b", "c"}, true});
    spec.terms.push_back(FactorTerm{"h", {"m", "f"}, true});
    spec.terms.push_back(InteractionTerm{"g", "h", {"a", "b", "c"}, {"m", "f"}});
    spec.terms.push_back(SmoothTerm{"x", 8, 3, 2, std::nullopt, "", true});
    spec.terms.push_back(SpatialTerm{"lon", "lat", 12, true});
    spec.terms.push_back(RandomInterceptTerm{"r", {}});
    return spec;
}

} // namespace

TEST_CASE("design layout, names and penalties")
{
    const auto frame = example_frame(200, 1);
    const auto d     = Design::build(example_spec(), frame);
    // 1 + 2 + 1 + 2 + 7 + 11 + 5
    CHECK(d.cols() == 29);
    CHECK(d.rows() == 200);
    CHECK(d.column_names()[0] == "(Intercept)");
    CHECK(d.find_column("g[b]").has_value());
    CHECK_FALSE(d.find_column("g[a]").has_value());
    CHECK(d.find_column("g[c]:h[f]").has_value());
    CHECK(d.find_column("re(r)[R3]").has_value());
    CHECK(d.find_term("s(x)") != nullptr);
    CHECK(d.find_term("s(lon,lat)") != nullptr);
    CHECK(d.blocks().size() == 3);
    for (const auto& b : d.blocks()) {
        CHECK(b.S.rows() == b.size);
        CHECK((b.S - b.S.transpose()).norm() < 1e-10);
    }
    CHECK(d.offset().isApprox(Eigen::Map<const Eigen::VectorXd>(frame.numeric("off").data(), 200)));

    const auto* s = d.find_term("s(x)");
    CHECK(d.X().middleCols(s->start, s->size).colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    const auto* sp = d.find_term("s(lon,lat)");
    CHECK(d.X().middleCols(sp->start, sp->size).colwise().sum().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("model_matrix on the training frame reproduces X")
{
    const auto frame = example_frame(150, 2);
    const auto d     = Design::build(example_spec(), frame);
    CHECK((d.model_matrix(frame) - d.X()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((d.offset_of(frame) - d.offset()).cwiseAbs().maxCoeff() == 0.0);

    std::vector<std::size_t> rows = {3, 17, 40};
    const auto sub                = frame.subset(rows);
    const auto Xs                 = d.model_matrix(sub);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK((Xs.row(static_cast<Eigen::Index>(i)) - d.X().row(static_cast<Eigen::Index>(rows[i]))).norm() < 1e-10);
    }
}

TEST_CASE("frame rejects ragged columns and unknown variables")
{
    Frame f;
    f.add("a", std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(f.add("b", std::vector<double>{1, 2}), DataError);
    DesignSpec spec;
    spec.terms.push_back(LinearTerm{"missing"});
    CHECK_THROWS(Design::build(spec, f));
}

TEST_CASE("piecewise linear term is penalized on hinges only")
{
    std::vector<double> t;
    for (int i = 1; i <= 60; ++i) {
        t.push_back(i);
    }
    Frame f;
    f.add("t", t);
    DesignSpec spec;
    spec.terms.push_back(PiecewiseLinearTerm{"t", 28, std::nullopt});
    const auto d = Design::build(spec, f);
    REQUIRE(d.cols() == 4);
    CHECK(d.column_names()[1] == "pl(t).slope");
    CHECK(d.X()(29, 1) == 30.0);
    CHECK(d.X()(29, 2) == 2.0);
    CHECK(d.X()(29, 3) == 0.0);
    REQUIRE(d.blocks().size() == 1);
}
