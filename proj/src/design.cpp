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
#include "epigam/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "epigam/errors.hpp"

namespace epigam
{

Frame& Frame::add(const std::string& name, std::vector<double> values)
{
    check_rows(name, values.size());
    m_numeric[name] = std::move(values);
    return *this;
}

Frame& Frame::add(const std::string& name, std::vector<std::string> labels)
{
    check_rows(name, labels.size());
    m_labels[name] = std::move(labels);
    return *this;
}

void Frame::check_rows(const std::string& name, std::size_t n)
{
    if (m_has_columns && n != m_rows) {
        throw DataError(fmt::format("column '{}' has {} rows, frame has {}", name, n, m_rows));
    }
    m_rows        = n;
    m_has_columns = true;
}

const std::vector<double>& Frame::numeric(const std::string& name) const
{
    const auto it = m_numeric.find(name);
    if (it == m_numeric.end()) {
        throw ConfigError(fmt::format("frame has no numeric column '{}'", name));
    }
    return it->second;
}

const std::vector<std::string>& Frame::labels(const std::string& name) const
{
    const auto it = m_labels.find(name);
    if (it == m_labels.end()) {
        throw ConfigError(fmt::format("frame has no label column '{}'", name));
    }
    return it->second;
}

Frame Frame::subset(std::span<const std::size_t> rows) const
{
    Frame out;
    for (const auto& [name, col] : m_numeric) {
        std::vector<double> v;
        v.reserve(rows.size());
        for (auto r : rows) {
            v.push_back(col.at(r));
        }
        out.add(name, std::move(v));
    }
    for (const auto& [name, col] : m_labels) {
        std::vector<std::string> v;
        v.reserve(rows.size());
        for (auto r : rows) {
            v.push_back(col.at(r));
        }
        out.add(name, std::move(v));
    }
    return out;
}

namespace
{

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::vector<std::string> sorted_levels(const std::vector<std::string>& values)
{
    std::set<std::string> s(values.begin(), values.end());
    return {s.begin(), s.end()};
}

std::unordered_map<std::string, Eigen::Index> level_index(const std::vector<std::string>& levels)
{
    std::unordered_map<std::string, Eigen::Index> idx;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!idx.emplace(levels[i], static_cast<Eigen::Index>(i)).second) {
            throw ConfigError(fmt::format("duplicate level '{}'", levels[i]));
        }
    }
    return idx;
}

Eigen::Index lookup(const std::unordered_map<std::string, Eigen::Index>& idx, const std::string& value,
                    const std::string& variable)
{
    const auto it = idx.find(value);
    if (it == idx.end()) {
        throw DomainError(fmt::format("unseen level '{}' of factor '{}'", value, variable));
    }
    return it->second;
}

} // namespace

std::string term_label(const Term& term)
{
    return std::visit(overloaded{
                          [](const LinearTerm& t) {
                              return t.variable;
                          },
                          [](const FactorTerm& t) {
                              return fmt::format("factor({})", t.variable);
                          },
                          [](const InteractionTerm& t) {
                              return fmt::format("{}:{}", t.first, t.second);
                          },
                          [](const SmoothTerm& t) {
                              return t.by.empty() ? fmt::format("s({})", t.variable)
                                                  : fmt::format("s({}):{}", t.variable, t.by);
                          },
                          [](const PiecewiseLinearTerm& t) {
                              return fmt::format("pl({})", t.variable);
                          },
                          [](const SpatialTerm& t) {
                              return fmt::format("s({},{})", t.lon, t.lat);
                          },
                          [](const RandomInterceptTerm& t) {
                              return fmt::format("re({})", t.variable);
                          },
                      },
                      term);
}

struct Design::Frozen {
    virtual ~Frozen()                                          = default;
    virtual Eigen::MatrixXd evaluate(const Frame& frame) const = 0;
};

namespace
{

struct FrozenIntercept final : Design::Frozen {
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(frame.rows()), 1);
    }
};

struct FrozenLinear final : Design::Frozen {
    std::string variable;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& x = frame.numeric(variable);
        return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    }
};

struct FrozenFactor final : Design::Frozen {
    std::string variable;
    std::vector<std::string> levels;
    bool drop_first = true;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& x     = frame.labels(variable);
        const auto idx    = level_index(levels);
        const Eigen::Index shift = drop_first ? 1 : 0;
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()),
                                                  static_cast<Eigen::Index>(levels.size()) - shift);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto j = lookup(idx, x[i], variable) - shift;
            if (j >= 0) {
                B(static_cast<Eigen::Index>(i), j) = 1.0;
            }
        }
        return B;
    }
};

struct FrozenInteraction final : Design::Frozen {
    std::string first, second;
    std::vector<std::string> first_levels, second_levels;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& a  = frame.labels(first);
        const auto& b  = frame.labels(second);
        const auto ia  = level_index(first_levels);
        const auto ib  = level_index(second_levels);
        const auto nb  = static_cast<Eigen::Index>(second_levels.size()) - 1;
        const auto na  = static_cast<Eigen::Index>(first_levels.size()) - 1;
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.size()), na * nb);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto ja = lookup(ia, a[i], first);
            const auto jb = lookup(ib, b[i], second);
            if (ja > 0 && jb > 0) {
                B(static_cast<Eigen::Index>(i), (ja - 1) * nb + (jb - 1)) = 1.0;
            }
        }
        return B;
    }
};

struct FrozenSmooth final : Design::Frozen {
    std::string variable;
    std::string by;
    BSplineSpec spec;
    std::optional<Eigen::MatrixXd> transform;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& x     = frame.numeric(variable);
        Eigen::MatrixXd B = evaluate_basis(spec, x);
        if (!by.empty()) {
            const auto& w = frame.numeric(by);
            for (std::size_t i = 0; i < w.size(); ++i) {
                B.row(static_cast<Eigen::Index>(i)) *= w[i];
            }
        }
        if (transform) {
            return B * *transform;
        }
        return B;
    }
};

struct FrozenPiecewise final : Design::Frozen {
    std::string variable;
    TruncatedLinearSpec spec;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        return evaluate_basis(spec, frame.numeric(variable));
    }
};

struct FrozenSpatial final : Design::Frozen {
    std::string lon, lat;
    std::shared_ptr<ThinPlateBasis> basis;
    std::optional<Eigen::MatrixXd> transform;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& x = frame.numeric(lon);
        const auto& y = frame.numeric(lat);
        Eigen::MatrixX2d pts(static_cast<Eigen::Index>(x.size()), 2);
        for (std::size_t i = 0; i < x.size(); ++i) {
            pts(static_cast<Eigen::Index>(i), 0) = x[i];
            pts(static_cast<Eigen::Index>(i), 1) = y[i];
        }
        Eigen::MatrixXd B = basis->evaluate(pts);
        if (transform) {
            return B * *transform;
        }
        return B;
    }
};

struct FrozenRandom final : Design::Frozen {
    std::string variable;
    RandomInterceptSpec spec;
    Eigen::MatrixXd evaluate(const Frame& frame) const override
    {
        const auto& x = frame.labels(variable);
        try {
            return evaluate_basis(spec, x);
        }
        catch (const DomainError& e) {
            throw DomainError(fmt::format("{} (random intercept '{}')", e.what(), variable));
        }
    }
};

struct BuiltTerm {
    std::shared_ptr<Design::Frozen> frozen;
    Eigen::MatrixXd columns;
    std::vector<std::string> names;
    std::optional<Eigen::MatrixXd> penalty;
};

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index k)
{
    std::vector<std::string> out;
    for (Eigen::Index j = 1; j <= k; ++j) {
        out.push_back(fmt::format("{}.{}", prefix, j));
    }
    return out;
}

BuiltTerm build_term(const Term& term, const Frame& frame)
{
    const std::string label = term_label(term);
    return std::visit(
        overloaded{
            [&](const LinearTerm& t) {
                auto f      = std::make_shared<FrozenLinear>();
                f->variable = t.variable;
                BuiltTerm out{f, f->evaluate(frame), {t.variable}, std::nullopt};
                return out;
            },
            [&](const FactorTerm& t) {
                auto f        = std::make_shared<FrozenFactor>();
                f->variable   = t.variable;
                f->levels     = t.levels.empty() ? sorted_levels(frame.labels(t.variable)) : t.levels;
                f->drop_first = t.drop_first;
                BuiltTerm out{f, f->evaluate(frame), {}, std::nullopt};
                for (std::size_t j = t.drop_first ? 1 : 0; j < f->levels.size(); ++j) {
                    out.names.push_back(fmt::format("{}[{}]", t.variable, f->levels[j]));
                }
                return out;
            },
            [&](const InteractionTerm& t) {
                auto f           = std::make_shared<FrozenInteraction>();
                f->first         = t.first;
                f->second        = t.second;
                f->first_levels  = t.first_levels.empty() ? sorted_levels(frame.labels(t.first)) : t.first_levels;
                f->second_levels = t.second_levels.empty() ? sorted_levels(frame.labels(t.second)) : t.second_levels;
                BuiltTerm out{f, f->evaluate(frame), {}, std::nullopt};
                for (std::size_t a = 1; a < f->first_levels.size(); ++a) {
                    for (std::size_t b = 1; b < f->second_levels.size(); ++b) {
                        out.names.push_back(fmt::format("{}[{}]:{}[{}]", t.first, f->first_levels[a], t.second,
                                                        f->second_levels[b]));
                    }
                }
                return out;
            },
            [&](const SmoothTerm& t) {
                auto f                  = std::make_shared<FrozenSmooth>();
                f->variable             = t.variable;
                f->by                   = t.by;
                f->spec.degree          = t.degree;
                f->spec.num_basis       = t.num_basis;
                f->spec.penalty_order   = t.penalty_order;
                const auto& x           = frame.numeric(t.variable);
                if (t.domain) {
                    f->spec.domain = *t.domain;
                }
                else {
                    if (x.empty()) {
                        throw DataError(fmt::format("smooth '{}' has no data to infer its domain", label));
                    }
                    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
                    f->spec.domain      = {*lo, *hi};
                }
                Eigen::MatrixXd B = f->evaluate(frame);
                Eigen::MatrixXd S = penalty_matrix(f->spec);
                if (t.centered) {
                    auto c       = apply_centering_constraint(B, S);
                    f->transform = c.transform;
                    B            = std::move(c.basis);
                    S            = std::move(c.penalty);
                }
                BuiltTerm out{f, std::move(B), {}, std::move(S)};
                out.names = numbered(label, out.columns.cols());
                return out;
            },
            [&](const PiecewiseLinearTerm& t) {
                auto f               = std::make_shared<FrozenPiecewise>();
                f->variable          = t.variable;
                f->spec.knot_spacing = t.knot_spacing;
                if (t.horizon) {
                    f->spec.horizon = *t.horizon;
                }
                else {
                    const auto& x = frame.numeric(t.variable);
                    if (x.empty()) {
                        throw DataError(fmt::format("term '{}' has no data to infer its horizon", label));
                    }
                    f->spec.horizon = static_cast<int>(std::ceil(*std::max_element(x.begin(), x.end())));
                }
                BuiltTerm out{f, f->evaluate(frame), {fmt::format("{}.slope", label)},
                              penalty_matrix(f->spec)};
                for (int l = 1; l <= f->spec.num_hinges(); ++l) {
                    out.names.push_back(fmt::format("{}.hinge{}", label, l * f->spec.knot_spacing));
                }
                return out;
            },
            [&](const SpatialTerm& t) {
                auto f        = std::make_shared<FrozenSpatial>();
                f->lon        = t.lon;
                f->lat        = t.lat;
                const auto& x = frame.numeric(t.lon);
                const auto& y = frame.numeric(t.lat);
                ThinPlateSpec spec;
                spec.rank = t.rank;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    spec.centers.push_back({x[i], y[i]});
                }
                f->basis          = std::make_shared<ThinPlateBasis>(spec);
                Eigen::MatrixXd B = f->evaluate(frame);
                Eigen::MatrixXd S = f->basis->penalty();
                if (t.centered) {
                    auto c       = apply_centering_constraint(B, S);
                    f->transform = c.transform;
                    B            = std::move(c.basis);
                    S            = std::move(c.penalty);
                }
                BuiltTerm out{f, std::move(B), {}, std::move(S)};
                out.names = numbered(label, out.columns.cols());
                return out;
            },
            [&](const RandomInterceptTerm& t) {
                auto f         = std::make_shared<FrozenRandom>();
                f->variable    = t.variable;
                f->spec.levels = t.levels.empty() ? sorted_levels(frame.labels(t.variable)) : t.levels;
                BuiltTerm out{f, f->evaluate(frame), {}, penalty_matrix(f->spec)};
                for (const auto& level : f->spec.levels) {
                    out.names.push_back(fmt::format("{}[{}]", label, level));
                }
                return out;
            },
        },
        term);
}

} // namespace

Design Design::build(const DesignSpec& spec, const Frame& frame)
{
    Design d;
    d.m_spec             = spec;
    const auto n         = static_cast<Eigen::Index>(frame.rows());
    std::vector<BuiltTerm> built;
    std::vector<std::string> labels;
    if (spec.intercept) {
        auto f = std::make_shared<FrozenIntercept>();
        built.push_back({f, f->evaluate(frame), {"(Intercept)"}, std::nullopt});
        labels.emplace_back("(Intercept)");
    }
    for (const auto& term : spec.terms) {
        auto b = build_term(term, frame);
        if (b.columns.cols() == 0) {
            spdlog::warn("term {} has no columns after constraints and is dropped", term_label(term));
            continue;
        }
        labels.push_back(term_label(term));
        built.push_back(std::move(b));
    }

    Eigen::Index p = 0;
    for (const auto& b : built) {
        p += b.columns.cols();
    }
    d.m_X.resize(n, p);
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < built.size(); ++i) {
        auto& b              = built[i];
        const Eigen::Index k = b.columns.cols();
        d.m_X.middleCols(col, k) = b.columns;
        d.m_names.insert(d.m_names.end(), b.names.begin(), b.names.end());
        TermLayout layout{labels[i], col, k, -1};
        if (b.penalty && b.penalty->cwiseAbs().maxCoeff() > 0.0) {
            const Eigen::MatrixXd XtX = b.columns.transpose() * b.columns;
            const double s_norm       = b.penalty->norm();
            const double x_norm       = XtX.norm();
            const double scale        = x_norm > 0.0 ? x_norm / s_norm : 1.0;
            layout.block              = static_cast<int>(d.m_blocks.size());
            d.m_blocks.push_back({labels[i], col, k, *b.penalty * scale, scale});
        }
        d.m_layout.push_back(layout);
        d.m_frozen.push_back(b.frozen);
        col += k;
    }
    d.m_offset = spec.offset.empty() ? Eigen::VectorXd::Zero(n) : d.offset_of(frame);
    if (!spec.trials.empty()) {
        const auto& m = frame.numeric(spec.trials);
        d.m_trials    = Eigen::Map<const Eigen::VectorXd>(m.data(), n);
    }
    return d;
}

const TermLayout* Design::find_term(const std::string& name) const
{
    for (const auto& t : m_layout) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

std::optional<Eigen::Index> Design::find_column(const std::string& name) const
{
    const auto it = std::find(m_names.begin(), m_names.end(), name);
    if (it == m_names.end()) {
        return std::nullopt;
    }
    return static_cast<Eigen::Index>(it - m_names.begin());
}

Eigen::MatrixXd Design::model_matrix(const Frame& frame) const
{
    Eigen::MatrixXd X(static_cast<Eigen::Index>(frame.rows()), m_X.cols());
    for (std::size_t i = 0; i < m_frozen.size(); ++i) {
        X.middleCols(m_layout[i].start, m_layout[i].size) = m_frozen[i]->evaluate(frame);
    }
    return X;
}

Eigen::MatrixXd Design::term_matrix(const std::string& name, const Frame& frame) const
{
    for (std::size_t i = 0; i < m_layout.size(); ++i) {
        if (m_layout[i].name == name) {
            return m_frozen[i]->evaluate(frame);
        }
    }
    throw ConfigError(fmt::format("design has no term '{}'", name));
}

Eigen::VectorXd Design::offset_of(const Frame& frame) const
{
    const auto n = static_cast<Eigen::Index>(frame.rows());
    if (m_spec.offset.empty()) {
        return Eigen::VectorXd::Zero(n);
    }
    const auto& o = frame.numeric(m_spec.offset);
    Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(o.data(), n);
    if (!out.allFinite()) {
        throw DataError(fmt::format("offset column '{}' has non-finite values", m_spec.offset));
    }
    return out;
}

} // namespace epigam
