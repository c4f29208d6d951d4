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
#ifndef EPIGAM_DESIGN_HPP
#define EPIGAM_DESIGN_HPP

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "epigam/basis.hpp"

namespace epigam
{

/// Column store of named numeric and label variables sharing a row count.
class Frame
{
public:
    Frame() = default;

    Frame& add(const std::string& name, std::vector<double> values);
    Frame& add(const std::string& name, std::vector<std::string> labels);

    bool has_numeric(const std::string& name) const
    {
        return m_numeric.count(name) > 0;
    }
    bool has_labels(const std::string& name) const
    {
        return m_labels.count(name) > 0;
    }
    const std::vector<double>& numeric(const std::string& name) const;
    const std::vector<std::string>& labels(const std::string& name) const;
    std::size_t rows() const
    {
        return m_rows;
    }
    Frame subset(std::span<const std::size_t> rows) const;

private:
    void check_rows(const std::string& name, std::size_t n);

    std::size_t m_rows = 0;
    bool m_has_columns = false;
    std::map<std::string, std::vector<double>> m_numeric;
    std::map<std::string, std::vector<std::string>> m_labels;
};

struct LinearTerm {
    std::string variable;
};

/// Dummy coding; levels default to the sorted distinct values. With
/// drop_first the first level is the reference and gets no column.
struct FactorTerm {
    std::string variable;
    std::vector<std::string> levels;
    bool drop_first = true;
};

/// Products of the non-reference dummies of two factors.
struct InteractionTerm {
    std::string first;
    std::string second;
    std::vector<std::string> first_levels;
    std::vector<std::string> second_levels;
};

/// Penalized B-spline smooth, optionally multiplied by a numeric `by` variable.
struct SmoothTerm {
    std::string variable;
    int num_basis     = 10;
    int degree        = 3;
    int penalty_order = 2;
    std::optional<Interval> domain;
    std::string by;
    bool centered = true;
};

/// theta * t + sum_l alpha_l (t - spacing*l)_+, ridge penalty on the alphas.
struct PiecewiseLinearTerm {
    std::string variable;
    int knot_spacing = 28;
    std::optional<int> horizon;
};

struct SpatialTerm {
    std::string lon;
    std::string lat;
    int rank      = 30;
    bool centered = true;
};

struct RandomInterceptTerm {
    std::string variable;
    std::vector<std::string> levels;
};

using Term = std::variant<LinearTerm, FactorTerm, InteractionTerm, SmoothTerm, PiecewiseLinearTerm, SpatialTerm,
                          RandomInterceptTerm>;

std::string term_label(const Term& term);

struct DesignSpec {
    bool intercept = true;
    std::vector<Term> terms;
    std::string offset; ///< numeric column added on the link scale; empty for none
    std::string trials; ///< binomial trials column; empty for none
};

/// One quadratic penalty lambda * beta' S beta acting on a contiguous column range.
struct PenaltyBlock {
    std::string name;
    Eigen::Index start = 0;
    Eigen::Index size  = 0;
    Eigen::MatrixXd S; ///< scaled penalty (raw penalty times `scale`)
    double scale = 1.0;
};

struct TermLayout {
    std::string name;
    Eigen::Index start = 0;
    Eigen::Index size  = 0;
    int block          = -1; ///< index into blocks(), -1 if unpenalized
};

/**
 * A model matrix together with the frozen term definitions (levels, knots,
 * constraint transforms) needed to evaluate the same terms on new data.
 */
class Design
{
public:
    static Design build(const DesignSpec& spec, const Frame& frame);

    const Eigen::MatrixXd& X() const
    {
        return m_X;
    }
    const Eigen::VectorXd& offset() const
    {
        return m_offset;
    }
    const Eigen::VectorXd& trials() const
    {
        return m_trials;
    }
    Eigen::Index rows() const
    {
        return m_X.rows();
    }
    Eigen::Index cols() const
    {
        return m_X.cols();
    }
    const std::vector<std::string>& column_names() const
    {
        return m_names;
    }
    const std::vector<PenaltyBlock>& blocks() const
    {
        return m_blocks;
    }
    const std::vector<TermLayout>& terms() const
    {
        return m_layout;
    }
    const DesignSpec& spec() const
    {
        return m_spec;
    }
    const TermLayout* find_term(const std::string& name) const;
    std::optional<Eigen::Index> find_column(const std::string& name) const;

    /// Evaluates the frozen terms on a new frame (same variables).
    Eigen::MatrixXd model_matrix(const Frame& frame) const;
    Eigen::VectorXd offset_of(const Frame& frame) const;
    /// Columns of one term evaluated on a new frame.
    Eigen::MatrixXd term_matrix(const std::string& name, const Frame& frame) const;

    struct Frozen;

private:
    DesignSpec m_spec;
    Eigen::MatrixXd m_X;
    Eigen::VectorXd m_offset;
    Eigen::VectorXd m_trials;
    std::vector<std::string> m_names;
    std::vector<PenaltyBlock> m_blocks;
    std::vector<TermLayout> m_layout;
    std::vector<std::shared_ptr<const Frozen>> m_frozen;
};

} // namespace epigam

#endif // EPIGAM_DESIGN_HPP
