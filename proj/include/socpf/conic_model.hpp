#pragma once

#include <iosfwd>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace socpf {

using VarId = int;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary };

struct Variable {
    std::string name;
    double lb = -kInf;
    double ub = kInf;
    VarKind kind = VarKind::Continuous;
};

/// Affine expression sum_i coef_i * x_i + constant.
struct LinearExpr {
    std::vector<std::pair<VarId, double>> terms;
    double constant = 0.0;

    LinearExpr() = default;
    explicit LinearExpr(double c) : constant(c) {}

    LinearExpr& add(VarId v, double coef) {
        if (coef != 0.0) terms.emplace_back(v, coef);
        return *this;
    }
    LinearExpr& add(const LinearExpr& other, double scale = 1.0);

    double evaluate(std::span<const double> x) const;
};

enum class Sense { Eq, Le, Ge };

/// expr (sense) rhs; the expression constant is folded in when the model is solved.
struct LinearRow {
    std::string name;
    LinearExpr expr;
    Sense sense = Sense::Eq;
    double rhs = 0.0;
};

/// Second-order cone ||tail|| <= head.
struct SocConstraint {
    std::string name;
    LinearExpr head;
    std::vector<LinearExpr> tail;
};

/// Solver-agnostic mixed-integer SOCP: linear objective, linear rows, SOC rows, bounds.
///
/// Binary variables may be grouped into "exclusive-zero" groups: an accepted
/// integer solution has exactly one member of each group equal to zero. The
/// branch-and-bound uses these groups to branch on which member is zero.
class ConicModel {
public:
    VarId add_variable(std::string name, double lb = -kInf, double ub = kInf,
                       VarKind kind = VarKind::Continuous);
    int add_row(std::string name, LinearExpr expr, Sense sense, double rhs);
    /// Adds the cone unless a cone with the same name is already present.
    bool add_cone(SocConstraint cone);
    bool has_cone(const std::string& name) const { return cone_names_.count(name) > 0; }
    void add_exclusive_zero_group(std::vector<VarId> group) { groups_.push_back(std::move(group)); }

    void set_objective(LinearExpr obj) { objective_ = std::move(obj); }
    void set_bounds(VarId v, double lb, double ub);

    const std::vector<Variable>& variables() const { return vars_; }
    const std::vector<LinearRow>& rows() const { return rows_; }
    const std::vector<SocConstraint>& cones() const { return cones_; }
    const std::vector<std::vector<VarId>>& exclusive_zero_groups() const { return groups_; }
    const LinearExpr& objective() const { return objective_; }
    const Variable& variable(VarId v) const { return vars_.at(static_cast<size_t>(v)); }

    int num_variables() const { return static_cast<int>(vars_.size()); }
    int num_binaries() const;

    /// Largest violation of any bound, linear row, or cone at x.
    double max_violation(std::span<const double> x) const;

private:
    std::vector<Variable> vars_;
    std::vector<LinearRow> rows_;
    std::vector<SocConstraint> cones_;
    std::set<std::string> cone_names_;
    std::vector<std::vector<VarId>> groups_;
    LinearExpr objective_;
};

/// Plain-text dump of a model (variables, objective, rows, cones).
void write_model(std::ostream& out, const ConicModel& model);

}  // namespace socpf
